"""Deterministic random streams.

Every stochastic routine in the package derives its generators with
:func:`substream`, which hashes ``(seed, key...)`` through numpy's
``SeedSequence``.  Streams with distinct key paths are statistically
independent and reproducible regardless of the order in which they are
consumed, so Monte Carlo work can be split across workers without
changing any result.

Trial loops are partitioned into fixed blocks of ``TRIAL_BLOCK`` trials;
block ``b`` of a run draws everything from ``substream(seed, ..., b)``.
The block size is a constant of the implementation (never a function of
the worker count), which makes parallel and sequential runs bit-identical.
"""

from __future__ import annotations

from typing import Iterator

import numpy as np

from .errors import ParameterError

TRIAL_BLOCK = 4096

_MAX_SEED = 2**64


def check_seed(seed: int) -> int:
    """Validate a 64-bit unsigned seed and return it as a plain int."""
    seed = int(seed)
    if not 0 <= seed < _MAX_SEED:
        raise ParameterError(f"seed must be in [0, 2^64), got {seed}")
    return seed


def substream(seed: int, *key: int) -> np.random.Generator:
    """Generator for the stream identified by ``(seed, *key)``."""
    seq = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(seq)


def derive_seed(seed: int, *key: int) -> int:
    """A 64-bit seed hashed from ``(seed, *key)``, for namespacing experiments."""
    seq = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in key))
    return int(seq.generate_state(1, np.uint64)[0])


def block_ranges(trials: int, block: int = TRIAL_BLOCK) -> Iterator[tuple[int, int, int]]:
    """Yield ``(block_index, lo, hi)`` covering ``range(trials)``."""
    if trials < 1:
        raise ParameterError(f"trials must be >= 1, got {trials}")
    for index, lo in enumerate(range(0, trials, block)):
        yield index, lo, min(lo + block, trials)
