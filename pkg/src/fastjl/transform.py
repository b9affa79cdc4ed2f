"""The PHD embedding pipeline.

The embedding of a vector ``x`` is ``k^{-1/2} * P @ H @ D @ x`` where

* ``D`` is a diagonal of independent uniform random signs,
* ``H`` is the normalized Walsh-Hadamard matrix (applied in O(d log d)),
* ``P`` is a sparse k x d matrix whose cells are independently occupied
  with probability ``q`` and carry weight ``N / sqrt(q)`` for a standard
  Gaussian ``N``.

A dense Gaussian embedding is provided as the classical reference.
All samplers are pure functions of their seed; see :mod:`fastjl.rng`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DimensionError, ParameterError
from .rng import check_seed, substream

# Key paths so that the sign diagonal, the sparse projection and the dense
# reference matrix drawn from one seed are independent streams.
_SIGNS_KEY = 0
_PROJECTION_KEY = 1
_DENSE_KEY = 2

__all__ = [
    "NormCriterion",
    "JlParams",
    "SignDiagonal",
    "SparseProjection",
    "is_power_of_two",
    "fwht_inplace",
    "sample_signs",
    "apply_signs",
    "sample_projection",
    "project",
    "embed",
    "embed_with",
    "sample_dense_matrix",
    "dense_embed_reference",
]


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _check_float_vector(v: np.ndarray, name: str = "v") -> None:
    if not isinstance(v, np.ndarray) or v.ndim != 1:
        raise DimensionError(f"{name} must be a 1-d numpy array")
    if v.dtype != np.float64:
        raise ParameterError(f"{name} must have dtype float64, got {v.dtype}")


def fwht_inplace(v: np.ndarray) -> np.ndarray:
    """In-place multiplication by the normalized Hadamard matrix H_d.

    ``v`` must be a float64 vector whose length is a power of two.  Runs in
    O(d log d) using butterfly passes on the buffer itself; the transformed
    vector is returned for convenience.  H_d is symmetric orthogonal, so
    applying the transform twice restores the input.
    """
    _check_float_vector(v)
    if not is_power_of_two(v.shape[0]):
        raise DimensionError(f"length must be a power of two, got {v.shape[0]}")
    return _fwht_last_axis(v)


def _fwht_last_axis(a: np.ndarray) -> np.ndarray:
    """Butterfly core; transforms the last axis of ``a`` without scratch buffers."""
    d = a.shape[-1]
    h = 1
    while h < d:
        v = a.reshape(a.shape[:-1] + (d // (2 * h), 2, h))
        top = v[..., 0, :]
        bot = v[..., 1, :]
        # (top, bot) <- (top + bot, top - bot) in three in-place passes
        top += bot
        bot *= -2.0
        bot += top
        h *= 2
    a *= d**-0.5
    return a


class NormCriterion(Enum):
    """Whether the (1 +- eps) window is checked on ||.||^2 or on ||.||."""

    SQUARED_NORM = "squared"
    NORM = "norm"


@dataclass(frozen=True)
class JlParams:
    """Full configuration of one PHD embedding."""

    d: int
    k: int
    eps: float
    q: float
    seed: int
    norm_criterion: NormCriterion = NormCriterion.SQUARED_NORM

    def __post_init__(self) -> None:
        if not is_power_of_two(self.d):
            raise ParameterError(f"d must be a power of two >= 1, got {self.d}")
        if not 1 <= self.k <= self.d:
            raise ParameterError(f"k must satisfy 1 <= k <= d, got k={self.k}, d={self.d}")
        if not 0.0 < self.eps < 1.0:
            raise ParameterError(f"eps must be in (0, 1), got {self.eps}")
        if not 0.0 < self.q <= 1.0:
            raise ParameterError(f"q must be in (0, 1], got {self.q}")
        check_seed(self.seed)


@dataclass(frozen=True)
class SignDiagonal:
    """Rademacher diagonal: d independent signs plus the seed that made them."""

    signs: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        _check_float_vector(self.signs, "signs")
        if not np.all(np.abs(self.signs) == 1.0):
            raise ParameterError("sign entries must be exactly +1 or -1")

    @property
    def d(self) -> int:
        return self.signs.shape[0]


def _draw_signs(rng: np.random.Generator, d: int) -> np.ndarray:
    return rng.integers(0, 2, size=d).astype(np.float64) * 2.0 - 1.0


def sample_signs(d: int, seed: int) -> SignDiagonal:
    """Draw the random sign diagonal D (deterministic per seed)."""
    if d < 1:
        raise ParameterError(f"d must be >= 1, got {d}")
    rng = substream(seed, _SIGNS_KEY)
    return SignDiagonal(signs=_draw_signs(rng, d), seed=check_seed(seed))


def apply_signs(v: np.ndarray, diag: SignDiagonal) -> np.ndarray:
    """Componentwise product D @ v; preserves the norm exactly."""
    _check_float_vector(v)
    if v.shape[0] != diag.d:
        raise DimensionError(f"length mismatch: v has {v.shape[0]}, diagonal has {diag.d}")
    return diag.signs * v


@dataclass(frozen=True)
class SparseProjection:
    """Row-compressed k x d matrix of scaled Gaussian entries (the matrix P).

    Row ``i`` occupies ``cols[indptr[i]:indptr[i+1]]`` with weights
    ``weights[indptr[i]:indptr[i+1]]``; weights are ``N / sqrt(q)``.
    """

    k: int
    d: int
    q: float
    indptr: np.ndarray
    cols: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        if self.k < 1 or self.d < 1:
            raise ParameterError(f"k and d must be >= 1, got k={self.k}, d={self.d}")
        if not 0.0 <= self.q <= 1.0:
            raise ParameterError(f"q must be in [0, 1], got {self.q}")
        if self.indptr.shape != (self.k + 1,) or self.indptr[0] != 0 or self.indptr[-1] != len(self.cols):
            raise DimensionError("indptr must have shape (k+1,) spanning the entry arrays")
        counts = np.diff(self.indptr)
        if counts.min(initial=0) < 0:
            raise DimensionError("indptr must be non-decreasing")
        if len(self.cols) != len(self.weights):
            raise DimensionError("cols and weights must have equal length")
        if len(self.cols):
            if self.cols.min() < 0 or self.cols.max() >= self.d:
                raise DimensionError("column indices must lie in [0, d)")
            # given the bounds, strict increase within each row is equivalent
            # to strict monotonicity of the flattened k*d cell indices
            flat = np.repeat(np.arange(self.k, dtype=np.int64) * self.d, counts) + self.cols
            if np.diff(flat).min(initial=1) <= 0:
                raise DimensionError("column indices must be strictly increasing within a row")
            if not np.isfinite(self.weights.min()) or not np.isfinite(self.weights.max()):
                raise ParameterError("weights must be finite")

    @property
    def nnz(self) -> int:
        return int(len(self.cols))

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """(column indices, weights) of row ``i``."""
        lo, hi = int(self.indptr[i]), int(self.indptr[i + 1])
        return self.cols[lo:hi], self.weights[lo:hi]


def _geometric_positions(rng: np.random.Generator, ncells: int, q: float) -> np.ndarray:
    """Indices of Bernoulli(q) successes among ``ncells`` cells, via gap skipping.

    Gaps between successive successes are iid Geometric(q), so the expected
    work is O(ncells * q) instead of ncells coin flips.
    """
    if q >= 1.0:
        return np.arange(ncells, dtype=np.int64)
    mean = ncells * q
    batch = int(mean + 10.0 * math.sqrt(max(mean * (1.0 - q), 1.0)) + 16.0)
    chunks = []
    last = -1
    while last < ncells:
        gaps = rng.geometric(q, size=max(batch, 16))
        cum = np.cumsum(gaps) + last
        chunks.append(cum)
        last = int(cum[-1])
        batch = 16  # top-ups after an unlucky first batch are rare
    pos = np.concatenate(chunks) if len(chunks) > 1 else chunks[0]
    return pos[pos < ncells].astype(np.int64, copy=False)


def _draw_projection_arrays(
    rng: np.random.Generator, k: int, d: int, q: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    pos = _geometric_positions(rng, k * d, q)
    weights = rng.standard_normal(len(pos)) / math.sqrt(q)
    indptr = np.searchsorted(pos, np.arange(k + 1, dtype=np.int64) * d, side="left")
    return indptr.astype(np.int64), pos % d, weights


def sample_projection(k: int, d: int, q: float, seed: int) -> SparseProjection:
    """Draw the sparse projection P (deterministic per seed).

    Each of the k*d cells is occupied independently with probability q;
    occupied cells carry weight ``standard normal / sqrt(q)``.  Sampling
    skips over empty cells with geometric gaps, so it costs O(nnz)
    expected time rather than O(kd).
    """
    if k < 1 or d < 1:
        raise ParameterError(f"k and d must be >= 1, got k={k}, d={d}")
    if not 0.0 < q <= 1.0:
        raise ParameterError(f"q must be in (0, 1], got {q}")
    rng = substream(seed, _PROJECTION_KEY)
    indptr, cols, weights = _draw_projection_arrays(rng, k, d, q)
    return SparseProjection(k=k, d=d, q=float(q), indptr=indptr, cols=cols, weights=weights)


def _project_core(indptr: np.ndarray, cols: np.ndarray, weights: np.ndarray, v: np.ndarray) -> np.ndarray:
    prods = weights * v[cols]
    csum = np.concatenate(([0.0], np.cumsum(prods)))
    return csum[indptr[1:]] - csum[indptr[:-1]]


def project(P: SparseProjection, v: np.ndarray) -> np.ndarray:
    """Sparse matrix-vector product P @ v in O(nnz)."""
    _check_float_vector(v)
    if v.shape[0] != P.d:
        raise DimensionError(f"length mismatch: v has {v.shape[0]}, projection has d={P.d}")
    return _project_core(P.indptr, P.cols, P.weights, v)


def embed(x: np.ndarray, params: JlParams) -> np.ndarray:
    """The full embedding k^{-1/2} P H D x with (D, P) drawn from params.seed.

    ``x`` must already have length params.d (callers zero-pad to the next
    power of two beforehand; this layer rejects other lengths so the
    unitary contract of H stays exact).  Bit-identical to ``embed_with``
    applied to ``sample_signs`` / ``sample_projection`` at the same seed,
    but skips building the intermediate structures.
    """
    _check_float_vector(x, "x")
    if x.shape[0] != params.d:
        raise DimensionError(f"length mismatch: x has {x.shape[0]}, params.d is {params.d}")
    u = _draw_signs(substream(params.seed, _SIGNS_KEY), params.d) * x
    _fwht_last_axis(u)
    rng = substream(params.seed, _PROJECTION_KEY)
    indptr, cols, weights = _draw_projection_arrays(rng, params.k, params.d, params.q)
    return _project_core(indptr, cols, weights, u) * params.k**-0.5


def embed_with(x: np.ndarray, diag: SignDiagonal, proj: SparseProjection) -> np.ndarray:
    """Embed with a pre-sampled (D, P) pair, so one draw can embed many vectors."""
    _check_float_vector(x, "x")
    if x.shape[0] != diag.d or diag.d != proj.d:
        raise DimensionError(
            f"length mismatch: x has {x.shape[0]}, diagonal has {diag.d}, projection has d={proj.d}"
        )
    u = apply_signs(x, diag)
    _fwht_last_axis(u)
    return _project_core(proj.indptr, proj.cols, proj.weights, u) * proj.k**-0.5


def sample_dense_matrix(k: int, d: int, seed: int) -> np.ndarray:
    """Dense k x d matrix of iid standard Gaussians (deterministic per seed)."""
    if k < 1 or d < 1:
        raise ParameterError(f"k and d must be >= 1, got k={k}, d={d}")
    rng = substream(seed, _DENSE_KEY)
    return rng.standard_normal((k, d))


def dense_embed_reference(x: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Classical dense Gaussian embedding k^{-1/2} A x (timing/correctness baseline)."""
    _check_float_vector(x, "x")
    A = sample_dense_matrix(k, x.shape[0], seed)
    return (A @ x) * k**-0.5
