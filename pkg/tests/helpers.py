"""Shared test oracles, independent of the library's fast paths."""

import numpy as np


def dense_hadamard(d: int) -> np.ndarray:
    """The normalized Hadamard matrix built by the explicit recursion."""
    assert d >= 1 and d & (d - 1) == 0
    H = np.array([[1.0]])
    while H.shape[0] < d:
        H = np.block([[H, H], [H, -H]]) / np.sqrt(2.0)
    return H


def wilson_reference(successes: int, trials: int, z: float) -> tuple[float, float]:
    """Textbook Wilson score interval, written out directly."""
    p = successes / trials
    denom = 1.0 + z**2 / trials
    center = p + z**2 / (2 * trials)
    half = z * np.sqrt(p * (1 - p) / trials + z**2 / (4 * trials**2))
    return (center - half) / denom, (center + half) / denom
