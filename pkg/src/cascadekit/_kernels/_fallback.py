"""Pure-numpy popcount kernels, used when the compiled core is absent."""

from __future__ import annotations

import numpy as np

if hasattr(np, "bitwise_count"):
    def _popcount(words: np.ndarray) -> np.ndarray:
        return np.bitwise_count(words)
else:
    _TABLE = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint8)

    def _popcount(words: np.ndarray) -> np.ndarray:
        as_bytes = words.reshape(words.shape + (1,)).view(np.uint8)
        return _TABLE[as_bytes].sum(axis=-1, dtype=np.uint8)


def popcount_rows(b: np.ndarray) -> np.ndarray:
    """Per-row popcount of a (rows, words) uint64 matrix."""
    return _popcount(b).sum(axis=1, dtype=np.int64)


def and_popcount(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """popcount(a & b_row) for every row of b."""
    return _popcount(a[None, :] & b).sum(axis=1, dtype=np.int64)


def pair_stats(a: np.ndarray, b: np.ndarray, t: np.ndarray):
    """For every row r of b: (popcount(a & b_r), popcount(a & b_r & t))."""
    ab = a[None, :] & b
    first = _popcount(ab).sum(axis=1, dtype=np.int64)
    second = _popcount(ab & t[None, :]).sum(axis=1, dtype=np.int64)
    return first, second
