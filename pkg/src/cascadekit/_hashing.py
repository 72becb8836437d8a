"""Deterministic 64-bit hashing used for synthetic data generation.

Everything downstream of a seed (labels, difficulties, split membership,
pixel noise, score noise) is derived from these mixers rather than from
Python's randomized ``hash`` or a stateful RNG, so results are stable
across processes and platforms.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

# domain tags keep independent per-seed streams from colliding
TAG_DIFFICULTY = 0xD1FF
TAG_LABEL = 0x1ABE
TAG_SPLIT = 0x5711
TAG_PIXEL = 0x91E1
TAG_IMAGE = 0x1A4E
TAG_SCORE = 0x5C0E


def splitmix64(x: int) -> int:
    """One splitmix64 finalization round of a 64-bit value."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9 & MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & MASK64
    return z ^ (z >> 31)


def mix64(*parts: int) -> int:
    """Fold any number of integers into one well-mixed 64-bit value."""
    h = 0
    for p in parts:
        h = splitmix64((h ^ (p & MASK64)) & MASK64)
    return h


def fnv1a64(text: str) -> int:
    """FNV-1a hash of a string, for folding names into mix64 streams."""
    h = 0xCBF29CE484222325
    for b in text.encode("utf-8"):
        h = ((h ^ b) * 0x100000001B3) & MASK64
    return h


def unit_float(h: int) -> float:
    """Map a 64-bit hash to a float in [0, 1].

    Values within one rounding step of 2**64 land exactly on 1.0.
    """
    return (h & MASK64) / 2.0**64


def splitmix64_array(x: np.ndarray) -> np.ndarray:
    """Vectorized splitmix64 over a uint64 array."""
    with np.errstate(over="ignore"):
        x = x + np.uint64(0x9E3779B97F4A7C15)
        z = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def unit_floats(h: np.ndarray) -> np.ndarray:
    """Vectorized counterpart of unit_float."""
    return h.astype(np.float64) / 2.0**64
