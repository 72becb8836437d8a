"""Packed-bitset popcount kernels with a compiled core and numpy fallback.

Eval-image sets become uint64 bit rows; catalog evaluation reduces to
AND + popcount over those rows.  The Cython extension is used when it
was built; otherwise (or when CASCADEKIT_FORCE_FALLBACK is set) a numpy
implementation with identical semantics takes over.  backend_name()
reports which one is active.
"""

from __future__ import annotations

import os

import numpy as np


def _select_impl():
    forced = os.environ.get("CASCADEKIT_FORCE_FALLBACK", "")
    if forced not in ("", "0"):
        from . import _fallback

        return _fallback, "numpy"
    try:
        from . import _core

        return _core, "compiled"
    except ImportError:
        from . import _fallback

        return _fallback, "numpy"


_impl, _BACKEND = _select_impl()


def backend_name() -> str:
    return _BACKEND


def pack_bool_rows(mask: np.ndarray) -> np.ndarray:
    """Pack a (rows, n) boolean matrix into (rows, ceil(n/64)) uint64 words."""
    mask = np.ascontiguousarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise ValueError("pack_bool_rows expects a 2-D boolean matrix")
    rows, n = mask.shape
    words = max((n + 63) // 64, 1)
    packed = np.packbits(mask, axis=1, bitorder="little") if n else np.zeros((rows, 0), np.uint8)
    out = np.zeros((rows, words * 8), dtype=np.uint8)
    out[:, : packed.shape[1]] = packed
    return out.view(np.uint64)


def pack_bool(mask: np.ndarray) -> np.ndarray:
    """Pack a 1-D boolean vector into uint64 words."""
    return pack_bool_rows(np.asarray(mask, dtype=bool)[None, :])[0]


def _as_words_2d(b: np.ndarray) -> np.ndarray:
    b = np.ascontiguousarray(b, dtype=np.uint64)
    if b.ndim != 2:
        raise ValueError("expected a 2-D uint64 word matrix")
    return b


def _as_words_1d(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.uint64)
    if a.ndim != 1:
        raise ValueError("expected a 1-D uint64 word vector")
    return a


def popcount_rows(b: np.ndarray) -> np.ndarray:
    return _impl.popcount_rows(_as_words_2d(b))


def popcount_words(a: np.ndarray) -> int:
    return int(_impl.popcount_rows(_as_words_1d(a)[None, :])[0])


def and_popcount(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return _impl.and_popcount(_as_words_1d(a), _as_words_2d(b))


def pair_stats(a: np.ndarray, b: np.ndarray, t: np.ndarray):
    return _impl.pair_stats(_as_words_1d(a), _as_words_2d(b), _as_words_1d(t))
