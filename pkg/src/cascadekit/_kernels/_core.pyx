# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled popcount kernels over packed uint64 bit rows."""

import numpy as np

from libc.stdint cimport int64_t, uint64_t

cdef extern from *:
    """
    #if defined(__GNUC__) || defined(__clang__)
    #define CK_POPCOUNT64(x) __builtin_popcountll(x)
    #else
    static int ck_popcount64_sw(unsigned long long x) {
        x = x - ((x >> 1) & 0x5555555555555555ULL);
        x = (x & 0x3333333333333333ULL) + ((x >> 2) & 0x3333333333333333ULL);
        x = (x + (x >> 4)) & 0x0f0f0f0f0f0f0f0fULL;
        return (int)((x * 0x0101010101010101ULL) >> 56);
    }
    #define CK_POPCOUNT64(x) ck_popcount64_sw(x)
    #endif
    """
    int CK_POPCOUNT64(unsigned long long x) nogil


def popcount_rows(const uint64_t[:, ::1] b):
    cdef Py_ssize_t rows = b.shape[0], words = b.shape[1]
    out_arr = np.empty(rows, dtype=np.int64)
    cdef int64_t[::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef int64_t acc
    with nogil:
        for i in range(rows):
            acc = 0
            for j in range(words):
                acc += CK_POPCOUNT64(b[i, j])
            out[i] = acc
    return out_arr


def and_popcount(const uint64_t[::1] a, const uint64_t[:, ::1] b):
    if a.shape[0] != b.shape[1]:
        raise ValueError("word-count mismatch between vector and matrix")
    cdef Py_ssize_t rows = b.shape[0], words = b.shape[1]
    out_arr = np.empty(rows, dtype=np.int64)
    cdef int64_t[::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef int64_t acc
    with nogil:
        for i in range(rows):
            acc = 0
            for j in range(words):
                acc += CK_POPCOUNT64(a[j] & b[i, j])
            out[i] = acc
    return out_arr


def pair_stats(const uint64_t[::1] a, const uint64_t[:, ::1] b, const uint64_t[::1] t):
    if a.shape[0] != b.shape[1] or t.shape[0] != b.shape[1]:
        raise ValueError("word-count mismatch between vectors and matrix")
    cdef Py_ssize_t rows = b.shape[0], words = b.shape[1]
    first_arr = np.empty(rows, dtype=np.int64)
    second_arr = np.empty(rows, dtype=np.int64)
    cdef int64_t[::1] first = first_arr
    cdef int64_t[::1] second = second_arr
    cdef Py_ssize_t i, j
    cdef int64_t acc1, acc2
    cdef uint64_t word
    with nogil:
        for i in range(rows):
            acc1 = 0
            acc2 = 0
            for j in range(words):
                word = a[j] & b[i, j]
                acc1 += CK_POPCOUNT64(word)
                acc2 += CK_POPCOUNT64(word & t[j])
            first[i] = acc1
            second[i] = acc2
    return first_arr, second_arr
