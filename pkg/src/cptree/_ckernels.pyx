# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled segment reductions used by the batched tree encoder.

Rows of ``x`` are grouped into contiguous segments delimited by ``offsets``
(length ``n_segments + 1``). Empty segments reduce to 0 (sum) or 1 (product).
"""
import numpy as np
cimport numpy as cnp

ctypedef fused floating:
    float
    double


def segment_sum(floating[:, ::1] x, const long long[::1] offsets):
    cdef Py_ssize_t n = offsets.shape[0] - 1, k = x.shape[1]
    cdef Py_ssize_t s, row, j
    dtype = np.float32 if floating is float else np.float64
    out_arr = np.zeros((n, k), dtype=dtype)
    cdef floating[:, ::1] out = out_arr
    for s in range(n):
        for row in range(offsets[s], offsets[s + 1]):
            for j in range(k):
                out[s, j] += x[row, j]
    return out_arr


def segment_prod(floating[:, ::1] x, const long long[::1] offsets):
    cdef Py_ssize_t n = offsets.shape[0] - 1, k = x.shape[1]
    cdef Py_ssize_t s, row, j
    dtype = np.float32 if floating is float else np.float64
    out_arr = np.ones((n, k), dtype=dtype)
    cdef floating[:, ::1] out = out_arr
    for s in range(n):
        for row in range(offsets[s], offsets[s + 1]):
            for j in range(k):
                out[s, j] *= x[row, j]
    return out_arr


def segment_prod_grad(floating[:, ::1] x, const long long[::1] offsets, floating[:, ::1] g):
    """Gradient of ``segment_prod``: each row gets ``g[segment]`` times the
    product of the other rows of its segment (prefix/suffix sweep, no division)."""
    cdef Py_ssize_t n = offsets.shape[0] - 1, k = x.shape[1]
    cdef Py_ssize_t s, row, j, lo, hi
    cdef floating acc
    dtype = np.float32 if floating is float else np.float64
    out_arr = np.empty((x.shape[0], k), dtype=dtype)
    cdef floating[:, ::1] out = out_arr
    for s in range(n):
        lo = offsets[s]
        hi = offsets[s + 1]
        for j in range(k):
            acc = g[s, j]
            for row in range(lo, hi):
                out[row, j] = acc
                acc = acc * x[row, j]
            acc = 1
            for row in range(hi - 1, lo - 1, -1):
                out[row, j] = out[row, j] * acc
                acc = acc * x[row, j]
    return out_arr


def scatter_add_rows(const long long[::1] index, floating[:, ::1] g, Py_ssize_t n_rows):
    cdef Py_ssize_t m = index.shape[0], k = g.shape[1]
    cdef Py_ssize_t i, j, dst
    dtype = np.float32 if floating is float else np.float64
    out_arr = np.zeros((n_rows, k), dtype=dtype)
    cdef floating[:, ::1] out = out_arr
    for i in range(m):
        dst = index[i]
        for j in range(k):
            out[dst, j] += g[i, j]
    return out_arr
