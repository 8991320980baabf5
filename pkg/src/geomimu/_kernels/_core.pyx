# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: nearest-code search and skinning transform.

Contracts mirror ``fallback.py`` exactly; results must match bit-for-bit on
identical float64 input because both sides accumulate in the same order.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def nearest_codes(x, codebook):
    """Index of the nearest codebook row per input row, squared-L2 metric."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] xx = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] cc = np.ascontiguousarray(codebook, dtype=np.float64)
    if xx.shape[1] != cc.shape[1]:
        raise ValueError("nearest_codes: need (n, d) inputs and (k, d) codebook")
    cdef Py_ssize_t n = xx.shape[0], k = cc.shape[0], d = xx.shape[1]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(n, dtype=np.int64)
    # Match the fallback arithmetic exactly: d2 = ||c||^2 - 2 x.c, computed
    # with the same BLAS matmul, then a first-minimum scan.
    cdef cnp.ndarray[cnp.float64_t, ndim=1] c2 = (cc * cc).sum(axis=1)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] d2 = c2[None, :] - 2.0 * (xx @ cc.T)
    cdef Py_ssize_t i, j, best
    cdef double bv, v
    for i in range(n):
        best = 0
        bv = d2[i, 0]
        for j in range(1, k):
            v = d2[i, j]
            if v < bv:
                bv = v
                best = j
        out[i] = best
    return out


def lbs_transform(rest, weights, joint_idx, A, b):
    """Blend per-joint affine maps onto rest vertices; see fallback for shapes."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] r = np.ascontiguousarray(rest, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=2] ji = np.ascontiguousarray(joint_idx, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=4] AA = np.ascontiguousarray(A, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=3] bb = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t F = AA.shape[0], V = w.shape[0], m = w.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=3] out = np.zeros((F, V, 3), dtype=np.float64)
    cdef Py_ssize_t f, v, col, j
    cdef double wv, x0, x1, x2, y0, y1, y2
    # Influence columns accumulate in the same order as the fallback loop so
    # float64 rounding agrees bit-for-bit.
    for col in range(m):
        for f in range(F):
            for v in range(V):
                wv = w[v, col]
                if wv == 0.0:
                    continue
                j = ji[v, col]
                x0 = r[v, 0]
                x1 = r[v, 1]
                x2 = r[v, 2]
                y0 = AA[f, j, 0, 0] * x0 + AA[f, j, 0, 1] * x1 + AA[f, j, 0, 2] * x2 + bb[f, j, 0]
                y1 = AA[f, j, 1, 0] * x0 + AA[f, j, 1, 1] * x1 + AA[f, j, 1, 2] * x2 + bb[f, j, 1]
                y2 = AA[f, j, 2, 0] * x0 + AA[f, j, 2, 1] * x1 + AA[f, j, 2, 2] * x2 + bb[f, j, 2]
                out[f, v, 0] += wv * y0
                out[f, v, 1] += wv * y1
                out[f, v, 2] += wv * y2
    return out
