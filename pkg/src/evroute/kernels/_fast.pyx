# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twin of `_pure`: adjacency construction and per-step masking."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

DEF K_DEPOT = 0
DEF K_CUSTOMER = 1


def adjacency_matrix(cnp.float64_t[::1] tw_open, cnp.float64_t[::1] tw_close,
                     cnp.float64_t[:, ::1] tt):
    cdef Py_ssize_t n = tw_open.shape[0]
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] out = np.empty((n, n), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] a = out
    cdef Py_ssize_t i, j
    cdef double lo, hi
    for i in range(n):
        for j in range(n):
            if i == j:
                a[i, j] = 1
                continue
            lo = tw_open[i]
            if tw_open[j] - tt[i, j] > lo:
                lo = tw_open[j] - tt[i, j]
            hi = tw_close[i]
            if tw_close[j] - tt[i, j] < hi:
                hi = tw_close[j] - tt[i, j]
            a[i, j] = 1 if lo <= hi else 0
    return out


def mask_row(cnp.int64_t[::1] kind, cnp.uint8_t[::1] visited,
             cnp.float64_t[::1] demands, cnp.float64_t[::1] tw_close,
             cnp.float64_t[::1] ec_from_cur, cnp.float64_t[::1] tt_from_cur,
             cnp.float64_t[::1] min_onward_ec,
             double rc, double re, double clock, Py_ssize_t cur,
             bint prev_was_depot, bint tw_hard):
    cdef Py_ssize_t n = kind.shape[0]
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] out = np.zeros(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] m = out
    cdef Py_ssize_t i
    for i in range(n):
        if kind[i] == K_CUSTOMER and visited[i]:
            m[i] = 1
        elif demands[i] > rc:
            m[i] = 1
        elif re < ec_from_cur[i] + min_onward_ec[i]:
            m[i] = 1
        elif tw_hard and kind[i] == K_CUSTOMER and clock + tt_from_cur[i] > tw_close[i]:
            m[i] = 1
        elif prev_was_depot and kind[i] == K_DEPOT:
            m[i] = 1
    m[cur] = 1
    return out
