# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the numpy simplex kernels.

Same selection rules, same tie-breaking, same arithmetic order as
`_kernels_py`, with the passes fused into single C loops.  The solver must
pick identical pivots whichever backend is active.
"""

from libc.math cimport INFINITY, fabs

BASIC = 0
AT_LOWER = 1
AT_UPPER = 2
FREE = 3
FIXED = 4


def choose_entering(double[::1] d, signed char[::1] status,
                    double[::1] inv_scale, double tol, bint bland=False):
    cdef Py_ssize_t n = d.shape[0]
    cdef Py_ssize_t j, best_j = -1
    cdef double best = INFINITY
    cdef double score
    cdef signed char st
    for j in range(n):
        st = status[j]
        if (st == AT_LOWER or st == FREE) and d[j] < -tol:
            if bland:
                return j
            score = d[j] * inv_scale[j]
            if score < best:
                best = score
                best_j = j
        elif (st == AT_UPPER or st == FREE) and d[j] > tol:
            if bland:
                return j
            score = -d[j] * inv_scale[j]
            if score < best:
                best = score
                best_j = j
    return best_j


def ratio_test(double[::1] x_basic, double[::1] lo_basic,
               double[::1] up_basic, double[::1] w, double sigma,
               double gap_entering, double tol_piv):
    cdef Py_ssize_t m = x_basic.shape[0]
    cdef Py_ssize_t i, pos = -1
    cdef double best = INFINITY
    cdef double rate, room, limit, cut, best_w, step
    for i in range(m):
        rate = -sigma * w[i]
        if rate > tol_piv:
            room = up_basic[i] - x_basic[i]
            if room < 0.0:
                room = 0.0
            limit = room / rate
        elif rate < -tol_piv:
            room = x_basic[i] - lo_basic[i]
            if room < 0.0:
                room = 0.0
            limit = room / (-rate)
        else:
            continue
        if limit < best:
            best = limit
    if gap_entering <= best:
        if gap_entering == INFINITY:
            return INFINITY, -2, False
        return gap_entering, -1, False
    cut = best + 1e-12 * (1.0 + fabs(best))
    best_w = -1.0
    step = 0.0
    for i in range(m):
        rate = -sigma * w[i]
        if rate > tol_piv:
            room = up_basic[i] - x_basic[i]
            if room < 0.0:
                room = 0.0
            limit = room / rate
        elif rate < -tol_piv:
            room = x_basic[i] - lo_basic[i]
            if room < 0.0:
                room = 0.0
            limit = room / (-rate)
        else:
            continue
        if limit <= cut and fabs(w[i]) > best_w:
            best_w = fabs(w[i])
            pos = i
            step = limit
    return step, pos, bool(-sigma * w[pos] > 0.0)


def update_inverse(double[::1, :] binv, double[::1] w, Py_ssize_t row):
    cdef Py_ssize_t m = binv.shape[0]
    cdef Py_ssize_t i, j
    cdef double piv = w[row]
    cdef double r
    for j in range(m):
        r = binv[row, j] / piv
        binv[row, j] = r
        for i in range(m):
            if i != row:
                binv[i, j] = binv[i, j] - w[i] * r
    return None
