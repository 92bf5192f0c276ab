# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled gridding kernels for the NFFT fast summation.

Same contract as ``kis._gridding_py``; see that module for the layout of
``idx`` and ``w``.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef void _spread1(const cnp.intp_t[:, :, ::1] idx, const double[:, :, ::1] w,
                   const double[::1] v, double[::1] g) noexcept nogil:
    cdef Py_ssize_t i, a
    cdef Py_ssize_t n = idx.shape[0], L = idx.shape[2]
    cdef double vi
    for i in range(n):
        vi = v[i]
        for a in range(L):
            g[idx[i, 0, a]] += vi * w[i, 0, a]


cdef void _spread2(const cnp.intp_t[:, :, ::1] idx, const double[:, :, ::1] w,
                   const double[::1] v, double[:, ::1] g) noexcept nogil:
    cdef Py_ssize_t i, a, b, ia
    cdef Py_ssize_t n = idx.shape[0], L = idx.shape[2]
    cdef double wa
    for i in range(n):
        for a in range(L):
            ia = idx[i, 0, a]
            wa = v[i] * w[i, 0, a]
            for b in range(L):
                g[ia, idx[i, 1, b]] += wa * w[i, 1, b]


cdef void _spread3(const cnp.intp_t[:, :, ::1] idx, const double[:, :, ::1] w,
                   const double[::1] v, double[:, :, ::1] g) noexcept nogil:
    cdef Py_ssize_t i, a, b, c, ia, ib
    cdef Py_ssize_t n = idx.shape[0], L = idx.shape[2]
    cdef double wa, wab
    for i in range(n):
        for a in range(L):
            ia = idx[i, 0, a]
            wa = v[i] * w[i, 0, a]
            for b in range(L):
                ib = idx[i, 1, b]
                wab = wa * w[i, 1, b]
                for c in range(L):
                    g[ia, ib, idx[i, 2, c]] += wab * w[i, 2, c]


cdef void _gather1(const cnp.intp_t[:, :, ::1] idx, const double[:, :, ::1] w,
                   const double[::1] g, double[::1] out) noexcept nogil:
    cdef Py_ssize_t i, a
    cdef Py_ssize_t n = idx.shape[0], L = idx.shape[2]
    cdef double acc
    for i in range(n):
        acc = 0.0
        for a in range(L):
            acc += g[idx[i, 0, a]] * w[i, 0, a]
        out[i] = acc


cdef void _gather2(const cnp.intp_t[:, :, ::1] idx, const double[:, :, ::1] w,
                   const double[:, ::1] g, double[::1] out) noexcept nogil:
    cdef Py_ssize_t i, a, b, ia
    cdef Py_ssize_t n = idx.shape[0], L = idx.shape[2]
    cdef double acc, inner
    for i in range(n):
        acc = 0.0
        for a in range(L):
            ia = idx[i, 0, a]
            inner = 0.0
            for b in range(L):
                inner += g[ia, idx[i, 1, b]] * w[i, 1, b]
            acc += inner * w[i, 0, a]
        out[i] = acc


cdef void _gather3(const cnp.intp_t[:, :, ::1] idx, const double[:, :, ::1] w,
                   const double[:, :, ::1] g, double[::1] out) noexcept nogil:
    cdef Py_ssize_t i, a, b, c, ia, ib
    cdef Py_ssize_t n = idx.shape[0], L = idx.shape[2]
    cdef double acc, mid, inner
    for i in range(n):
        acc = 0.0
        for a in range(L):
            ia = idx[i, 0, a]
            mid = 0.0
            for b in range(L):
                ib = idx[i, 1, b]
                inner = 0.0
                for c in range(L):
                    inner += g[ia, ib, idx[i, 2, c]] * w[i, 2, c]
                mid += inner * w[i, 1, b]
            acc += mid * w[i, 0, a]
        out[i] = acc


def spread(idx, w, v, Py_ssize_t grid_size):
    cdef const cnp.intp_t[:, :, ::1] idx_v = np.ascontiguousarray(idx, dtype=np.intp)
    cdef const double[:, :, ::1] w_v = np.ascontiguousarray(w, dtype=np.float64)
    cdef const double[::1] v_v = np.ascontiguousarray(v, dtype=np.float64)
    cdef int d = idx_v.shape[1]
    if v_v.shape[0] != idx_v.shape[0]:
        raise ValueError("v does not match the number of nodes")
    grid = np.zeros((grid_size,) * d, dtype=np.float64)
    cdef double[::1] g1
    cdef double[:, ::1] g2
    cdef double[:, :, ::1] g3
    if d == 1:
        g1 = grid
        with nogil:
            _spread1(idx_v, w_v, v_v, g1)
    elif d == 2:
        g2 = grid
        with nogil:
            _spread2(idx_v, w_v, v_v, g2)
    elif d == 3:
        g3 = grid
        with nogil:
            _spread3(idx_v, w_v, v_v, g3)
    else:
        raise ValueError(f"gridding supports 1 to 3 dimensions, got {d}")
    return grid


def gather(idx, w, grid):
    cdef const cnp.intp_t[:, :, ::1] idx_v = np.ascontiguousarray(idx, dtype=np.intp)
    cdef const double[:, :, ::1] w_v = np.ascontiguousarray(w, dtype=np.float64)
    cdef int d = idx_v.shape[1]
    out = np.empty(idx_v.shape[0], dtype=np.float64)
    cdef double[::1] out_v = out
    grid = np.ascontiguousarray(grid, dtype=np.float64)
    cdef const double[::1] g1
    cdef const double[:, ::1] g2
    cdef const double[:, :, ::1] g3
    if grid.ndim != d:
        raise ValueError("grid dimension does not match the node layout")
    if d == 1:
        g1 = grid
        with nogil:
            _gather1(idx_v, w_v, g1, out_v)
    elif d == 2:
        g2 = grid
        with nogil:
            _gather2(idx_v, w_v, g2, out_v)
    elif d == 3:
        g3 = grid
        with nogil:
            _gather3(idx_v, w_v, g3, out_v)
    else:
        raise ValueError(f"gridding supports 1 to 3 dimensions, got {d}")
    return out
