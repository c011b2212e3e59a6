# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Fast Marching kernel.

Must stay bit-compatible with ``segnash._fmm_py``: same heap ordering
(value, then flat index) and the same floating point expression order.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, INFINITY

cnp.import_array()


cdef inline double _upwind(double a, double b, double c, double hx, double hy) nogil:
    cdef double s, d, u, A, B, C, ia, ib
    if a == INFINITY and b == INFINITY:
        return INFINITY
    if b == INFINITY:
        return a + c * hx
    if a == INFINITY:
        return b + c * hy
    if hx == hy:
        s = c * hx
        if (a - b if a > b else b - a) < s:
            d = 2.0 * s * s - (a - b) * (a - b)
            return (a + b + sqrt(d)) * 0.5
        return (a if a < b else b) + s
    ia = 1.0 / (hx * hx)
    ib = 1.0 / (hy * hy)
    A = ia + ib
    B = -2.0 * (a * ia + b * ib)
    C = a * a * ia + b * b * ib - c * c
    d = B * B - 4.0 * A * C
    if d >= 0.0:
        u = (-B + sqrt(d)) / (2.0 * A)
        if u >= (a if a > b else b):
            return u
    u = a + c * hx
    if b + c * hy < u:
        u = b + c * hy
    return u


def upwind(double a, double b, double c, double hx, double hy):
    return _upwind(a, b, c, hx, hy)


cdef inline bint _less(double va, Py_ssize_t ia, double vb, Py_ssize_t ib) nogil:
    return va < vb or (va == vb and ia < ib)


cdef void _push(double* hv, Py_ssize_t* hi, Py_ssize_t* n, double v, Py_ssize_t idx) nogil:
    cdef Py_ssize_t k = n[0]
    cdef Py_ssize_t parent
    n[0] += 1
    while k > 0:
        parent = (k - 1) >> 1
        if _less(v, idx, hv[parent], hi[parent]):
            hv[k] = hv[parent]
            hi[k] = hi[parent]
            k = parent
        else:
            break
    hv[k] = v
    hi[k] = idx


cdef void _pop(double* hv, Py_ssize_t* hi, Py_ssize_t* n) nogil:
    cdef Py_ssize_t k = 0
    cdef Py_ssize_t child
    cdef Py_ssize_t last = n[0] - 1
    cdef double v = hv[last]
    cdef Py_ssize_t idx = hi[last]
    n[0] = last
    while True:
        child = 2 * k + 1
        if child >= last:
            break
        if child + 1 < last and _less(hv[child + 1], hi[child + 1], hv[child], hi[child]):
            child += 1
        if _less(hv[child], hi[child], v, idx):
            hv[k] = hv[child]
            hi[k] = hi[child]
            k = child
        else:
            break
    if last > 0:
        hv[k] = v
        hi[k] = idx


def fast_march(double[:, ::1] slowness, cnp.uint8_t[:, ::1] blocked,
               Py_ssize_t ti, Py_ssize_t tj, double hx, double hy):
    """Return ``(u, order)``: the value field and the acceptance order of flat indices."""
    cdef Py_ssize_t ny = slowness.shape[0]
    cdef Py_ssize_t nx = slowness.shape[1]
    cdef Py_ssize_t N = nx * ny
    u_arr = np.full((ny, nx), np.inf)
    order_arr = np.empty(N, dtype=np.intp)
    state_arr = np.zeros((ny, nx), dtype=np.uint8)
    hv_arr = np.empty(4 * N + 8, dtype=np.float64)
    hi_arr = np.empty(4 * N + 8, dtype=np.intp)
    cdef double[:, ::1] u = u_arr
    cdef Py_ssize_t[::1] order = order_arr
    cdef cnp.uint8_t[:, ::1] state = state_arr
    cdef double[::1] hv = hv_arr
    cdef Py_ssize_t[::1] hi = hi_arr
    cdef Py_ssize_t hn = 0
    cdef Py_ssize_t n_acc = 0
    cdef Py_ssize_t idx, i, j, ni, nj, k
    cdef double v, a, b, cand
    cdef Py_ssize_t di[4]
    cdef Py_ssize_t dj[4]
    di[0] = 1; di[1] = -1; di[2] = 0; di[3] = 0
    dj[0] = 0; dj[1] = 0; dj[2] = 1; dj[3] = -1

    u[tj, ti] = 0.0
    _push(&hv[0], &hi[0], &hn, 0.0, tj * nx + ti)
    with nogil:
        while hn > 0:
            v = hv[0]
            idx = hi[0]
            _pop(&hv[0], &hi[0], &hn)
            j = idx // nx
            i = idx - j * nx
            if state[j, i] == 2 or v != u[j, i]:
                continue
            state[j, i] = 2
            order[n_acc] = idx
            n_acc += 1
            for k in range(4):
                ni = i + di[k]
                nj = j + dj[k]
                if ni < 0 or ni >= nx or nj < 0 or nj >= ny:
                    continue
                if blocked[nj, ni] or state[nj, ni] == 2:
                    continue
                a = INFINITY
                if ni > 0 and state[nj, ni - 1] == 2:
                    a = u[nj, ni - 1]
                if ni < nx - 1 and state[nj, ni + 1] == 2 and u[nj, ni + 1] < a:
                    a = u[nj, ni + 1]
                b = INFINITY
                if nj > 0 and state[nj - 1, ni] == 2:
                    b = u[nj - 1, ni]
                if nj < ny - 1 and state[nj + 1, ni] == 2 and u[nj + 1, ni] < b:
                    b = u[nj + 1, ni]
                cand = _upwind(a, b, slowness[nj, ni], hx, hy)
                if cand < u[nj, ni]:
                    u[nj, ni] = cand
                    _push(&hv[0], &hi[0], &hn, cand, nj * nx + ni)
    return u_arr, order_arr[:n_acc].copy()
