# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Must stay numerically identical to ``_fallback``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, hypot, M_PI

cnp.import_array()


def pair_project(psi, int sign):
    """Apply (1 + sign * SWAP) / 2 to axes 1 and 3 of a 5-axis tensor ``(a, d, b, d, c)``."""
    cdef double complex[:, :, :, :, ::1] src = np.ascontiguousarray(psi, dtype=np.complex128)
    cdef Py_ssize_t na = src.shape[0], d = src.shape[1], nb = src.shape[2], nc = src.shape[4]
    if src.shape[3] != d:
        raise ValueError("swapped legs must have equal dimension")
    out_arr = np.empty((na, d, nb, d, nc), dtype=np.complex128)
    cdef double complex[:, :, :, :, ::1] out = out_arr
    cdef double s = <double>sign
    cdef Py_ssize_t x, i, y, j, z
    with nogil:
        for x in range(na):
            for i in range(d):
                for y in range(nb):
                    for j in range(d):
                        for z in range(nc):
                            out[x, i, y, j, z] = 0.5 * (src[x, i, y, j, z] + s * src[x, j, y, i, z])
    return out_arr


cdef inline double _conc4(double* r) nogil:
    # r holds (re, im) of a00, a01, a10, a11; 2 |a00 a11 - a01 a10| in explicit real arithmetic
    cdef double re = (r[0] * r[6] - r[1] * r[7]) - (r[2] * r[4] - r[3] * r[5])
    cdef double im = (r[0] * r[7] + r[1] * r[6]) - (r[2] * r[5] + r[3] * r[4])
    return 2.0 * hypot(re, im)


def concurrence_rows(amps):
    """Concurrence ``2|a00 a11 - a01 a10|`` of each row of an ``(m, 4)`` amplitude array."""
    cdef double[:, ::1] a = np.ascontiguousarray(amps, dtype=np.complex128).view(np.float64)
    cdef Py_ssize_t m = a.shape[0], r
    out_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    with nogil:
        for r in range(m):
            out[r] = _conc4(&a[r, 0])
    return out_arr


def givens_descent(amps, moves, double step):
    """Greedy two-row unitary mixing of a 2x2 ensemble, minimizing summed concurrence.

    ``amps`` (m, 4) complex, C-contiguous, is modified in place. Each row of
    ``moves`` holds four uniforms in [0, 1) encoding (row i, row k, angle,
    phase). Returns the final summed concurrence and the adapted step.
    """
    cdef double[:, ::1] a = amps.view(np.float64)
    cdef double[:, ::1] mv = np.ascontiguousarray(moves, dtype=np.float64)
    cdef Py_ssize_t m = a.shape[0], n_moves = mv.shape[0], t, q, i, k
    if m < 2:
        return float(_conc4(&a[0, 0])) if m else 0.0, step
    vals_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] vals = vals_arr
    cdef double total = 0.0, th, ph, c, s, er, ei, xr, xi, yr, yi, ci, ck, new
    cdef double ni[8]
    cdef double nk[8]
    for q in range(m):
        vals[q] = _conc4(&a[q, 0])
        total = total + vals[q]
    with nogil:
        for t in range(n_moves):
            i = <Py_ssize_t>(mv[t, 0] * m)
            k = <Py_ssize_t>(mv[t, 1] * (m - 1))
            if k >= i:
                k = k + 1
            th = step * (2.0 * mv[t, 2] - 1.0)
            ph = 2.0 * M_PI * mv[t, 3]
            c = cos(th)
            s = sin(th)
            er = s * cos(ph)
            ei = s * sin(ph)
            for q in range(4):
                xr = a[i, 2 * q]
                xi = a[i, 2 * q + 1]
                yr = a[k, 2 * q]
                yi = a[k, 2 * q + 1]
                # ni = c x - s e y,  nk = s conj(e) x + c y
                ni[2 * q] = c * xr - (er * yr - ei * yi)
                ni[2 * q + 1] = c * xi - (er * yi + ei * yr)
                nk[2 * q] = (er * xr + ei * xi) + c * yr
                nk[2 * q + 1] = (er * xi - ei * xr) + c * yi
            ci = _conc4(ni)
            ck = _conc4(nk)
            new = total - vals[i] - vals[k] + ci + ck
            if new < total:
                for q in range(8):
                    a[i, q] = ni[q]
                    a[k, q] = nk[q]
                vals[i] = ci
                vals[k] = ck
                total = new
                step = step * 1.5
                if step > M_PI / 2:
                    step = M_PI / 2
            else:
                step = step * 0.95
                if step < 1e-7:
                    step = 1e-7
    return float(total), float(step)
