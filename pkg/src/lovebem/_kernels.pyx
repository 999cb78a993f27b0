# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: initializedcheck=False, language_level=3
"""Compiled pair-kernel sums.

Same two entry points and semantics as `_kernels_np`; see that module for
the contract.  Pairs are distributed over OpenMP threads, each writing its
own output rows.
"""

from libc.math cimport cos, sin, sqrt

import numpy as np

from cython.parallel cimport prange

cimport openmp

cdef double FOUR_PI = 12.566370614359172
cdef double complex I = 1j


def set_num_threads(n):
    """Cap the OpenMP thread count used by the pair loops."""
    if int(n) > 0:
        openmp.omp_set_num_threads(int(n))


def green_pair_moments(double[:, :, ::1] x_pts, double[:, ::1] x_w,
                       double[:, :, ::1] y_pts, double[:, ::1] y_w,
                       pair_t, pair_s, double k):
    cdef Py_ssize_t[::1] pt = np.ascontiguousarray(pair_t, dtype=np.intp)
    cdef Py_ssize_t[::1] ps = np.ascontiguousarray(pair_s, dtype=np.intp)
    cdef Py_ssize_t n = pt.shape[0]
    cdef Py_ssize_t n_p = x_pts.shape[1]
    cdef Py_ssize_t n_q = y_pts.shape[1]

    s00 = np.empty(n, dtype=np.complex128)
    mx = np.empty((n, 3), dtype=np.complex128)
    my = np.empty((n, 3), dtype=np.complex128)
    mxy = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] s00v = s00
    cdef double complex[:, ::1] mxv = mx
    cdef double complex[:, ::1] myv = my
    cdef double complex[::1] mxyv = mxy

    cdef Py_ssize_t c, p, q, tc, sc
    cdef double xp0, xp1, xp2, y0, y1, y2, dx, dy, dz, r, arg, scale, wp
    cdef double complex g, gq, gy0, gy1, gy2
    cdef double complex acc, ax0, ax1, ax2, ay0, ay1, ay2, axy

    for c in prange(n, nogil=True, schedule="static"):
        tc = pt[c]
        sc = ps[c]
        acc = 0
        ax0 = 0
        ax1 = 0
        ax2 = 0
        ay0 = 0
        ay1 = 0
        ay2 = 0
        axy = 0
        for p in range(n_p):
            xp0 = x_pts[tc, p, 0]
            xp1 = x_pts[tc, p, 1]
            xp2 = x_pts[tc, p, 2]
            wp = x_w[tc, p]
            gq = 0
            gy0 = 0
            gy1 = 0
            gy2 = 0
            for q in range(n_q):
                y0 = y_pts[sc, q, 0]
                y1 = y_pts[sc, q, 1]
                y2 = y_pts[sc, q, 2]
                dx = xp0 - y0
                dy = xp1 - y1
                dz = xp2 - y2
                r = sqrt(dx * dx + dy * dy + dz * dz)
                arg = k * r
                scale = y_w[sc, q] / (FOUR_PI * r)
                g = scale * cos(arg) + I * (scale * sin(arg))
                gq = gq + g
                gy0 = gy0 + g * y0
                gy1 = gy1 + g * y1
                gy2 = gy2 + g * y2
            acc = acc + wp * gq
            ax0 = ax0 + wp * gq * xp0
            ax1 = ax1 + wp * gq * xp1
            ax2 = ax2 + wp * gq * xp2
            ay0 = ay0 + wp * gy0
            ay1 = ay1 + wp * gy1
            ay2 = ay2 + wp * gy2
            axy = axy + wp * (gy0 * xp0 + gy1 * xp1 + gy2 * xp2)
        s00v[c] = acc
        mxv[c, 0] = ax0
        mxv[c, 1] = ax1
        mxv[c, 2] = ax2
        myv[c, 0] = ay0
        myv[c, 1] = ay1
        myv[c, 2] = ay2
        mxyv[c] = axy
    return s00, mx, my, mxy


def curl_pair_entries(double[:, :, ::1] x_pts, double[:, ::1] x_w,
                      double[:, :, ::1] y_pts, double[:, ::1] y_w,
                      double[:, :, ::1] x_verts, double[:, :, ::1] y_verts,
                      pair_t, pair_s, double k):
    cdef Py_ssize_t[::1] pt = np.ascontiguousarray(pair_t, dtype=np.intp)
    cdef Py_ssize_t[::1] ps = np.ascontiguousarray(pair_s, dtype=np.intp)
    cdef Py_ssize_t n = pt.shape[0]
    cdef Py_ssize_t n_p = x_pts.shape[1]
    cdef Py_ssize_t n_q = y_pts.shape[1]

    out = np.empty((n, 3, 3), dtype=np.complex128)
    cdef double complex[:, :, ::1] outv = out

    cdef Py_ssize_t c, p, q, a, b, tc, sc
    cdef double xp0, xp1, xp2, dx, dy, dz, r, arg, scale, hre, him, wp
    cdef double xa0, xa1, xa2, xb0, xb1, xb2
    cdef double complex h, w0, w1, w2, c0, c1, c2
    cdef double complex acc[9]

    for c in prange(n, nogil=True, schedule="static"):
        tc = pt[c]
        sc = ps[c]
        for a in range(9):
            acc[a] = 0
        for p in range(n_p):
            xp0 = x_pts[tc, p, 0]
            xp1 = x_pts[tc, p, 1]
            xp2 = x_pts[tc, p, 2]
            wp = x_w[tc, p]
            w0 = 0
            w1 = 0
            w2 = 0
            for q in range(n_q):
                dx = xp0 - y_pts[sc, q, 0]
                dy = xp1 - y_pts[sc, q, 1]
                dz = xp2 - y_pts[sc, q, 2]
                r = sqrt(dx * dx + dy * dy + dz * dz)
                arg = k * r
                scale = y_w[sc, q] / (FOUR_PI * r * r * r)
                hre = scale * (-cos(arg) - arg * sin(arg))
                him = scale * (arg * cos(arg) - sin(arg))
                h = hre + I * him
                w0 = w0 + h * dx
                w1 = w1 + h * dy
                w2 = w2 + h * dz
            for a in range(3):
                xa0 = (xp0 - x_verts[tc, a, 0]) * wp
                xa1 = (xp1 - x_verts[tc, a, 1]) * wp
                xa2 = (xp2 - x_verts[tc, a, 2]) * wp
                for b in range(3):
                    xb0 = xp0 - y_verts[sc, b, 0]
                    xb1 = xp1 - y_verts[sc, b, 1]
                    xb2 = xp2 - y_verts[sc, b, 2]
                    c0 = w1 * xb2 - w2 * xb1
                    c1 = w2 * xb0 - w0 * xb2
                    c2 = w0 * xb1 - w1 * xb0
                    acc[3 * a + b] = acc[3 * a + b] + xa0 * c0 + xa1 * c1 + xa2 * c2
        for a in range(3):
            for b in range(3):
                outv[c, a, b] = acc[3 * a + b]
    return out
