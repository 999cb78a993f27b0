"""Vectorized pair-kernel sums, pure numpy edition.

These two functions are the hot path of assembly: given precomputed
quadrature points for every cell of a test and a source mesh and a list of
cell pairs, they return per-pair kernel sums from which the caller builds
local interaction blocks.  The compiled extension exports the same two
entry points; either backend may be swapped in without the caller noticing
beyond runtime.

Pairs are processed in fixed-size chunks to bound the size of the
(pair, test point, source point) intermediates.
"""

import numpy as np

FOUR_PI = 4.0 * np.pi

# 100k pairs at 6x6 points is roughly a 60 MB complex intermediate.
_CHUNK = 100_000


def green_pair_moments(x_pts, x_w, y_pts, y_w, pair_t, pair_s, k):
    """Weighted Green sums for each cell pair.

    x_pts, y_pts : (cells, points, 3) physical quadrature points
    x_w, y_w     : (cells, points) weights including the area factor
    pair_t/s     : (n,) cell indices into the test/source arrays

    Returns (s00, mx, my, mxy) with
      s00[n]    = sum w w' G
      mx[n, :]  = sum w w' G x
      my[n, :]  = sum w w' G y
      mxy[n]    = sum w w' G (x . y)
    which determine every linear-density double integral of G over the pair.
    """
    n = pair_t.size
    s00 = np.empty(n, dtype=np.complex128)
    mx = np.empty((n, 3), dtype=np.complex128)
    my = np.empty((n, 3), dtype=np.complex128)
    mxy = np.empty(n, dtype=np.complex128)

    for lo in range(0, n, _CHUNK):
        sl = slice(lo, min(lo + _CHUNK, n))
        x = x_pts[pair_t[sl]]
        y = y_pts[pair_s[sl]]
        d = x[:, :, None, :] - y[:, None, :, :]
        r = np.sqrt(np.einsum("cpqd,cpqd->cpq", d, d))
        g = np.exp(1j * k * r)
        g /= FOUR_PI * r
        g *= x_w[pair_t[sl]][:, :, None]
        g *= y_w[pair_s[sl]][:, None, :]
        s00[sl] = g.sum(axis=(1, 2))
        mx[sl] = np.einsum("cpq,cpd->cd", g, x)
        my[sl] = np.einsum("cpq,cqd->cd", g, y)
        mxy[sl] = np.einsum("cpq,cpd,cqd->c", g, x, y)
    return s00, mx, my, mxy


def curl_pair_entries(x_pts, x_w, y_pts, y_w, x_verts, y_verts, pair_t, pair_s, k):
    """Gradient-kernel triple products for each cell pair.

    Returns C with C[n, a, b] = sum_pq w_p w'_q h(R) (x_p - vt_a) .
    ((x_p - y_q) x (x_p - vs_b)), where vt/vs are the corners of the test
    and source cells and h(R) (r - r') is the gradient of G.  The source
    sum collapses onto a single inner vector per test point first.
    """
    n = pair_t.size
    out = np.empty((n, 3, 3), dtype=np.complex128)
    chunk = _CHUNK // 3

    for lo in range(0, n, chunk):
        sl = slice(lo, min(lo + chunk, n))
        x = x_pts[pair_t[sl]]
        y = y_pts[pair_s[sl]]
        d = x[:, :, None, :] - y[:, None, :, :]
        r = np.sqrt(np.einsum("cpqd,cpqd->cpq", d, d))
        h = np.exp(1j * k * r)
        h *= 1j * k * r - 1.0
        h /= FOUR_PI * r ** 3
        h *= y_w[pair_s[sl]][:, None, :]
        w_in = np.einsum("cpq,cpqd->cpd", h, d)

        xa = x[:, :, None, :] - x_verts[pair_t[sl]][:, None, :, :]
        xb = x[:, :, None, :] - y_verts[pair_s[sl]][:, None, :, :]
        cross = np.cross(w_in[:, :, None, :], xb)
        xa = xa * x_w[pair_t[sl]][:, :, None, None]
        out[sl] = np.einsum("cpad,cpbd->cab", xa, cross)
    return out
