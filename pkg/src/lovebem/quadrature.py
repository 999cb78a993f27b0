"""Triangle quadrature rules and singular pair integration.

The Galerkin assembly in this package reduces every matrix entry to double
integrals over triangle pairs of either the scalar Helmholtz kernel

    G(R) = exp(ikR) / (4 pi R),       R = |r - r'|,

against products of linear densities, or of the gradient-kernel triple
product (r - a) . [grad_r G x (r' - b)].  This module supplies:

* fixed Gauss rules on the reference triangle (orders 1..7, positive
  weights, strictly interior points),
* closed-form integrals of the static 1/R kernel moments over a flat
  triangle, evaluated at arbitrary observation points,
* `integrate_singular_pair`, which combines both into accurate pair values
  for coincident, edge-, vertex-touching, near and well-separated pairs.

Touching and near pairs use singularity extraction: the inner integral over
the source triangle combines the closed-form static moments with a fixed
rule on the smooth remainder exp(ikR) - 1; the outer integral uses panels
graded geometrically toward the shared feature (edge, vertex, or the whole
boundary for coincident pairs).  Disjoint pairs use plain Gauss-Gauss with
the rule order graded by proximity.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from numpy.polynomial.legendre import leggauss

from .exceptions import UnsupportedOrder

FOUR_PI = 4.0 * np.pi
SUPPORTED_ORDERS = tuple(range(1, 13))


@dataclasses.dataclass(frozen=True)
class TriangleRule:
    """Quadrature rule in barycentric coordinates; weights sum to one."""

    order: int
    points: np.ndarray
    weights: np.ndarray


@dataclasses.dataclass
class QuadratureConfig:
    """Order and threshold knobs for pair integration.

    Disjoint pairs are graded by the ratio of centroid distance to the
    larger triangle diameter: below near_factor they take the extraction
    path (like touching pairs), below escalate_factor plain Gauss-Gauss at
    order_near on both triangles, and beyond that the default orders.
    order_smooth is the inner rule applied to the extracted smooth kernel
    remainder on the extraction path.
    """

    order_test: int = 3
    order_source: int = 4
    order_near: int = 7
    order_smooth: int = 7
    near_factor: float = 2.0
    escalate_factor: float = 5.0


DEFAULT_CONFIG = QuadratureConfig()

_RULES = {}


def gauss_rule(order):
    """Symmetric positive-weight rule exact to at least the given degree.

    Orders 1..5 are tabulated symmetric rules; orders 6 and up are
    collapsed Gauss-Legendre products (the tabulated rules of those
    degrees contain negative weights or boundary points, which the
    assembly invariants forbid).
    """
    if order not in SUPPORTED_ORDERS:
        raise UnsupportedOrder("quadrature order %r not in %s"
                               % (order, list(SUPPORTED_ORDERS)))
    if order not in _RULES:
        _RULES[order] = _build_rule(order)
    return _RULES[order]


def _orbit(a, w):
    b = 1.0 - 2.0 * a
    return [(b, a, a), (a, b, a), (a, a, b)], [w, w, w]


def _build_rule(order):
    if order == 1:
        pts, wts = [(1 / 3, 1 / 3, 1 / 3)], [1.0]
    elif order == 2:
        pts, wts = _orbit(1.0 / 6.0, 1.0 / 3.0)
    elif order in (3, 4):
        p1, w1 = _orbit(0.445948490915965, 0.223381589678011)
        p2, w2 = _orbit(0.091576213509771, 0.109951743655322)
        pts, wts = p1 + p2, w1 + w2
    elif order == 5:
        p1, w1 = _orbit(0.470142064105115, 0.132394152788506)
        p2, w2 = _orbit(0.101286507323456, 0.125939180544827)
        pts = [(1 / 3, 1 / 3, 1 / 3)] + p1 + p2
        wts = [0.225] + w1 + w2
    else:
        # the u direction picks up one polynomial degree from the jacobian
        return _collapsed_rule(order, (order + 3) // 2, (order + 2) // 2)
    return TriangleRule(order, np.array(pts, dtype=np.float64),
                        np.array(wts, dtype=np.float64))


def _collapsed_rule(order, n_u, n_v):
    xu, wu = leggauss(n_u)
    xv, wv = leggauss(n_v)
    u, wu = 0.5 * (xu + 1.0), 0.5 * wu
    v, wv = 0.5 * (xv + 1.0), 0.5 * wv
    U, V = np.meshgrid(u, v, indexing="ij")
    WU, WV = np.meshgrid(wu, wv, indexing="ij")
    x, y = U * (1.0 - V), U * V
    w = 2.0 * U * WU * WV
    bary = np.stack([1.0 - x - y, x, y], axis=-1).reshape(-1, 3)
    return TriangleRule(order, bary, w.ravel())


def rule_points(tri, rule):
    """Physical quadrature points and weights (including the area factor)."""
    tri = np.asarray(tri, dtype=np.float64)
    area = 0.5 * np.linalg.norm(np.cross(tri[1] - tri[0], tri[2] - tri[0]))
    return rule.points @ tri, rule.weights * area


# ----------------------------------------------------------------------
# kernel values
# ----------------------------------------------------------------------


def green(R, k):
    """exp(ikR) / (4 pi R); R must be positive."""
    return np.exp(1j * k * R) / (FOUR_PI * R)


def green_smooth(R, k):
    """(exp(ikR) - 1) / (4 pi R), evaluated without cancellation; R >= 0."""
    R = np.asarray(R, dtype=np.float64)
    kR = k * R
    safe = np.where(R > 0.0, R, 1.0)
    val = (-2.0 * np.sin(0.5 * kR) ** 2 + 1j * np.sin(kR)) / (FOUR_PI * safe)
    return np.where(R > 0.0, val, 1j * k / FOUR_PI)


def grad_green_factor(R, k):
    """h(R) with grad_r G = h(R) (r - r'); R must be positive."""
    return np.exp(1j * k * R) * (1j * k * R - 1.0) / (FOUR_PI * R ** 3)


_SMOOTH_COEF = None


def grad_green_smooth_factor(R, k):
    """h(R) minus its static part -(1 + (kR)^2/2) / (4 pi R^3); R >= 0.

    For kR < 1 the Taylor tail is summed directly (the subtracted form loses
    all significant digits as R -> 0); beyond that the direct difference is
    well conditioned.
    """
    global _SMOOTH_COEF
    if _SMOOTH_COEF is None:
        fact = np.cumprod([1.0] + list(range(1, 30)))
        _SMOOTH_COEF = np.array([(j + 2) / fact[j + 3] for j in range(22)])
    R = np.asarray(R, dtype=np.float64)
    kR = k * R
    out = np.empty(R.shape, dtype=np.complex128)
    small = kR < 1.0
    if np.any(small):
        z = 1j * kR[small]
        acc = np.zeros(z.shape, dtype=np.complex128)
        for c in _SMOOTH_COEF[::-1]:
            acc = acc * z + c
        out[small] = (1j * k) ** 3 / FOUR_PI * acc
    big = ~small
    if np.any(big):
        kRb = kR[big]
        Rb = R[big]
        out[big] = (np.exp(1j * kRb) * (1j * kRb - 1.0) + 1.0
                    + 0.5 * kRb ** 2) / (FOUR_PI * Rb ** 3)
    return out


# ----------------------------------------------------------------------
# closed-form static moments
# ----------------------------------------------------------------------


def static_triangle_moments(points, tri):
    """Closed-form integrals of 1/R moments over a flat triangle.

    Parameters
    ----------
    points : (m, 3) array
        Observation points r.
    tri : (3, 3) array
        Source triangle vertices.

    Returns
    -------
    dict with keys
        i1   : (m,)   integral of 1/R dA'
        irho : (m, 3) integral of (r' - rho)/R dA'
        krho : (m, 3) integral of (r' - rho)/R**3 dA'
        d_i3 : (m,)   d times the integral of 1/R**3 dA'
        d    : (m,)   signed height of r over the triangle plane
        rho  : (m, 3) in-plane projections of r
        normal : (3,) unit normal

    rho is the projection of r onto the triangle plane and d the signed
    offset along the normal.  The krho values diverge for observation
    points lying exactly on an edge line within the plane; those edge terms
    are zeroed here and callers must avoid relying on krho there (the
    gradient-kernel assembly only evaluates it off-plane or strictly inside).
    """
    tri = np.asarray(tri, dtype=np.float64)
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    normal = np.cross(tri[1] - tri[0], tri[2] - tri[0])
    normal = normal / np.linalg.norm(normal)
    diam = max(np.linalg.norm(tri[0] - tri[1]), np.linalg.norm(tri[1] - tri[2]),
               np.linalg.norm(tri[2] - tri[0]))
    tiny = 1e-14 * diam

    d = (points - tri[0]) @ normal
    rho = points - d[:, None] * normal
    absd = np.abs(d)

    m = len(points)
    i1 = np.zeros(m)
    beta = np.zeros(m)
    irho = np.zeros((m, 3))
    krho = np.zeros((m, 3))

    for i in range(3):
        a, b = tri[i], tri[(i + 1) % 3]
        ell = b - a
        lhat = ell / np.linalg.norm(ell)
        mhat = np.cross(lhat, normal)
        t = (a - rho) @ mhat
        sm = (a - rho) @ lhat
        sp = (b - rho) @ lhat
        Rm = np.linalg.norm(points - a, axis=1)
        Rp = np.linalg.norm(points - b, axis=1)
        R0sq = t * t + d * d

        pos = (sm + sp) >= 0.0
        num = np.where(pos, Rp + sp, Rm - sm)
        den = np.where(pos, Rm + sm, Rp - sp)
        ok = (num > tiny) & (den > tiny)
        f2 = np.where(ok, np.log(np.where(ok, num, 1.0) / np.where(ok, den, 1.0)), 0.0)

        beta += (np.arctan2(t * sp, R0sq + absd * Rp)
                 - np.arctan2(t * sm, R0sq + absd * Rm))
        i1 += t * f2
        irho += 0.5 * (R0sq * f2 + sp * Rp - sm * Rm)[:, None] * mhat
        krho -= f2[:, None] * mhat

    i1 -= absd * beta
    return {"i1": i1, "irho": irho, "krho": krho, "d_i3": np.sign(d) * beta,
            "d": d, "rho": rho, "normal": normal}


# ----------------------------------------------------------------------
# inner integrals (over the source triangle, vectorized over observers)
# ----------------------------------------------------------------------


def _inner_green(points, src, k, rule):
    """P(r) = int G dA', Q(r) = int G r' dA' with static extraction."""
    mom = static_triangle_moments(points, src)
    P = mom["i1"] / FOUR_PI
    Q = (mom["irho"] + mom["rho"] * mom["i1"][:, None]) / FOUR_PI
    y, w = rule_points(src, rule)
    R = np.linalg.norm(points[:, None, :] - y[None, :, :], axis=2)
    gs = green_smooth(R, k)
    P = P.astype(np.complex128) + gs @ w
    Q = Q.astype(np.complex128) + np.einsum("mq,q,qk->mk", gs, w, y)
    return P, Q


def _inner_grad_green(points, src, k, rule):
    """W(r) = int h(R) (r - r') dA' with static extraction."""
    mom = static_triangle_moments(points, src)
    n = mom["normal"]
    J3 = mom["d_i3"][:, None] * n - mom["krho"]
    J1 = (mom["d"] * mom["i1"])[:, None] * n - mom["irho"]
    W = (-J3 / FOUR_PI - (k * k) / (2.0 * FOUR_PI) * J1).astype(np.complex128)
    y, w = rule_points(src, rule)
    diff = points[:, None, :] - y[None, :, :]
    R = np.linalg.norm(diff, axis=2)
    hs = grad_green_smooth_factor(R, k)
    W += np.einsum("mq,q,mqk->mk", hs, w, diff)
    return W


# ----------------------------------------------------------------------
# pair integration
# ----------------------------------------------------------------------


@dataclasses.dataclass
class GreenPairValues:
    """Double integrals of G against linear densities on one triangle pair.

    entries[a, b] = iint G(R) (r - tst[a]) . (r' - src[b]) dA dA'
    scalar       = iint G(R) dA dA'
    """

    entries: np.ndarray
    scalar: complex


# Outer-rule grading: each extracted pair integrates a smooth inner result
# whose derivatives blow up only toward the shared feature (edge, vertex,
# or own boundary).  The triangle is written as one collapsed bilinear
# patch with the singular feature at a parameter boundary, and the Gauss
# nodes in each direction are pushed toward that boundary by polynomial
# maps: t -> t^4 toward one end, a symmetric smoothstep polynomial toward
# both.  The maps turn the s log s / log s boundary layers of the
# extracted integrands into C^3..C^7 functions of the quadrature variable,
# which plain Gauss then resolves to ~1e-9.
_P_GRADE = 4

_GL01 = {}


def _gl01(n):
    if n not in _GL01:
        x, w = leggauss(n)
        _GL01[n] = (0.5 * (x + 1.0), 0.5 * w)
    return _GL01[n]


def _gl_power(n):
    """Gauss rule under t = x^4, grading toward t = 0."""
    x, w = _gl01(n)
    p = _P_GRADE
    return x ** p, w * p * x ** (p - 1)


def _gl_double(n):
    """Gauss rule graded toward both ends by a degree-7 smoothstep.

    u = 35x^4 - 84x^5 + 70x^6 - 20x^7 clusters quartically at both
    endpoints while keeping du polynomial, so Gauss exactness survives
    the reparametrization.
    """
    x, w = _gl01(n)
    u = x ** 4 * (35.0 + x * (-84.0 + x * (70.0 - 20.0 * x)))
    du = 140.0 * (x * (1.0 - x)) ** 3
    return u, w * du


def _patch_points(p00, p10, p01, p11, rule_u, rule_t):
    """Product points on the bilinear patch spanned by four corners.

    u runs from the 0-corners to the 1-corners of the first index, t of
    the second; a collapsed (triangle) patch is fine, the Jacobian absorbs
    the degeneracy.
    """
    u, wu = rule_u
    t, wt = rule_t
    U, T = np.meshgrid(u, t, indexing="ij")
    U = U[..., None]
    T = T[..., None]
    pts = (1 - T) * ((1 - U) * p00 + U * p10) + T * ((1 - U) * p01 + U * p11)
    du = (1 - T) * (p10 - p00) + T * (p11 - p01)
    dt = (1 - U) * (p01 - p00) + U * (p11 - p10)
    jac = np.linalg.norm(np.cross(du, dt), axis=-1)
    w = np.outer(wu, wt) * jac
    return pts.reshape(-1, 3), w.reshape(-1)


def _edge_graded_points(A, B, C, n_par, n_perp):
    """Outer points on triangle ABC graded toward edge AB (and its ends)."""
    return _patch_points(A, B, C, C, _gl_double(n_par), _gl_power(n_perp))


def _vertex_graded_points(V, B, C, n_ang, n_rad):
    """Outer points on triangle VBC graded radially toward corner V."""
    return _patch_points(V, V, B, C, _gl01(n_ang), _gl_power(n_rad))


def _closest_point_triangle(p, tri):
    """Point of triangle `tri` closest to `p` (barycentric region walk)."""
    a, b, c = tri
    ab, ac, ap = b - a, c - a, p - a
    d1, d2 = ab @ ap, ac @ ap
    if d1 <= 0.0 and d2 <= 0.0:
        return a
    bp = p - b
    d3, d4 = ab @ bp, ac @ bp
    if d3 >= 0.0 and d4 <= d3:
        return b
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        return a + (d1 / (d1 - d3)) * ab
    cp = p - c
    d5, d6 = ab @ cp, ac @ cp
    if d6 >= 0.0 and d5 <= d6:
        return c
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        return a + (d2 / (d2 - d6)) * ac
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and d4 - d3 >= 0.0 and d5 - d6 >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return b + w * (c - b)
    denom = 1.0 / (va + vb + vc)
    return a + (vb * denom) * ab + (vc * denom) * ac


def _closest_pair_point(vt, vs):
    """Point of `vt` nearest to `vs`, by alternating projections."""
    q = vs.mean(axis=0)
    for _ in range(4):
        p = _closest_point_triangle(q, vt)
        q = _closest_point_triangle(p, vs)
    return _closest_point_triangle(q, vt)


# Graded patterns are affine constructions over the triangle corners, so
# they are built once on a reference triangle, stored in barycentric form
# (weights per unit physical area), and mapped to each pair by one matmul.
_REF_TRI = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
_PATTERNS = {}


def _pattern(case):
    if case not in _PATTERNS:
        A, B, C = _REF_TRI
        if case == "self":
            centroid = _REF_TRI.mean(axis=0)
            parts = [
                _edge_graded_points(_REF_TRI[i], _REF_TRI[(i + 1) % 3],
                                    centroid, 12, 10)
                for i in range(3)
            ]
            pts = np.concatenate([p for p, _ in parts])
            w = np.concatenate([w for _, w in parts])
        elif case == "edge":
            pts, w = _edge_graded_points(A, B, C, 16, 12)
        elif case == "fan":
            pts, w = _vertex_graded_points(A, B, C, 10, 10)
        else:
            pts, w = _vertex_graded_points(A, B, C, 12, 12)
        bary = np.stack([1.0 - pts[:, 0] - pts[:, 1], pts[:, 0], pts[:, 1]],
                        axis=1)
        _PATTERNS[case] = (bary, w / 0.5)
    return _PATTERNS[case]


def _outer_points(vt, vs, scale):
    """Graded outer rule for one extracted pair, chosen by shared feature."""
    d = np.linalg.norm(vt[:, None, :] - vs[None, :, :], axis=2)
    matched = np.nonzero(d.min(axis=1) < 1e-12 * scale)[0]
    if len(matched) == 3:
        case, roles = "self", (0, 1, 2)
    elif len(matched) == 2:
        a, b = matched
        case, roles = "edge", (a, b, 3 - a - b)
    elif len(matched) == 1:
        v = matched[0]
        case, roles = "vertex", (v, (v + 1) % 3, (v + 2) % 3)
    else:
        # close disjoint: the integrand peaks where the triangles come
        # nearest, which may project inside the test triangle, so fan out
        # radially graded rules from the closest point instead of an edge.
        p = _closest_pair_point(vt, vs)
        nrm = np.cross(vt[1] - vt[0], vt[2] - vt[0])
        nn = nrm @ nrm
        bcs = np.array([np.cross(vt[(i + 1) % 3] - p, vt[(i + 2) % 3] - p) @ nrm
                        for i in range(3)]) / nn
        bary, wref = _pattern("fan")
        area = 0.5 * np.sqrt(nn)
        pts = []
        wts = []
        for i in range(3):
            if bcs[i] <= 1e-9:
                continue
            corners = np.stack([p, vt[(i + 1) % 3], vt[(i + 2) % 3]])
            pts.append(bary @ corners)
            wts.append(wref * (bcs[i] * area))
        return np.concatenate(pts), np.concatenate(wts)
    bary, wref = _pattern(case)
    area = 0.5 * np.linalg.norm(np.cross(vt[1] - vt[0], vt[2] - vt[0]))
    return bary @ vt[list(roles)], wref * area


def _coplanar(vt, vs, scale):
    n = np.cross(vt[1] - vt[0], vt[2] - vt[0])
    n = n / np.linalg.norm(n)
    return np.max(np.abs((vs - vt[0]) @ n)) < 1e-12 * scale


def count_shared_vertices(tri_a, tri_b, scale=None):
    """Number of coinciding corners between two triangles (by coordinates)."""
    tri_a = np.asarray(tri_a, dtype=np.float64)
    tri_b = np.asarray(tri_b, dtype=np.float64)
    if scale is None:
        scale = max(np.linalg.norm(tri_a[i] - tri_a[j])
                    for i in range(3) for j in range(i))
    d = np.linalg.norm(tri_a[:, None, :] - tri_b[None, :, :], axis=2)
    return int(np.sum(d.min(axis=1) < 1e-12 * scale))


def integrate_singular_pair(tri_src, tri_tst, kernel, k, shared=None, config=None):
    """Accurate double integrals over one triangle pair.

    Parameters
    ----------
    tri_src, tri_tst : (3, 3) arrays
        Source (primed) and test triangle vertices.
    kernel : {"green", "grad_green"}
        Scalar kernel G against linear densities, or the gradient-kernel
        triple product (see module docstring).
    k : float
        Wavenumber in 1/m.
    shared : int, optional
        Number of shared corners (3 coincident, 2 edge, 1 vertex, 0
        disjoint); detected from coordinates when omitted.
    config : QuadratureConfig, optional

    Returns
    -------
    GreenPairValues for "green"; for "grad_green" a (3, 3) complex array
    C[a, b] = iint (r - tst[a]) . [h(R) (r - r') x (r' - src[b])] dA dA'.
    """
    cfg = config or DEFAULT_CONFIG
    vt = np.asarray(tri_tst, dtype=np.float64)
    vs = np.asarray(tri_src, dtype=np.float64)
    diam_t = max(np.linalg.norm(vt[0] - vt[1]), np.linalg.norm(vt[1] - vt[2]),
                 np.linalg.norm(vt[2] - vt[0]))
    diam_s = max(np.linalg.norm(vs[0] - vs[1]), np.linalg.norm(vs[1] - vs[2]),
                 np.linalg.norm(vs[2] - vs[0]))
    scale = max(diam_t, diam_s)
    if shared is None:
        shared = count_shared_vertices(vt, vs, scale)
    if kernel not in ("green", "grad_green"):
        raise ValueError("kernel must be 'green' or 'grad_green'")

    if kernel == "grad_green" and _coplanar(vt, vs, scale):
        # the triple product vanishes identically for coplanar pairs
        return np.zeros((3, 3), dtype=np.complex128)

    # work in a local frame so the moment combinations below stay
    # well conditioned regardless of where the pair sits in space
    shift = 0.5 * (vt.mean(axis=0) + vs.mean(axis=0))
    vt = vt - shift
    vs = vs - shift

    ratio = np.linalg.norm(vt.mean(axis=0) - vs.mean(axis=0)) / scale

    if shared == 0 and ratio >= cfg.near_factor:
        if ratio < cfg.escalate_factor:
            return _pair_regular(vt, vs, kernel, k, cfg.order_near, cfg.order_near)
        return _pair_regular(vt, vs, kernel, k, cfg.order_test, cfg.order_source)
    inner_order = cfg.order_near if shared == 0 else cfg.order_smooth
    return _pair_extracted(vt, vs, scale, kernel, k, inner_order)


def _green_rows(vs, k, rule_smooth):
    def rows(p):
        P, Q = _inner_green(p, vs, k, rule_smooth)
        out = np.empty((len(p), 8), dtype=np.complex128)
        out[:, 0] = P
        out[:, 1:4] = Q
        out[:, 4] = np.einsum("mk,mk->m", p, Q)
        out[:, 5:8] = p * P[:, None]
        return out
    return rows


def _green_from_moments(vt, vs, vec):
    s00, s01, sdot, s10 = vec[0], vec[1:4], vec[4], vec[5:8]
    entries = (sdot - s10 @ vs.T - (vt @ s01)[:, None]
               + (vt @ vs.T) * s00)
    return GreenPairValues(entries=entries, scalar=s00)


def _grad_rows(vt, vs, k, rule_smooth):
    def rows(p):
        W = _inner_grad_green(p, vs, k, rule_smooth)
        out = np.empty((len(p), 9), dtype=np.complex128)
        for b in range(3):
            cr = np.cross(W, p - vs[b])
            for a in range(3):
                out[:, 3 * a + b] = np.einsum("mk,mk->m", p - vt[a], cr)
        return out
    return rows


def _pair_extracted(vt, vs, scale, kernel, k, inner_order):
    rule_smooth = gauss_rule(inner_order)
    pts, w = _outer_points(vt, vs, scale)
    if kernel == "green":
        vec = w @ _green_rows(vs, k, rule_smooth)(pts)
        return _green_from_moments(vt, vs, vec)
    vec = w @ _grad_rows(vt, vs, k, rule_smooth)(pts)
    return vec.reshape(3, 3)


def _pair_regular(vt, vs, kernel, k, order_test, order_source):
    p, w = rule_points(vt, gauss_rule(order_test))
    y, u = rule_points(vs, gauss_rule(order_source))
    diff = p[:, None, :] - y[None, :, :]
    R = np.linalg.norm(diff, axis=2)
    if kernel == "green":
        g = green(R, k)
        s00 = np.einsum("q,qr,r->", w, g, u)
        s10 = np.einsum("q,qr,r,qk->k", w, g, u, p)
        s01 = np.einsum("q,qr,r,rk->k", w, g, u, y)
        sdot = np.einsum("q,qr,r,qk,rk->", w, g, u, p, y)
        entries = (sdot - s10 @ vs.T - (vt @ s01)[:, None] + (vt @ vs.T) * s00)
        return GreenPairValues(entries=entries, scalar=s00)
    h = grad_green_factor(R, k)
    W = np.einsum("qr,r,qrk->qk", h, u, diff)
    out = np.empty((3, 3), dtype=np.complex128)
    for b in range(3):
        cr = np.cross(W, p - vs[b])
        for a in range(3):
            out[a, b] = np.einsum("q,qk,qk->", w, p - vt[a], cr)
    return out
