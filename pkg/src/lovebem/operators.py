"""Galerkin assembly of the layer-potential blocks and field radiation.

Every operator matrix is produced the same way: both basis families are
exactly representable in the unit-flux edge basis of the barycentric
refinement, so the kernel double integrals are computed once between fine
cells and sandwiched with the sparse coefficient maps from `basis`.  With
rotated test functions the three kernels reduce to

    Ts[i, j]   =  iint G  w_i . u_j
    Th[i, j]   = -iint (div w_i) G (div u_j)
    K[i, j]    = -iint w_i . (grad G x u_j)
    Gram[i, j] =  int (n x w_i) . u_j

for test functions w and trial functions u of either family.  Cell pairs
are graded exactly as in `quadrature`: far and mid-range pairs go through
the vectorized backend in `kernels` at the default and elevated orders,
touching and sub-threshold pairs through the per-pair extraction path.

The Green's function convention is exp(+ikR)/(4 pi R) with the implied
time factor exp(-i omega t); the analytic sources in `sources` use the
same convention.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .basis import BcSpace, RwgSpace, build_bc, build_rwg, refinement_matrix
from .exceptions import DimensionMismatch, PointTooClose
from .mesh import barycentric_refine
from .quadrature import DEFAULT_CONFIG, gauss_rule, integrate_singular_pair

FOUR_PI = 4.0 * np.pi


class SurfaceSpaces:
    """Everything assembly needs about one closed surface.

    Bundles the refinement, the primal and dual spaces, and their sparse
    micro-coefficient maps (R for the primal family, B for the dual one).
    Build once per surface and reuse; quadrature point sets are cached per
    rule order.
    """

    def __init__(self, mesh):
        self.mesh = mesh
        self.refinement = barycentric_refine(mesh)
        self.fine = self.refinement.mesh
        self.rwg = build_rwg(mesh)
        self.bc = build_bc(self.refinement)
        self.micro = self.bc.micro_space
        self.R = refinement_matrix(self.refinement)
        self.B = self.bc.micro_coefficients
        self.n_edges = mesh.n_edges
        self._rules = {}

    def fine_rule(self, order):
        """Physical quadrature points/weights for every fine cell."""
        if order not in self._rules:
            rule = gauss_rule(order)
            pts = np.einsum("pi,fid->fpd", rule.points, self.fine.tri_vertices)
            w = rule.weights[None, :] * self.fine.areas[:, None]
            self._rules[order] = (pts, w)
        return self._rules[order]

    def coefficient_map(self, family):
        if family == "rwg":
            return self.R
        if family == "bc":
            return self.B
        raise DimensionMismatch(f"unknown basis family {family!r}")


@dataclass
class OperatorDescriptor:
    """One assembled block: kernel, rotated test side, trial side, k.

    The test surface may differ from the trial surface (measurement-side
    testing); the Gram pairing requires both sides on the same surface.
    """

    kernel: str
    test: SurfaceSpaces
    test_family: str
    trial: SurfaceSpaces
    trial_family: str
    k: float = 0.0
    rotated_test: bool = True


_PAIRINGS = {
    ("Ts", "rwg", "rwg"),
    ("Ts", "bc", "bc"),
    ("Th", "rwg", "rwg"),
    ("Th", "bc", "bc"),
    ("K", "rwg", "bc"),
    ("K", "bc", "rwg"),
    ("Gram", "rwg", "bc"),
}


def _validate(desc, kernel):
    if desc.kernel != kernel:
        raise DimensionMismatch(
            f"descriptor kernel {desc.kernel!r} does not match {kernel!r}"
        )
    if not desc.rotated_test:
        raise DimensionMismatch("only rotated (n x) testing is supported")
    key = (desc.kernel, desc.test_family, desc.trial_family)
    if key not in _PAIRINGS:
        raise DimensionMismatch(f"unsupported pairing {key}")
    if kernel == "Gram":
        if desc.test.mesh is not desc.trial.mesh:
            raise DimensionMismatch("the mixed Gram pairing is on-surface only")
    elif not desc.k > 0.0:
        raise DimensionMismatch(f"wavenumber must be positive, got {desc.k}")


class AssemblyCache:
    """Opportunistic store for fine-level kernel matrices.

    Keyed by kernel kind, the two surface bundles, and the wavenumber, so
    sibling blocks (Ts and Th; K in both family orders) share one kernel
    pass.  Entries are large; call clear() when moving to a new k.
    """

    def __init__(self):
        self._store = {}

    def get(self, kind, tst, src, k):
        return self._store.get((kind, id(tst), id(src), float(k)))

    def put(self, kind, tst, src, k, value):
        self._store[(kind, id(tst), id(src), float(k))] = value

    def clear(self):
        self._store.clear()


def _pair_classes(tmesh, smesh, config):
    """Split the cell-pair set of two fine meshes by integration regime.

    Returns (far, mid, singular) where far/mid are (t_idx, s_idx) arrays
    and singular is (t_idx, s_idx, shared_corner_count) covering touching
    pairs and disjoint pairs under the extraction threshold.
    """
    same = tmesh is smesh
    ct = tmesh.tri_vertices.mean(axis=1)
    cs = ct if same else smesh.tri_vertices.mean(axis=1)
    dt = tmesh.diameters()
    ds = dt if same else smesh.diameters()

    dist = np.linalg.norm(ct[:, None, :] - cs[None, :, :], axis=2)
    ratio = dist / np.maximum(dt[:, None], ds[None, :])

    if same:
        ones = np.ones(3 * tmesh.n_triangles)
        inc = sp.csr_matrix(
            (ones, (np.repeat(np.arange(tmesh.n_triangles), 3), tmesh.triangles.ravel())),
            shape=(tmesh.n_triangles, tmesh.n_vertices),
        )
        shared = np.asarray((inc @ inc.T).todense(), dtype=np.int8)
    else:
        shared = np.zeros(ratio.shape, dtype=np.int8)

    touching = shared > 0
    close = (ratio < config.near_factor) & ~touching
    mid = (ratio >= config.near_factor) & (ratio < config.escalate_factor) & ~touching
    far = (ratio >= config.escalate_factor) & ~touching

    sing_mask = touching | close
    st, ss = np.nonzero(sing_mask)
    return (
        np.nonzero(far),
        np.nonzero(mid),
        (st, ss, shared[st, ss]),
    )


def _scatter(mat, vals, rows, cols):
    """Accumulate (n, 3, 3) blocks at (n, 3) row/column edge indices."""
    flat = (rows[:, :, None] * mat.shape[1] + cols[:, None, :]).ravel()
    np.add.at(mat.ravel(), flat, vals.ravel())


def _fine_green(tst, src, k, config):
    """Amat and Pmat between the micro bases of two surfaces.

    Amat[a, b] = iint G mu_a . mu_b, Pmat[a, b] = iint G div mu_a div mu_b;
    both kernels come from one pass over the Green sums.
    """
    tmesh, smesh = tst.fine, src.fine
    far, mid, sing = _pair_classes(tmesh, smesh, config)

    amat = np.zeros((tmesh.n_edges, smesh.n_edges), dtype=np.complex128)
    pmat = np.zeros_like(amat)
    t_signs, s_signs = tst.micro.tri_signs, src.micro.tri_signs
    t_edges, s_edges = tmesh.tri_edges, smesh.tri_edges
    t_area, s_area = tmesh.areas, smesh.areas

    passes = (
        (far, config.order_test, config.order_source),
        (mid, config.order_near, config.order_near),
    )
    for (pt, ps), o_t, o_s in passes:
        if pt.size == 0:
            continue
        xp, xw = tst.fine_rule(o_t)
        yp, yw = src.fine_rule(o_s)
        s00, mx, my, mxy = kernels.green_pair_moments(xp, xw, yp, yw, pt, ps, k)

        vt = tmesh.tri_vertices[pt]
        vs = smesh.tri_vertices[ps]
        entries = (
            mxy[:, None, None]
            - np.einsum("nd,njd->nj", mx, vs)[:, None, :]
            - np.einsum("nid,nd->ni", vt, my)[:, :, None]
            + np.einsum("nid,njd->nij", vt, vs) * s00[:, None, None]
        )
        sgn = t_signs[pt][:, :, None] * s_signs[ps][:, None, :]
        quarter = 1.0 / (4.0 * t_area[pt] * s_area[ps])
        _scatter(amat, entries * sgn * quarter[:, None, None], t_edges[pt], s_edges[ps])
        whole = 1.0 / (t_area[pt] * s_area[ps])
        _scatter(pmat, sgn * (s00 * whole)[:, None, None], t_edges[pt], s_edges[ps])

    st, ss, shared = sing
    for t, s, sh in zip(st, ss, shared):
        res = integrate_singular_pair(
            smesh.tri_vertices[s], tmesh.tri_vertices[t], "green", k,
            shared=int(sh), config=config,
        )
        sgn = t_signs[t][:, None] * s_signs[s][None, :]
        rows = t_edges[t][:, None] * amat.shape[1] + s_edges[s][None, :]
        np.add.at(
            amat.ravel(), rows.ravel(),
            (res.entries * sgn / (4.0 * t_area[t] * s_area[s])).ravel(),
        )
        np.add.at(
            pmat.ravel(), rows.ravel(),
            (res.scalar * sgn / (t_area[t] * s_area[s])).ravel(),
        )
    return amat, pmat


def _fine_curl(tst, src, k, config):
    """Kfine[a, b] = iint mu_a . (grad G x mu_b) between two surfaces."""
    tmesh, smesh = tst.fine, src.fine
    far, mid, sing = _pair_classes(tmesh, smesh, config)

    kmat = np.zeros((tmesh.n_edges, smesh.n_edges), dtype=np.complex128)
    t_signs, s_signs = tst.micro.tri_signs, src.micro.tri_signs
    t_edges, s_edges = tmesh.tri_edges, smesh.tri_edges
    t_area, s_area = tmesh.areas, smesh.areas

    passes = (
        (far, config.order_test, config.order_source),
        (mid, config.order_near, config.order_near),
    )
    for (pt, ps), o_t, o_s in passes:
        if pt.size == 0:
            continue
        xp, xw = tst.fine_rule(o_t)
        yp, yw = src.fine_rule(o_s)
        entries = kernels.curl_pair_entries(
            xp, xw, yp, yw, tmesh.tri_vertices, smesh.tri_vertices, pt, ps, k
        )
        sgn = t_signs[pt][:, :, None] * s_signs[ps][:, None, :]
        quarter = 1.0 / (4.0 * t_area[pt] * s_area[ps])
        _scatter(kmat, entries * sgn * quarter[:, None, None], t_edges[pt], s_edges[ps])

    st, ss, shared = sing
    for t, s, sh in zip(st, ss, shared):
        entries = integrate_singular_pair(
            smesh.tri_vertices[s], tmesh.tri_vertices[t], "grad_green", k,
            shared=int(sh), config=config,
        )
        sgn = t_signs[t][:, None] * s_signs[s][None, :]
        rows = t_edges[t][:, None] * kmat.shape[1] + s_edges[s][None, :]
        np.add.at(
            kmat.ravel(), rows.ravel(),
            (entries * sgn / (4.0 * t_area[t] * s_area[s])).ravel(),
        )
    return kmat


def _fine_green_cached(tst, src, k, config, cache):
    if cache is not None:
        hit = cache.get("green", tst, src, k)
        if hit is not None:
            return hit
    result = _fine_green(tst, src, k, config)
    if cache is not None:
        cache.put("green", tst, src, k, result)
    return result


def _fine_curl_cached(tst, src, k, config, cache):
    if cache is not None:
        hit = cache.get("curl", tst, src, k)
        if hit is not None:
            return hit
    result = _fine_curl(tst, src, k, config)
    if cache is not None:
        cache.put("curl", tst, src, k, result)
    return result


def _sandwich(ct, fine, cs):
    half = ct.T @ fine
    return np.asarray((cs.T @ half.T).T)


def _finish(mat):
    mat = np.ascontiguousarray(mat)
    mat.flags.writeable = False
    return mat


def assemble_Ts(desc, config=None, cache=None):
    """Rotated-test single-layer block for the descriptor's pairing."""
    _validate(desc, "Ts")
    cfg = config or DEFAULT_CONFIG
    amat, _ = _fine_green_cached(desc.test, desc.trial, desc.k, cfg, cache)
    ct = desc.test.coefficient_map(desc.test_family)
    cs = desc.trial.coefficient_map(desc.trial_family)
    return _finish(_sandwich(ct, amat, cs))


def assemble_Th(desc, config=None, cache=None):
    """Rotated-test hypersingular block (gradient moved onto the test side)."""
    _validate(desc, "Th")
    cfg = config or DEFAULT_CONFIG
    _, pmat = _fine_green_cached(desc.test, desc.trial, desc.k, cfg, cache)
    ct = desc.test.coefficient_map(desc.test_family)
    cs = desc.trial.coefficient_map(desc.trial_family)
    return _finish(-_sandwich(ct, pmat, cs))


def assemble_K(desc, config=None, cache=None):
    """Rotated-test principal-value double-layer block.

    The self-cell and coplanar-pair contributions of the rotated-curl
    kernel vanish identically, which is exactly the principal value; the
    accompanying half-identity term is carried explicitly by the system
    builders, never folded in here.
    """
    _validate(desc, "K")
    cfg = config or DEFAULT_CONFIG
    kfine = _fine_curl_cached(desc.test, desc.trial, desc.k, cfg, cache)
    ct = desc.test.coefficient_map(desc.test_family)
    cs = desc.trial.coefficient_map(desc.trial_family)
    return _finish(-_sandwich(ct, kfine, cs))


def _fine_gram(mesh, signs):
    """Exact per-cell mixed Gram between micro functions, sparse.

    On one flat cell, int (n x (r - p_i)) . (r - p_j) dA has the closed
    form A n . ((c - p_i) x (c - p_j)) with c the centroid, so no
    quadrature is involved.
    """
    c = mesh.tri_vertices.mean(axis=1)
    u = c[:, None, :] - mesh.tri_vertices
    cross = np.cross(u[:, :, None, :], u[:, None, :, :])
    vals = np.einsum("fijd,fd->fij", cross, mesh.normals)
    vals *= signs[:, :, None] * signs[:, None, :]
    vals /= 4.0 * mesh.areas[:, None, None]

    rows = np.repeat(mesh.tri_edges, 3, axis=1).ravel()
    cols = np.tile(mesh.tri_edges, (1, 3)).ravel()
    return sp.csr_matrix(
        (vals.ravel(), (rows, cols)), shape=(mesh.n_edges, mesh.n_edges)
    )


def assemble_gram(desc):
    """Mixed Gram matrix of rotated test functions against trial functions."""
    _validate(desc, "Gram")
    spaces = desc.test
    gfine = _fine_gram(spaces.fine, spaces.micro.tri_signs)
    ct = spaces.coefficient_map(desc.test_family)
    cs = spaces.coefficient_map(desc.trial_family)
    dense = np.asarray((ct.T @ (gfine @ cs)).todense(), dtype=np.complex128)
    return _finish(dense)


def combine_T(ts, th, k):
    """Full EFIE block ik Ts + (i/k) Th, exactly that combination."""
    return _finish(1j * k * ts + (1j / k) * th)


def save_matrix(path, mat):
    """Dump a complex matrix: two little-endian uint64 dims, then row-major
    (re, im) float64 pairs."""
    m = np.ascontiguousarray(mat, dtype=np.complex128)
    with open(path, "wb") as fh:
        fh.write(np.asarray(m.shape, dtype="<u8").tobytes())
        fh.write(m.astype("<c16").tobytes())


def load_matrix(path):
    """Read a matrix written by save_matrix."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 16:
        raise ValueError(f"{path}: truncated header")
    rows, cols = np.frombuffer(raw[:16], dtype="<u8")
    data = np.frombuffer(raw[16:], dtype="<c16")
    if data.size != rows * cols:
        raise ValueError(
            f"{path}: expected {rows * cols} entries, found {data.size}"
        )
    return data.reshape(int(rows), int(cols)).copy()


def _cell_current(spaces, current):
    """Micro coefficients and per-cell slot weights of a SurfaceCurrent."""
    if isinstance(current.space, RwgSpace) and current.space.mesh is spaces.mesh:
        cmap = spaces.R
    elif isinstance(current.space, BcSpace) and current.space.mesh is spaces.mesh:
        cmap = spaces.B
    else:
        raise DimensionMismatch("current was expanded on a different surface")
    if len(current.coefficients) != spaces.n_edges:
        raise DimensionMismatch(
            f"coefficient length {len(current.coefficients)} != {spaces.n_edges}"
        )
    mc = cmap @ np.asarray(current.coefficients, dtype=np.complex128)
    fine = spaces.fine
    slot = mc[fine.tri_edges] * spaces.micro.tri_signs
    div_cell = slot.sum(axis=1) / fine.areas
    return slot, div_cell


def _check_clearance(spaces, points):
    fine = spaces.fine
    centroids = fine.tri_vertices.mean(axis=1)
    slack = np.linalg.norm(points[:, None, :] - centroids[None, :, :], axis=2)
    slack -= fine.diameters()[None, :]
    limit = 1e-6 * np.linalg.norm(np.ptp(spaces.mesh.vertices, axis=0))
    bad = slack.min(axis=1) < limit
    if np.any(bad):
        raise PointTooClose(
            f"{int(bad.sum())} evaluation point(s) within {limit:.3e} m of the surface"
        )


def radiate(spaces, magnetic, electric, points, order=5):
    """E and eta H at off-surface points from expanded surface currents.

    `magnetic` expands -M and `electric` expands eta J (the system
    unknowns); either may be None.  With S the single-layer potential and
    the gradient kernel written grad G = h(R) (r - r'),

        E     = ik S[eta j] + (i/k) grad Sdiv[eta j] + int h (r-r') x (-m)
        eta H = -ik S[-m] - (i/k) grad Sdiv[-m]     + int h (r-r') x (eta j)

    evaluated pointwise, not tested.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    _check_clearance(spaces, points)
    fine = spaces.fine

    rule = gauss_rule(order)
    y = np.einsum("pi,fid->fpd", rule.points, fine.tri_vertices)
    w = rule.weights[None, :] * fine.areas[:, None]

    currents = []
    for cur, kind in ((magnetic, "magnetic"), (electric, "electric")):
        if cur is None:
            currents.append(None)
            continue
        if cur.kind != kind:
            raise DimensionMismatch(f"expected a {kind} current, got {cur.kind!r}")
        slot, div_cell = _cell_current(spaces, cur)
        val = np.einsum(
            "fi,fpid->fpd",
            slot,
            y[:, :, None, :] - fine.tri_vertices[:, None, :, :],
        ) / (2.0 * fine.areas[:, None, None])
        currents.append((val, div_cell))
    k = (magnetic or electric).k

    e_out = np.zeros((points.shape[0], 3), dtype=np.complex128)
    h_out = np.zeros_like(e_out)
    yflat = y.reshape(-1, 3)
    wflat = w.reshape(-1)
    divs = [
        None if c is None else np.repeat(c[1], rule.weights.size)
        for c in currents
    ]
    vals = [None if c is None else c[0].reshape(-1, 3) for c in currents]

    chunk = max(1, int(2e6 / max(yflat.shape[0], 1)))
    for lo in range(0, points.shape[0], chunk):
        pts = points[lo:lo + chunk]
        d = pts[:, None, :] - yflat[None, :, :]
        r = np.sqrt(np.einsum("pqd,pqd->pq", d, d))
        g = np.exp(1j * k * r) / (FOUR_PI * r) * wflat
        h = g * (1j * k * r - 1.0) / r ** 2

        for idx in (1, 0):
            # idx 1: electric current drives E directly; idx 0: magnetic
            # drives eta H with the opposite sign, by the block duality.
            if vals[idx] is None:
                continue
            single = np.einsum("pq,qd->pd", g, vals[idx])
            grad_div = np.einsum("pq,pqd,q->pd", h, d, divs[idx])
            contrib = 1j * k * single + (1j / k) * grad_div
            if idx == 1:
                e_out[lo:lo + chunk] += contrib
            else:
                h_out[lo:lo + chunk] -= contrib

        if vals[0] is not None:
            e_out[lo:lo + chunk] += np.einsum(
                "pq,pqe->pe", h, np.cross(d, vals[0][None, :, :])
            )
        if vals[1] is not None:
            h_out[lo:lo + chunk] += np.einsum(
                "pq,pqe->pe", h, np.cross(d, vals[1][None, :, :])
            )
    return e_out, h_out
