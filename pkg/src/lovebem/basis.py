"""Edge functions on the primal mesh and their duals on the refinement.

Two div-conforming families share the edge index set of a closed mesh.
The primal family assigns each edge the classic two-triangle hat current,
here in the unit-flux convention (no edge-length factor), so that exactly
one unit of current crosses the defining edge and the surface divergence
is +-1/A on the two cells.  The dual family lives on the barycentric
refinement: each primal edge gets a fixed rational-coefficient combination
of unit-flux micro edge functions that circulates around the two endpoint
vertices and pushes its charge onto the barycentric dual cells.  Both
families are exactly representable in the refinement's own edge-function
space, which is what the assembly layer exploits: operators are built once
between micro functions and sandwiched with the sparse coefficient maps
produced here.

The dual construction, with its valence-dependent spoke weights, is
spelled out with a worked example in docs/bc_construction.md.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .exceptions import DimensionMismatch, OutOfSupport
from .helmholtz import build_sigma_lambda

# Coefficients smaller than this are construction noise, not weights: the
# smallest genuine dual weight is 1/(2 * max valence) and primal fluxes are
# rationals no smaller than 1/12 on any sane mesh.
_PRUNE_TOL = 1e-10


class RwgSpace:
    """Unit-flux div-conforming edge functions on a triangle mesh.

    The function of edge e is supported on its two incident triangles.  On
    the plus triangle (the incident triangle with the lower index) it reads
    f_e(r) = (r - v+) / (2 A+) with v+ the vertex opposite e, and on the
    minus triangle the sign flips.  The divergence is +1/A+ and -1/A-, and
    unit current crosses the defining edge from plus to minus.
    """

    def __init__(self, mesh):
        self.mesh = mesh
        self.n_functions = mesh.n_edges

        self.plus_tri = mesh.edge_tris[:, 0].copy()
        self.minus_tri = mesh.edge_tris[:, 1].copy()

        # Slot a of a triangle holds the edge opposite local vertex a, so
        # matching tri_edges against the edge index recovers the free vertex.
        eids = np.arange(mesh.n_edges)
        slot_plus = np.argmax(mesh.tri_edges[self.plus_tri] == eids[:, None], axis=1)
        slot_minus = np.argmax(mesh.tri_edges[self.minus_tri] == eids[:, None], axis=1)
        self.plus_free_vertex = mesh.triangles[self.plus_tri, slot_plus]
        self.minus_free_vertex = mesh.triangles[self.minus_tri, slot_minus]

        # Per-triangle slot signs for assembly: +1 where the triangle is the
        # plus cell of the edge sitting in that slot.
        self.tri_signs = np.where(
            mesh.edge_tris[mesh.tri_edges, 0]
            == np.arange(mesh.n_triangles)[:, None],
            1.0,
            -1.0,
        )

    def _barycentric(self, tri, point):
        """Barycentric coordinates of an on-surface point, or None."""
        verts = self.mesh.tri_vertices[tri]
        e1 = verts[1] - verts[0]
        e2 = verts[2] - verts[0]
        d = np.asarray(point, dtype=np.float64) - verts[0]
        g11, g12, g22 = e1 @ e1, e1 @ e2, e2 @ e2
        det = g11 * g22 - g12 * g12
        s = (g22 * (e1 @ d) - g12 * (e2 @ d)) / det
        t = (g11 * (e2 @ d) - g12 * (e1 @ d)) / det
        scale = np.sqrt(2.0 * self.mesh.areas[tri])
        if np.linalg.norm(d - s * e1 - t * e2) > 1e-9 * scale:
            return None
        tol = 1e-12
        if s < -tol or t < -tol or s + t > 1.0 + tol:
            return None
        return 1.0 - s - t, s, t

    def evaluate(self, index, point):
        """Value and surface divergence of function `index` at `point`.

        The point must lie on one of the two supporting triangles, else
        OutOfSupport is raised.
        """
        candidates = (
            (self.plus_tri[index], self.plus_free_vertex[index], 1.0),
            (self.minus_tri[index], self.minus_free_vertex[index], -1.0),
        )
        for tri, free, sign in candidates:
            if self._barycentric(tri, point) is not None:
                area = self.mesh.areas[tri]
                value = sign * (np.asarray(point) - self.mesh.vertices[free]) / (2.0 * area)
                return value, sign / area
        raise OutOfSupport(
            f"point {np.asarray(point)} is not on the support of edge function {index}"
        )


class BcSpace:
    """Dual edge functions as sparse combinations of micro edge functions.

    micro_coefficients has shape (fine edges, primal edges); column e holds
    the weights of the dual function of primal edge e in the unit-flux edge
    basis of the refinement.
    """

    def __init__(self, refinement, micro_coefficients):
        self.refinement = refinement
        self.mesh = refinement.parent
        self.fine = refinement.mesh
        self.micro_space = RwgSpace(refinement.mesh)
        self.micro_coefficients = micro_coefficients.tocsc()
        self.n_functions = refinement.parent.n_edges

    def evaluate(self, index, point):
        """Value and surface divergence of dual function `index` at `point`."""
        col = self.micro_coefficients.getcol(index)
        fine_edges = col.indices
        weights = col.data
        micro = self.micro_space

        tris = np.unique(
            np.concatenate([micro.plus_tri[fine_edges], micro.minus_tri[fine_edges]])
        )
        weight_of = dict(zip(fine_edges.tolist(), weights.tolist()))
        for tri in tris:
            if micro._barycentric(tri, point) is None:
                continue
            value = np.zeros(3)
            div = 0.0
            area = self.fine.areas[tri]
            for slot in range(3):
                edge = self.fine.tri_edges[tri, slot]
                w = weight_of.get(int(edge))
                if w is None:
                    continue
                sign = micro.tri_signs[tri, slot]
                free = self.fine.vertices[self.fine.triangles[tri, slot]]
                value += w * sign * (np.asarray(point) - free) / (2.0 * area)
                div += w * sign / area
            return value, div
        raise OutOfSupport(
            f"point {np.asarray(point)} is not on the support of dual function {index}"
        )


def build_rwg(mesh):
    """Primal edge-function space of a closed mesh."""
    return RwgSpace(mesh)


def evaluate(space, index, point):
    """Evaluate basis function `index` of either space at an on-surface point."""
    return space.evaluate(index, point)


@dataclass
class SurfaceCurrent:
    """Expansion coefficients of one current density on one space.

    The coefficients follow the system unknowns: an electric current holds
    eta J (impedance-scaled), a magnetic one holds -M (sign-flipped), so
    solver output can be wrapped directly without renormalizing.
    """

    space: object
    kind: str
    coefficients: np.ndarray
    k: float
    eta: float = field(default=376.730313668)

    def __post_init__(self):
        if self.kind not in ("electric", "magnetic"):
            raise ValueError(f"unknown current kind {self.kind!r}")
        self.coefficients = np.asarray(self.coefficients, dtype=np.complex128)
        if self.coefficients.ndim != 1 or len(self.coefficients) != self.space.n_functions:
            raise DimensionMismatch(
                f"expected {self.space.n_functions} coefficients, "
                f"got shape {self.coefficients.shape}"
            )


def _out_fluxes(fine, tri, field):
    """Fluxes of a linear field out of fine cell `tri`, one per directed side.

    The flux of a linear field across a straight side is its midpoint value
    dotted with the side's outward in-plane normal times the length, which
    collapses to field(mid) . ((q - p) x n) for side p -> q.
    """
    ids = fine.triangles[tri]
    pts = fine.vertices[ids]
    normal = fine.normals[tri]
    out = np.empty(3)
    edges = np.empty(3, dtype=np.int64)
    for s in range(3):
        p, q = pts[s], pts[(s + 1) % 3]
        out[s] = field(0.5 * (p + q)) @ np.cross(q - p, normal)
        edges[s] = fine.edge_index(ids[s], ids[(s + 1) % 3])
    return edges, out


def refinement_matrix(refinement):
    """Sparse map from primal edge coefficients to micro edge coefficients.

    Column e expresses the primal function of edge e exactly in the
    refinement's unit-flux edge basis: the micro coefficient on a fine edge
    is the flux of the primal function across it, oriented out of the fine
    edge's plus cell.  Averaging the two one-sided fluxes keeps the
    bookkeeping uniform; they agree up to sign by div-conformity.
    """
    parent = refinement.parent
    fine = refinement.mesh
    primal = RwgSpace(parent)

    rows, cols, vals = [], [], []
    for e in range(parent.n_edges):
        acc = {}
        halves = (
            (primal.plus_tri[e], primal.plus_free_vertex[e], 1.0),
            (primal.minus_tri[e], primal.minus_free_vertex[e], -1.0),
        )
        for tri, free, sign in halves:
            vfree = parent.vertices[free]
            scale = sign / (2.0 * parent.areas[tri])

            def field(r):
                return scale * (r - vfree)

            for micro in range(6 * tri, 6 * tri + 6):
                edges, out = _out_fluxes(fine, micro, field)
                for a, flux in zip(edges, out):
                    side = 1.0 if fine.edge_tris[a, 0] == micro else -1.0
                    acc[int(a)] = acc.get(int(a), 0.0) + 0.5 * side * flux
        for a, val in acc.items():
            if abs(val) > _PRUNE_TOL:
                rows.append(a)
                cols.append(e)
                vals.append(val)

    return sp.csr_matrix(
        (vals, (rows, cols)), shape=(fine.n_edges, parent.n_edges)
    )


def _walk_fan(parent, side_face, v, other):
    """Faces and edge midspokes around vertex v, starting across (v, other).

    Returns (faces, edge_ids) in the rotation order induced by the outward
    orientation; faces[j] contains the directed side v -> edge_ids[j]'s far
    endpoint, and consecutive faces share the next spoke edge.
    """
    faces = []
    edge_ids = []
    cur = other
    first = other
    while True:
        f = side_face[(v, cur)]
        faces.append(f)
        edge_ids.append(parent.edge_index(v, cur))
        tri = parent.triangles[f]
        local = int(np.where(tri == v)[0][0])
        cur = int(tri[(local + 2) % 3])
        if cur == first:
            break
    return faces, edge_ids


def build_bc(refinement):
    """Dual space on a barycentric refinement.

    Around each endpoint v of a primal edge e, the dual function runs a fan
    of spoke fluxes q (j/(2n) - 1/2) over the 2n fine edges radiating from
    v (n the vertex valence, q the loop sign of (e, v), spoke 0 on e itself
    carrying zero), and the two fine edges joining e's midpoint to the
    adjacent barycenters carry q/2 out of the first-endpoint side.  Charge
    then lands uniformly, q/(2n) per fine cell, on the barycentric dual
    cell of each endpoint, which is what makes star combinations of dual
    functions exactly solenoidal.
    """
    parent = refinement.parent
    fine = refinement.mesh
    _, lam = build_sigma_lambda(parent)

    side_face = {}
    for f, (a, b, c) in enumerate(parent.triangles):
        side_face[(int(a), int(b))] = f
        side_face[(int(b), int(c))] = f
        side_face[(int(c), int(a))] = f

    rows, cols, vals = [], [], []
    for e in range(parent.n_edges):
        v1, v2 = (int(v) for v in parent.edges[e])
        acc = {}

        for v, other in ((v1, v2), (v2, v1)):
            q = float(lam[e, v])
            faces, edge_ids = _walk_fan(parent, side_face, v, other)
            n_v = len(faces)

            # Fine cells swept in rotation order: the two corner cells of
            # each fan face, split by the barycenter spoke.
            cells = []
            for f in faces:
                tri = parent.triangles[f]
                p = int(np.where(tri == v)[0][0])
                cells.append(6 * f + 2 * p)
                cells.append(6 * f + (2 * p + 5) % 6)

            # Spoke j sits between cells j-1 and j; spoke 0 carries nothing.
            for j in range(1, 2 * n_v):
                if j % 2 == 0:
                    far = refinement.midpoint_of_edge[edge_ids[j // 2]]
                else:
                    far = refinement.center_of_tri[faces[j // 2]]
                a = refinement.fine_edge_index(v, int(far))
                flux = q * (j / (2.0 * n_v) - 0.5)
                side = 1.0 if fine.edge_tris[a, 0] == cells[j - 1] else -1.0
                acc[int(a)] = acc.get(int(a), 0.0) + side * flux

            # The seam between the two endpoint fans: q/2 out of the cells
            # flanking the first endpoint, booked once.
            if v == v1:
                mid = int(refinement.midpoint_of_edge[e])
                for cell, face in ((cells[0], faces[0]), (cells[-1], faces[-1])):
                    a = refinement.fine_edge_index(mid, int(refinement.center_of_tri[face]))
                    side = 1.0 if fine.edge_tris[a, 0] == cell else -1.0
                    acc[int(a)] = acc.get(int(a), 0.0) + side * 0.5 * q

        for a, val in acc.items():
            if abs(val) > _PRUNE_TOL:
                rows.append(a)
                cols.append(e)
                vals.append(val)

    coeffs = sp.csr_matrix(
        (vals, (rows, cols)), shape=(fine.n_edges, parent.n_edges)
    )
    return BcSpace(refinement, coeffs)


def micro_charges(fine, coefficients):
    """Integrated divergence per fine cell for each coefficient column.

    Returns the dense (fine cells, columns) matrix of A_t * div restricted
    to each cell; handy for structural checks of both coefficient maps.
    """
    micro = RwgSpace(fine)
    n_t = fine.n_triangles
    inc = sp.csr_matrix(
        (
            micro.tri_signs.ravel(),
            (
                np.repeat(np.arange(n_t), 3),
                fine.tri_edges.ravel(),
            ),
        ),
        shape=(n_t, fine.n_edges),
    )
    out = inc @ coefficients
    return np.asarray(out.todense()) if sp.issparse(out) else np.asarray(out)
