"""Closed triangle surface meshes.

Provides loading (OFF, Gmsh ASCII v2), validation (closed, manifold,
orientable, genus 0), icosphere generation, barycentric refinement, and a few
geometric queries used elsewhere in the package.

Conventions
-----------
* Edges are stored as sorted vertex-index pairs in lexicographic order, so
  edge numbering is reproducible for identical input.
* The two triangles adjacent to an edge are stored in ascending triangle
  index order; downstream code treats the lower-index triangle as the "plus"
  side of the edge.
* After validation all triangle windings are counterclockwise as seen from
  outside (outward normals, positive enclosed volume).
"""

from __future__ import annotations

import logging

import numpy as np

from .exceptions import OrientationError, ParseError, TopologyError

logger = logging.getLogger(__name__)

_DEGENERATE_REL_AREA = 1e-12


class TriangleMesh:
    """A validated closed, oriented, genus-0 triangle surface mesh.

    Parameters
    ----------
    vertices : (V, 3) float array
        Vertex coordinates in meters.
    triangles : (F, 3) int array
        Vertex indices per triangle, counterclockwise seen from outside.

    Raises
    ------
    TopologyError
        If the mesh is open, non-manifold, disconnected, degenerate, or has
        genus > 0.
    OrientationError
        If triangle windings are not globally consistent or normals point
        inward (negative enclosed volume).
    """

    def __init__(self, vertices, triangles):
        vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise TopologyError("vertices must be an (V, 3) array")
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise TopologyError("triangles must be an (F, 3) array")
        if triangles.size and (triangles.min() < 0 or triangles.max() >= len(vertices)):
            raise TopologyError("triangle refers to a vertex index out of range")

        self.vertices = vertices
        self.triangles = triangles
        self._build_connectivity()
        self._validate_geometry()
        self._validate_orientation()

    # ------------------------------------------------------------------
    # construction helpers
    # ------------------------------------------------------------------

    def _build_connectivity(self):
        tris = self.triangles
        n_faces = len(tris)
        # Directed edges (a, b) for each triangle side, with face of origin.
        i0 = tris[:, [0, 1, 2]].ravel()
        i1 = tris[:, [1, 2, 0]].ravel()
        lo = np.minimum(i0, i1)
        hi = np.maximum(i0, i1)
        keys = np.stack([lo, hi], axis=1)
        edges, inverse = np.unique(keys, axis=0, return_inverse=True)
        n_edges = len(edges)

        counts = np.bincount(inverse, minlength=n_edges)
        if np.any(counts != 2):
            bad = edges[np.nonzero(counts != 2)[0][0]]
            raise TopologyError(
                "edge (%d, %d) belongs to %d triangles; mesh must be closed "
                "and manifold" % (bad[0], bad[1], counts[counts != 2][0])
            )

        face_of_side = np.repeat(np.arange(n_faces), 3)
        # forward: side traverses the edge as (lo -> hi)
        forward = i0 == lo

        edge_tris = np.full((n_edges, 2), -1, dtype=np.int64)
        edge_forward = np.zeros((n_edges, 2), dtype=bool)
        slot = np.zeros(n_edges, dtype=np.int64)
        order = np.argsort(inverse, kind="stable")
        for side in order:
            e = inverse[side]
            edge_tris[e, slot[e]] = face_of_side[side]
            edge_forward[e, slot[e]] = forward[side]
            slot[e] += 1
        # Ascending triangle order per edge (deterministic "plus" side).
        swap = edge_tris[:, 0] > edge_tris[:, 1]
        edge_tris[swap] = edge_tris[swap][:, ::-1]
        edge_forward[swap] = edge_forward[swap][:, ::-1]

        # Orientation consistency: the two sides must traverse oppositely.
        if np.any(edge_forward[:, 0] == edge_forward[:, 1]):
            raise OrientationError("adjacent triangles traverse a shared edge "
                                   "in the same direction")

        # tri_edges[f, a] = edge opposite local vertex a.
        tri_edges = np.empty((n_faces, 3), dtype=np.int64)
        side_local = np.tile([2, 0, 1], n_faces)  # side (a_i, a_{i+1}) is opposite vertex a_{i+2}
        tri_edges[face_of_side, side_local] = inverse
        # The assignment above writes each (face, slot) exactly once.

        self.edges = edges
        self.edge_tris = edge_tris
        self.tri_edges = tri_edges

        # Connectivity / genus checks.
        n_vertices = len(self.vertices)
        euler = n_vertices - n_edges + n_faces
        if euler != 2:
            raise TopologyError(
                "Euler characteristic %d != 2; only genus-0 closed surfaces "
                "are supported" % euler
            )
        self._check_connected()

    def _check_connected(self):
        n_faces = len(self.triangles)
        if n_faces == 0:
            raise TopologyError("mesh has no triangles")
        neighbors = [[] for _ in range(n_faces)]
        for t0, t1 in self.edge_tris:
            neighbors[t0].append(t1)
            neighbors[t1].append(t0)
        seen = np.zeros(n_faces, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            f = stack.pop()
            for g in neighbors[f]:
                if not seen[g]:
                    seen[g] = True
                    stack.append(g)
        if not seen.all():
            raise TopologyError("mesh has more than one connected component")

    def _validate_geometry(self):
        v = self.tri_vertices
        cross = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
        double_area = np.linalg.norm(cross, axis=1)
        scale = np.ptp(self.vertices, axis=0).max()
        if np.any(double_area <= _DEGENERATE_REL_AREA * scale * scale):
            raise TopologyError("mesh contains a degenerate (zero-area) triangle")
        self.areas = 0.5 * double_area
        self.normals = cross / double_area[:, None]
        self.centroids = v.mean(axis=1)

    def _validate_orientation(self):
        if self.signed_volume() <= 0.0:
            raise OrientationError("triangle windings give non-positive "
                                   "enclosed volume (normals point inward)")

    # ------------------------------------------------------------------
    # basic queries
    # ------------------------------------------------------------------

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def tri_vertices(self):
        """(F, 3, 3) coordinates of each triangle's corners."""
        return self.vertices[self.triangles]

    def signed_volume(self):
        """Enclosed volume via the divergence theorem (positive = outward)."""
        v = self.tri_vertices
        return float(np.einsum("ij,ij->", v[:, 0], np.cross(v[:, 1], v[:, 2]))) / 6.0

    def diameters(self):
        """(F,) longest edge length of each triangle."""
        v = self.tri_vertices
        d01 = np.linalg.norm(v[:, 0] - v[:, 1], axis=1)
        d12 = np.linalg.norm(v[:, 1] - v[:, 2], axis=1)
        d20 = np.linalg.norm(v[:, 2] - v[:, 0], axis=1)
        return np.maximum(np.maximum(d01, d12), d20)

    def edge_lengths(self):
        d = self.vertices[self.edges[:, 0]] - self.vertices[self.edges[:, 1]]
        return np.linalg.norm(d, axis=1)

    def edge_index(self, a, b):
        """Global index of the edge between vertices ``a`` and ``b``."""
        lo, hi = (a, b) if a < b else (b, a)
        idx = np.searchsorted(self.edges[:, 0], lo)
        while idx < len(self.edges) and self.edges[idx, 0] == lo:
            if self.edges[idx, 1] == hi:
                return idx
            idx += 1
        raise KeyError("no edge (%d, %d)" % (a, b))

    def contains_points(self, points):
        """Boolean inside test via winding solid angle.

        Parameters
        ----------
        points : (N, 3) array

        Returns
        -------
        (N,) bool array, True where the point lies strictly inside.
        """
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        omega = np.zeros(len(points))
        v = self.tri_vertices
        for block in range(0, len(points), 512):
            p = points[block:block + 512]
            a = v[None, :, 0] - p[:, None]
            b = v[None, :, 1] - p[:, None]
            c = v[None, :, 2] - p[:, None]
            la = np.linalg.norm(a, axis=2)
            lb = np.linalg.norm(b, axis=2)
            lc = np.linalg.norm(c, axis=2)
            num = np.einsum("ptk,ptk->pt", a, np.cross(b, c))
            den = (la * lb * lc + np.einsum("ptk,ptk->pt", a, b) * lc
                   + np.einsum("ptk,ptk->pt", b, c) * la
                   + np.einsum("ptk,ptk->pt", c, a) * lb)
            omega[block:block + 512] = 2.0 * np.arctan2(num, den).sum(axis=1)
        return omega > 2.0 * np.pi

    def first_ray_hit(self, origin, direction):
        """First triangle hit by a ray, or None.

        Returns
        -------
        (tri_index, point) or None
            Index of the nearest triangle with a strictly positive ray
            parameter and the intersection point.
        """
        origin = np.asarray(origin, dtype=np.float64)
        direction = np.asarray(direction, dtype=np.float64)
        v = self.tri_vertices
        e1 = v[:, 1] - v[:, 0]
        e2 = v[:, 2] - v[:, 0]
        h = np.cross(direction[None, :], e2)
        det = np.einsum("tk,tk->t", e1, h)
        ok = np.abs(det) > 1e-300
        inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
        s = origin[None, :] - v[:, 0]
        u = np.einsum("tk,tk->t", s, h) * inv
        q = np.cross(s, e1)
        w = np.einsum("k,tk->t", direction, q) * inv
        t = np.einsum("tk,tk->t", e2, q) * inv
        eps = 1e-12
        hit = ok & (u >= -eps) & (w >= -eps) & (u + w <= 1.0 + eps) & (t > 1e-12)
        if not hit.any():
            return None
        cand = np.nonzero(hit)[0]
        best = cand[np.argmin(t[cand])]
        return int(best), origin + t[best] * direction

    def save_off(self, path):
        """Write the mesh as an ASCII OFF file (deterministic formatting)."""
        with open(path, "w") as fh:
            fh.write("OFF\n")
            fh.write("%d %d 0\n" % (self.n_vertices, self.n_triangles))
            for x, y, z in self.vertices:
                fh.write("%.17g %.17g %.17g\n" % (x, y, z))
            for a, b, c in self.triangles:
                fh.write("3 %d %d %d\n" % (a, b, c))


def canonical_dump(mesh):
    """Deterministic text dump (vertices, triangles, edges) for golden tests."""
    lines = ["lovebem-mesh 1",
             "%d %d %d" % (mesh.n_vertices, mesh.n_triangles, mesh.n_edges)]
    for x, y, z in mesh.vertices:
        lines.append("v %.17g %.17g %.17g" % (x, y, z))
    for a, b, c in mesh.triangles:
        lines.append("t %d %d %d" % (a, b, c))
    for a, b in mesh.edges:
        lines.append("e %d %d" % (a, b))
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------
# loading
# ----------------------------------------------------------------------


def load_mesh(path, fmt=None):
    """Load and validate a triangle mesh from OFF or Gmsh ASCII v2.

    Winding order is repaired automatically: a consistent orientation is
    propagated across the surface and flipped globally if the enclosed
    volume comes out negative. Genuinely non-orientable input raises
    OrientationError; open or non-manifold input raises TopologyError.

    Parameters
    ----------
    path : str
        File to read.
    fmt : {"off", "gmsh", None}
        Force a format; None infers from the extension, falling back to
        content sniffing.
    """
    if fmt is None:
        lowered = str(path).lower()
        if lowered.endswith(".off"):
            fmt = "off"
        elif lowered.endswith(".msh"):
            fmt = "gmsh"
        else:
            with open(path) as fh:
                head = fh.read(16)
            fmt = "gmsh" if head.startswith("$MeshFormat") else "off"
    if fmt == "off":
        vertices, triangles = _parse_off(path)
    elif fmt == "gmsh":
        vertices, triangles = _parse_gmsh(path)
    else:
        raise ParseError("unknown mesh format %r" % (fmt,))
    triangles = _orient_consistently(vertices, triangles)
    return TriangleMesh(vertices, triangles)


def _parse_off(path):
    with open(path) as fh:
        tokens = []
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                tokens.extend(line.split())
    if not tokens:
        raise ParseError("%s: empty OFF file" % path)
    pos = 0
    if tokens[0].upper() == "OFF":
        pos = 1
    try:
        nv, nf = int(tokens[pos]), int(tokens[pos + 1])
        pos += 3  # skip edge count
        vertices = np.array(tokens[pos:pos + 3 * nv], dtype=np.float64).reshape(nv, 3)
        pos += 3 * nv
        triangles = np.empty((nf, 3), dtype=np.int64)
        for f in range(nf):
            arity = int(tokens[pos])
            if arity != 3:
                raise ParseError("%s: face %d has %d vertices; only triangles "
                                 "are supported" % (path, f, arity))
            triangles[f] = [int(t) for t in tokens[pos + 1:pos + 4]]
            pos += 1 + arity
    except (ValueError, IndexError) as exc:
        raise ParseError("%s: malformed OFF file (%s)" % (path, exc)) from exc
    return vertices, triangles


def _parse_gmsh(path):
    with open(path) as fh:
        lines = [ln.strip() for ln in fh]
    try:
        nodes_at = lines.index("$Nodes")
        elems_at = lines.index("$Elements")
    except ValueError as exc:
        raise ParseError("%s: missing $Nodes or $Elements section" % path) from exc
    try:
        n_nodes = int(lines[nodes_at + 1])
        coords = {}
        for ln in lines[nodes_at + 2:nodes_at + 2 + n_nodes]:
            parts = ln.split()
            coords[int(parts[0])] = [float(parts[1]), float(parts[2]), float(parts[3])]
        n_elems = int(lines[elems_at + 1])
        tris = []
        for ln in lines[elems_at + 2:elems_at + 2 + n_elems]:
            parts = [int(t) for t in ln.split()]
            etype, ntags = parts[1], parts[2]
            if etype == 2:  # 3-node triangle
                tris.append(parts[3 + ntags:6 + ntags])
    except (ValueError, IndexError) as exc:
        raise ParseError("%s: malformed Gmsh file (%s)" % (path, exc)) from exc
    if not tris:
        raise ParseError("%s: no triangles found" % path)
    ids = sorted(coords)
    remap = {node: i for i, node in enumerate(ids)}
    vertices = np.array([coords[i] for i in ids], dtype=np.float64)
    triangles = np.array([[remap[a] for a in t] for t in tris], dtype=np.int64)
    return vertices, triangles


def _orient_consistently(vertices, triangles):
    """Flip triangles (BFS propagation) to a single consistent winding."""
    triangles = np.array(triangles, dtype=np.int64, copy=True)
    n_faces = len(triangles)
    side_map = {}
    for f in range(n_faces):
        t = triangles[f]
        for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            key = (a, b) if a < b else (b, a)
            side_map.setdefault(key, []).append(f)
    for key, faces in side_map.items():
        if len(faces) != 2:
            raise TopologyError("edge (%d, %d) belongs to %d triangles; mesh "
                                "must be closed and manifold" % (key[0], key[1], len(faces)))

    def directed_sides(f):
        t = triangles[f]
        return ((t[0], t[1]), (t[1], t[2]), (t[2], t[0]))

    visited = np.zeros(n_faces, dtype=bool)
    for seed in range(n_faces):
        if visited[seed]:
            continue
        visited[seed] = True
        stack = [seed]
        while stack:
            f = stack.pop()
            for a, b in directed_sides(f):
                key = (a, b) if a < b else (b, a)
                other = [g for g in side_map[key] if g != f]
                if not other:
                    continue  # self-paired edge already rejected above
                g = other[0]
                same_dir = (a, b) in directed_sides(g)
                if visited[g]:
                    if same_dir:
                        raise OrientationError("mesh is non-orientable")
                else:
                    if same_dir:
                        triangles[g] = triangles[g][::-1]
                    visited[g] = True
                    stack.append(g)

    v = vertices[triangles]
    vol = np.einsum("ij,ij->", v[:, 0], np.cross(v[:, 1], v[:, 2])) / 6.0
    if vol < 0:
        triangles = triangles[:, ::-1]
        logger.debug("flipped global orientation (signed volume was %g)", vol)
    return triangles


# ----------------------------------------------------------------------
# generation
# ----------------------------------------------------------------------

_ICO_VERTS = None
_ICO_FACES = np.array([
    [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
    [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
    [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
    [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
], dtype=np.int64)


def _icosahedron_vertices():
    global _ICO_VERTS
    if _ICO_VERTS is None:
        phi = (1.0 + np.sqrt(5.0)) / 2.0
        raw = np.array([
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ], dtype=np.float64)
        _ICO_VERTS = raw / np.linalg.norm(raw[0])
    return _ICO_VERTS


def generate_sphere(radius, subdivisions):
    """Icosphere: subdivided icosahedron with vertices projected to ``radius``.

    Parameters
    ----------
    radius : float
        Sphere radius (> 0).
    subdivisions : int
        Number of 4-way refinement passes (>= 0). Face count is 20 * 4**n.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if subdivisions < 0:
        raise ValueError("subdivisions must be >= 0")
    verts = list(_icosahedron_vertices())
    faces = _ICO_FACES
    for _ in range(subdivisions):
        midpoint = {}
        new_faces = []

        def mid(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in midpoint:
                m = verts[a] + verts[b]
                m = m / np.linalg.norm(m)
                midpoint[key] = len(verts)
                verts.append(m)
            return midpoint[key]

        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]])
        faces = np.array(new_faces, dtype=np.int64)
    vertices = radius * np.array(verts)
    return TriangleMesh(vertices, faces)


# ----------------------------------------------------------------------
# barycentric refinement
# ----------------------------------------------------------------------


class BarycentricRefinement:
    """Six-way barycentric refinement of a parent mesh.

    Each parent triangle is split into six micro triangles by its three edge
    midpoints and its (flat) barycenter; no reprojection is applied, so the
    refined surface is geometrically identical to the parent surface.

    Attributes
    ----------
    parent : TriangleMesh
    mesh : TriangleMesh
        The refined mesh. Micro triangles of parent ``f`` occupy indices
        ``6 f .. 6 f + 5``.
    midpoint_of_edge : (E,) int array
        Fine vertex index of each parent edge midpoint.
    center_of_tri : (F,) int array
        Fine vertex index of each parent barycenter. Parent vertices keep
        their indices in the fine mesh.
    parent_of_micro : (6 F,) int array
    """

    def __init__(self, parent):
        self.parent = parent
        nv = parent.n_vertices
        ne = parent.n_edges
        self.midpoint_of_edge = nv + np.arange(ne, dtype=np.int64)
        self.center_of_tri = nv + ne + np.arange(parent.n_triangles, dtype=np.int64)

        mids = 0.5 * (parent.vertices[parent.edges[:, 0]]
                      + parent.vertices[parent.edges[:, 1]])
        centers = parent.tri_vertices.mean(axis=1)
        fine_vertices = np.vstack([parent.vertices, mids, centers])

        micro = np.empty((6 * parent.n_triangles, 3), dtype=np.int64)
        for f, (a, b, c) in enumerate(parent.triangles):
            mab = self.midpoint_of_edge[parent.edge_index(a, b)]
            mbc = self.midpoint_of_edge[parent.edge_index(b, c)]
            mca = self.midpoint_of_edge[parent.edge_index(c, a)]
            g = self.center_of_tri[f]
            micro[6 * f:6 * f + 6] = [
                [a, mab, g], [mab, b, g], [b, mbc, g],
                [mbc, c, g], [c, mca, g], [mca, a, g],
            ]
        self.mesh = TriangleMesh(fine_vertices, micro)
        self.parent_of_micro = np.repeat(np.arange(parent.n_triangles, dtype=np.int64), 6)

    def fine_edge_index(self, a, b):
        """Fine-mesh edge index between fine vertices ``a`` and ``b``."""
        return self.mesh.edge_index(a, b)


def barycentric_refine(mesh):
    """Return the BarycentricRefinement of ``mesh``."""
    return BarycentricRefinement(mesh)
