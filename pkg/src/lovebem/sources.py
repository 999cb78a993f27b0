"""Analytic dipole excitation: free-space fields, surface traces, tested data.

A single electric Hertzian dipole provides the reference solution for the
reconstruction experiments.  This module evaluates its closed-form fields,
projects the exterior traces onto the edge basis of a surrounding surface,
and assembles the tested right-hand sides used by the system builders.

Conventions match `operators`: time factor exp(-i omega t), Green's
function exp(+ikR)/(4 pi R), and currents carried as (-m, eta j).
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .basis import RwgSpace, SurfaceCurrent, build_rwg
from .exceptions import DipoleOutside, PointAtSource
from .mesh import TriangleMesh
from .operators import SurfaceSpaces
from .quadrature import gauss_rule

FOUR_PI = 4.0 * np.pi

#: CODATA vacuum permittivity and permeability.
VACUUM_EPSILON = 8.8541878128e-12
VACUUM_MU = 1.25663706212e-6


@dataclass(frozen=True)
class Medium:
    """Homogeneous lossless background material."""

    epsilon: float = VACUUM_EPSILON
    mu: float = VACUUM_MU

    def __post_init__(self):
        if not (self.epsilon > 0.0 and self.mu > 0.0):
            raise ValueError("material constants must be positive")

    @property
    def impedance(self):
        return np.sqrt(self.mu / self.epsilon)

    @property
    def wave_speed(self):
        return 1.0 / np.sqrt(self.mu * self.epsilon)


@dataclass(frozen=True)
class DipoleSpec:
    """Electric Hertzian dipole: position (m), moment I*l (A m), frequency (Hz)."""

    position: np.ndarray
    moment: np.ndarray
    frequency: float
    medium: Medium = field(default_factory=Medium)

    def __post_init__(self):
        object.__setattr__(
            self, "position", np.array(self.position, dtype=np.float64)
        )
        object.__setattr__(self, "moment", np.array(self.moment, dtype=np.complex128))
        if self.position.shape != (3,) or self.moment.shape != (3,):
            raise ValueError("position and moment must be 3-vectors")
        if not self.frequency > 0.0:
            raise ValueError(f"frequency must be positive, got {self.frequency}")

    @property
    def omega(self):
        return 2.0 * np.pi * self.frequency

    @property
    def k(self):
        return self.omega / self.medium.wave_speed

    @property
    def eta(self):
        return self.medium.impedance


def dipole_fields(spec, points):
    """E (V/m) and H (A/m) of the dipole at off-source points.

    With R the distance to the dipole, u the unit vector toward the field
    point, p the moment, and G = exp(ikR)/(4 pi R):

        H = (ik - 1/R) G (u x p)
        E = (i eta / (4 pi k)) e^{ikR} [ k^2/R (u x p) x u
                                         + (3 u (u.p) - p) (1/R^3 - ik/R^2) ]

    The far field tends to E -> ik eta G p_perp with H = u x E / eta.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    d = points - spec.position
    dist = np.linalg.norm(d, axis=1)
    limit = 1e-12 * max(1.0, float(np.linalg.norm(spec.position)))
    if np.any(dist < limit):
        raise PointAtSource("field requested at the dipole position")
    u = d / dist[:, None]

    k = spec.k
    eta = spec.eta
    phase = np.exp(1j * k * dist)
    green = phase / (FOUR_PI * dist)

    u_x_p = np.cross(u, spec.moment[None, :])
    h_out = (1j * k - 1.0 / dist)[:, None] * green[:, None] * u_x_p

    transverse = np.cross(u_x_p, u)
    radial = 3.0 * u * (u @ spec.moment)[:, None] - spec.moment[None, :]
    near = (1.0 / dist**3 - 1j * k / dist**2)[:, None]
    e_out = (1j * eta / (FOUR_PI * k)) * phase[:, None] * (
        (k**2 / dist)[:, None] * transverse + near * radial
    )
    return e_out, h_out


def _rwg_of(surface):
    if isinstance(surface, RwgSpace):
        return surface
    if isinstance(surface, SurfaceSpaces):
        return surface.rwg
    if isinstance(surface, TriangleMesh):
        return build_rwg(surface)
    raise TypeError(f"cannot obtain an edge space from {type(surface).__name__}")


def _slot_values(mesh, signs, order):
    """Per-triangle edge-function values at a gauss rule's points.

    Returns physical points (T, P, 3), weights (T, P), and the three slot
    value fields (T, P, 3, 3); slot i is the function of the edge opposite
    local vertex i, carrying the triangle's orientation sign.
    """
    rule = gauss_rule(order)
    pts = np.einsum("pi,tid->tpd", rule.points, mesh.tri_vertices)
    w = rule.weights[None, :] * mesh.areas[:, None]
    vals = (pts[:, :, None, :] - mesh.tri_vertices[:, None, :, :]) * (
        signs[:, None, :, None] / (2.0 * mesh.areas[:, None, None, None])
    )
    return pts, w, vals


def trace_currents(spec, surface, order=7):
    """Exterior Love traces of the dipole fitted onto the edge basis.

    Returns (magnetic, electric) SurfaceCurrents carrying -m = n x E+ and
    eta j = eta (n x H+), the pair that radiates the dipole's field outside
    the surface and nothing inside.  The fit solves the edge-basis Gram
    system against the pointwise rotated traces.
    """
    rwg = _rwg_of(surface)
    mesh = rwg.mesh
    if not mesh.contains_points(spec.position)[0]:
        raise DipoleOutside("the dipole must sit strictly inside the surface")

    pts, w, vals = _slot_values(mesh, rwg.tri_signs, order)
    e_fld, h_fld = dipole_fields(spec, pts.reshape(-1, 3))
    shape = (mesh.n_triangles, -1, 3)
    minus_m = np.cross(mesh.normals[:, None, :], e_fld.reshape(shape))
    eta_j = spec.eta * np.cross(mesh.normals[:, None, :], h_fld.reshape(shape))

    # mass matrix of the edge functions; their products are quadratic, so a
    # degree-2 rule integrates the entries exactly
    _, wg, vg = _slot_values(mesh, rwg.tri_signs, 2)
    local = np.einsum("tp,tpid,tpjd->tij", wg, vg, vg)
    gram = np.zeros((mesh.n_edges, mesh.n_edges))
    edges = mesh.tri_edges
    for i in range(3):
        for j in range(3):
            np.add.at(gram, (edges[:, i], edges[:, j]), local[:, i, j])

    coefs = []
    for trace in (minus_m, eta_j):
        rhs = np.zeros(mesh.n_edges, dtype=np.complex128)
        load = np.einsum("tp,tpid,tpd->ti", w, vals, trace)
        for i in range(3):
            np.add.at(rhs, edges[:, i], load[:, i])
        coefs.append(sla.solve(gram, rhs, assume_a="pos"))

    k = spec.k
    return (
        SurfaceCurrent(rwg, "magnetic", coefs[0], k),
        SurfaceCurrent(rwg, "electric", coefs[1], k),
    )


def rhs_vector(spec, spaces, family="bc", order=7):
    """Tested incident data <n x g_i, n x E+> on a measurement surface.

    `family` picks the test functions g_i: "bc" for the dual functions,
    "rwg" for the primal ones.  Both are tangential, so the rotated pairing
    reduces to the plain surface integral of g_i . E, evaluated on the
    refinement and contracted through the family's coefficient map.  The
    result is linear in the dipole moment to the last bit.
    """
    if not isinstance(spaces, SurfaceSpaces):
        raise TypeError("rhs_vector needs the SurfaceSpaces of the test surface")
    if not spaces.mesh.contains_points(spec.position)[0]:
        raise DipoleOutside(
            "the dipole must sit strictly inside the measurement surface"
        )

    fine = spaces.fine
    pts, w, vals = _slot_values(fine, spaces.micro.tri_signs, order)
    e_fld, _ = dipole_fields(spec, pts.reshape(-1, 3))
    e_fld = e_fld.reshape(fine.n_triangles, -1, 3)

    q = np.zeros(fine.n_edges, dtype=np.complex128)
    load = np.einsum("tp,tpid,tpd->ti", w, vals, e_fld)
    for i in range(3):
        np.add.at(q, fine.tri_edges[:, i], load[:, i])
    return spaces.coefficient_map(family).T @ q
