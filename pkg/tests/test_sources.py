"""Tests for the analytic dipole: fields, fitted traces, tested data."""

import numpy as np
import pytest

import oracles
from lovebem import sources
from lovebem.exceptions import DipoleOutside, PointAtSource
from lovebem.mesh import generate_sphere
from lovebem.operators import SurfaceSpaces, radiate

LIGHT_SPEED = 2.99792458e8


def _default_spec(frequency=5e9):
    return sources.DipoleSpec([0.008, 0.0, 0.0], [0.0, 0.0, 1.0], frequency)


def _directions(n, seed=3):
    rng = np.random.default_rng(seed)
    d = rng.standard_normal((n, 3))
    return d / np.linalg.norm(d, axis=1)[:, None]


@pytest.fixture(scope="module")
def gamma_spaces():
    """Source surface bundle shared by the trace tests."""
    return SurfaceSpaces(generate_sphere(0.04, 2))


def test_vacuum_medium_constants():
    med = sources.Medium()
    assert abs(med.wave_speed - LIGHT_SPEED) < 1e-3
    assert abs(med.impedance - 376.730313668) < 1e-6


def test_spec_validation():
    with pytest.raises(ValueError):
        sources.DipoleSpec([0, 0, 0], [0, 0, 1], 0.0)
    with pytest.raises(ValueError):
        sources.DipoleSpec([0, 0], [0, 0, 1], 1e9)
    with pytest.raises(ValueError):
        sources.Medium(epsilon=-1.0)


def test_derived_wavenumber():
    spec = _default_spec()
    assert abs(spec.k - 2.0 * np.pi * 5e9 / LIGHT_SPEED) < 1e-9 * spec.k


def test_point_at_source_rejected():
    spec = _default_spec()
    with pytest.raises(PointAtSource):
        sources.dipole_fields(spec, spec.position)


def test_far_field_is_plane_wave_like():
    spec = _default_spec()
    dirs = _directions(6)
    pts = spec.position + (100.0 / spec.k) * dirs
    e_fld, h_fld = sources.dipole_fields(spec, pts)
    ratio = np.linalg.norm(e_fld, axis=1) / (spec.eta * np.linalg.norm(h_fld, axis=1))
    assert np.abs(ratio - 1.0).max() < 1e-3
    # h = u x e / eta up to the same curvature correction
    rot = np.cross(dirs, e_fld) / spec.eta
    assert oracles.relerr(h_fld, rot) < 1e-2


def test_far_field_transverse():
    spec = _default_spec()
    dirs = _directions(6)
    pts = spec.position + (1e4 / spec.k) * dirs
    e_fld, _ = sources.dipole_fields(spec, pts)
    radial = np.abs(np.einsum("pd,pd->p", e_fld, dirs))
    assert (radial / np.linalg.norm(e_fld, axis=1)).max() < 1e-3


def test_fields_satisfy_maxwell():
    spec = _default_spec()
    point = np.array([0.05, 0.02, -0.03])
    h = 1e-6 * np.linalg.norm(point - spec.position)
    curl_e = oracles.fd_curl(
        lambda x: sources.dipole_fields(spec, x)[0][0], point, h
    )
    curl_h = oracles.fd_curl(
        lambda x: sources.dipole_fields(spec, x)[1][0], point, h
    )
    e_fld, h_fld = sources.dipole_fields(spec, point)
    omega, med = spec.omega, spec.medium
    assert oracles.relerr(curl_e, 1j * omega * med.mu * h_fld[0]) < 1e-4
    assert oracles.relerr(curl_h, -1j * omega * med.epsilon * e_fld[0]) < 1e-4


def test_radiated_power_decay():
    spec = _default_spec()
    u = _directions(1)[0]
    r = 50.0 / spec.k
    near = np.linalg.norm(sources.dipole_fields(spec, spec.position + r * u)[0])
    far = np.linalg.norm(sources.dipole_fields(spec, spec.position + 2 * r * u)[0])
    assert abs(far * 2 * r / (near * r) - 1.0) < 1e-2


def test_trace_fit_matches_pointwise_rotation(gamma_spaces):
    spec = _default_spec()
    mesh = gamma_spaces.mesh
    mag, ele = sources.trace_currents(spec, gamma_spaces)

    e_fld, h_fld = sources.dipole_fields(spec, mesh.centroids)
    want_m = np.cross(mesh.normals, e_fld)
    want_j = spec.eta * np.cross(mesh.normals, h_fld)

    rwg = gamma_spaces.rwg
    d = mesh.centroids[:, None, :] - mesh.tri_vertices
    for cur, want in ((mag, want_m), (ele, want_j)):
        slot = cur.coefficients[mesh.tri_edges] * rwg.tri_signs
        got = np.einsum("ti,tid->td", slot, d) / (2.0 * mesh.areas[:, None])
        assert oracles.relerr(got, want) < 0.05


def test_traces_radiate_the_dipole_field(gamma_spaces):
    # equivalence check: the fitted traces reproduce the exterior field and
    # leave the interior dark, measured at points mirrored across the
    # surface by one mesh step
    spec = _default_spec()
    mag, ele = sources.trace_currents(spec, gamma_spaces)
    dirs = _directions(64)

    far = 0.2 * dirs
    e_far, h_far = radiate(gamma_spaces, mag, ele, far)
    e_ref, h_ref = sources.dipole_fields(spec, far)
    assert oracles.relerr(e_far, e_ref) < 0.01
    assert oracles.relerr(h_far, spec.eta * h_ref) < 0.01

    e_out, _ = radiate(gamma_spaces, mag, ele, 0.05 * dirs)
    e_in, _ = radiate(gamma_spaces, mag, ele, 0.03 * dirs)
    outside = np.linalg.norm(e_out, axis=1).mean()
    inside = np.linalg.norm(e_in, axis=1).mean()
    assert inside < 1e-2 * outside


def test_trace_zero_moment_gives_zero(gamma_spaces):
    spec = sources.DipoleSpec([0.008, 0, 0], [0, 0, 0], 5e9)
    mag, ele = sources.trace_currents(spec, gamma_spaces)
    assert not mag.coefficients.any()
    assert not ele.coefficients.any()


def test_trace_rejects_outside_dipole(gamma_spaces):
    spec = sources.DipoleSpec([0.1, 0, 0], [0, 0, 1], 5e9)
    with pytest.raises(DipoleOutside):
        sources.trace_currents(spec, gamma_spaces)


def test_trace_accepts_mesh_or_space(gamma_spaces):
    spec = _default_spec()
    via_spaces = sources.trace_currents(spec, gamma_spaces)[0]
    via_mesh = sources.trace_currents(spec, gamma_spaces.mesh)[0]
    assert np.array_equal(via_spaces.coefficients, via_mesh.coefficients)


@pytest.fixture(scope="module")
def measure_spaces():
    """Measurement surface bundle for the tested-data checks."""
    return SurfaceSpaces(generate_sphere(0.09996, 2))


def test_rhs_length_per_family(measure_spaces):
    spec = _default_spec()
    for family in ("bc", "rwg"):
        vec = sources.rhs_vector(spec, measure_spaces, family)
        assert vec.shape == (measure_spaces.n_edges,)
        assert np.iscomplexobj(vec)


def test_rhs_linear_in_moment_to_the_bit(measure_spaces):
    one = _default_spec()
    two = sources.DipoleSpec(one.position, 2.0 * one.moment, one.frequency)
    for family in ("bc", "rwg"):
        e1 = sources.rhs_vector(one, measure_spaces, family)
        e2 = sources.rhs_vector(two, measure_spaces, family)
        assert np.array_equal(e2, 2.0 * e1)


def _entry_oracle(spec, spaces, family, index):
    """One tested-data entry by adaptive integration over the micro halves."""
    cmap = spaces.coefficient_map(family)
    col = np.asarray(cmap[:, [index]].todense()).ravel()
    micro = spaces.micro
    fine = spaces.fine
    total = 0.0 + 0.0j
    for a in np.nonzero(col)[0]:
        halves = (
            (micro.plus_tri[a], micro.plus_free_vertex[a], 1.0),
            (micro.minus_tri[a], micro.minus_free_vertex[a], -1.0),
        )
        for tri, free, sign in halves:
            verts = fine.tri_vertices[tri]
            scale = col[a] * sign / (2.0 * fine.areas[tri])

            def fn(pts):
                e_fld, _ = sources.dipole_fields(spec, pts)
                return scale * np.einsum(
                    "pd,pd->p", pts - fine.vertices[free], e_fld
                )

            total += oracles.adaptive_triangle_integral(verts, fn)
    return total


def test_rhs_entry_against_adaptive_quadrature(measure_spaces):
    spec = _default_spec()
    for family, index in (("bc", 17), ("rwg", 301)):
        vec = sources.rhs_vector(spec, measure_spaces, family)
        want = _entry_oracle(spec, measure_spaces, family, index)
        assert abs(vec[index] - want) < 1e-8 * np.abs(vec).max()


def test_rhs_rejects_outside_dipole(measure_spaces):
    spec = sources.DipoleSpec([0.5, 0, 0], [0, 0, 1], 5e9)
    with pytest.raises(DipoleOutside):
        sources.rhs_vector(spec, measure_spaces, "bc")


def test_rhs_needs_surface_bundle(measure_spaces):
    with pytest.raises(TypeError):
        sources.rhs_vector(_default_spec(), measure_spaces.mesh, "bc")
