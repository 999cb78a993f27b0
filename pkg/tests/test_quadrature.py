import numpy as np
import pytest

import oracles
from lovebem import quadrature as quad
from lovebem.exceptions import UnsupportedOrder

RNG = np.random.default_rng(20240811)

UNIT_TRI = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


def test_rule_invariants():
    for order in quad.SUPPORTED_ORDERS:
        rule = quad.gauss_rule(order)
        assert np.all(rule.weights > 0)
        assert np.all(rule.points > 0) and np.all(rule.points < 1)
        assert np.abs(rule.points.sum(axis=1) - 1.0).max() < 1e-14
        assert abs(rule.weights.sum() - 1.0) < 1e-14


def test_rule_monomial_exactness():
    for order in quad.SUPPORTED_ORDERS:
        rule = quad.gauss_rule(order)
        x, y = rule.points[:, 1], rule.points[:, 2]
        for a in range(order + 1):
            for b in range(order + 1 - a):
                got = 0.5 * np.dot(rule.weights, x ** a * y ** b)
                exact = oracles.monomial_integral(a, b)
                assert abs(got - exact) < 1e-14, (order, a, b)


def test_order_one_is_centroid():
    rule = quad.gauss_rule(1)
    assert np.allclose(rule.points, [[1 / 3, 1 / 3, 1 / 3]])
    assert np.allclose(rule.weights, [1.0])


def test_order_two_quadratic():
    rule = quad.gauss_rule(2)
    x, y = rule.points[:, 1], rule.points[:, 2]
    got = 0.5 * np.dot(rule.weights, x ** 2 + y ** 2)
    exact = 2 * oracles.monomial_integral(2, 0)
    assert abs(got - exact) < 1e-15


def test_unsupported_order():
    for bad in (0, 8, -1):
        with pytest.raises(UnsupportedOrder):
            quad.gauss_rule(bad)


def _random_triangle():
    return RNG.normal(size=(3, 3))


def test_static_moments_against_quadrature():
    tri = np.array([[0.1, -0.2, 0.05], [0.9, 0.1, -0.1], [0.3, 0.8, 0.2]])
    normal = np.cross(tri[1] - tri[0], tri[2] - tri[0])
    normal /= np.linalg.norm(normal)
    centroid = tri.mean(axis=0)
    observers = np.array([
        centroid + 0.37 * normal,                       # above the interior
        centroid - 0.8 * normal,                        # below
        tri[0] + 2.0 * (tri[0] - centroid),             # in plane, outside
        tri[1] + 0.25 * normal + 0.3 * (tri[1] - tri[0]),
    ])
    mom = quad.static_triangle_moments(observers, tri)
    for i, r in enumerate(observers):
        d = (r - tri[0]) @ normal
        rho = r - d * normal

        def inv_r(p):
            return 1.0 / np.linalg.norm(p - r, axis=1)

        ref_i1 = oracles.adaptive_triangle_integral(tri, inv_r).real
        assert abs(mom["i1"][i] - ref_i1) < 1e-9 * abs(ref_i1)

        for comp in range(3):
            def mom1(p, comp=comp):
                return (p[:, comp] - rho[comp]) / np.linalg.norm(p - r, axis=1)

            def mom3(p, comp=comp):
                return (p[:, comp] - rho[comp]) / np.linalg.norm(p - r, axis=1) ** 3

            ref = oracles.adaptive_triangle_integral(tri, mom1).real
            assert abs(mom["irho"][i, comp] - ref) < 1e-9 * max(abs(ref), 1e-3)
            ref = oracles.adaptive_triangle_integral(tri, mom3).real
            assert abs(mom["krho"][i, comp] - ref) < 1e-8 * max(abs(ref), 1e-3)

        def inv_r3(p):
            return 1.0 / np.linalg.norm(p - r, axis=1) ** 3

        ref = d * oracles.adaptive_triangle_integral(tri, inv_r3).real
        assert abs(mom["d_i3"][i] - ref) < 1e-8 * max(abs(ref), 1e-6)


def test_coincident_static_matches_covariogram():
    got = quad.integrate_singular_pair(UNIT_TRI, UNIT_TRI, "green", 0.0)
    fine = oracles.self_static_integral(UNIT_TRI, n_theta=2048)
    coarse = oracles.self_static_integral(UNIT_TRI, n_theta=1024)
    assert abs(fine - coarse) < 1e-6 * fine  # oracle self-consistency
    ref = fine + (fine - coarse) / 3.0  # second-order Richardson step
    assert abs(got.scalar.real - ref) < 1e-6 * ref
    assert abs(got.scalar.imag) < 1e-14


def test_coincident_against_subdivision_oracle():
    # independent cross-check of the covariogram construction
    ref = oracles.self_static_integral(UNIT_TRI, n_theta=1024)
    sub = oracles.adaptive_pair_integral(UNIT_TRI, UNIT_TRI,
                                         oracles.green_kernel(0.0), max_depth=7)
    assert abs(sub.real - ref) < 2e-3 * ref


def test_touching_converges_under_oracle_refinement():
    k = 5.0
    src = UNIT_TRI
    tst = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.9, 0.9, 0.7]])
    got = quad.integrate_singular_pair(src, tst, "green", k)
    errs = []
    for depth in (2, 4, 6):
        ref = oracles.adaptive_pair_integral(tst, src, oracles.green_kernel(k),
                                             max_depth=depth)
        errs.append(abs(got.scalar - ref))
    assert errs[2] < errs[1] < errs[0]
    assert errs[2] < 5e-4 * abs(got.scalar)


def test_branch_continuity_on_shrinking_gaps():
    k = 3.0
    src = UNIT_TRI
    prev = np.inf
    base = quad.integrate_singular_pair(
        src, np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.4]]),
        "green", k)
    for gap in (1e-3, 1e-5, 1e-7):
        tst = np.array([[1.0, 0.0, gap], [0.0, 1.0, gap], [1.0, 1.0, 0.4 + gap]])
        val = quad.integrate_singular_pair(src, tst, "green", k)
        jump = abs(val.scalar - base.scalar)
        assert jump < prev
        prev = jump
    assert prev < 1e-4 * abs(base.scalar)


def _block_errors(src, tst, k, oracle_n=10):
    got = quad.integrate_singular_pair(src, tst, "green", k)
    gotk = quad.integrate_singular_pair(src, tst, "grad_green", k)
    refs = np.zeros((3, 3), complex)
    refk = np.zeros((3, 3), complex)
    for a in range(3):
        for b in range(3):
            refs[a, b] = oracles.adaptive_pair_integral(
                tst, src, oracles.green_dot_entry(k, tst[a], src[b]), n=oracle_n)
            refk[a, b] = oracles.adaptive_pair_integral(
                tst, src, oracles.grad_green_entry(k, tst[a], src[b]), n=oracle_n)
    err_g = np.abs(got.entries - refs).max() / np.abs(refs).max()
    err_k = np.abs(gotk - refk).max() / np.abs(refk).max()
    ref_scalar = oracles.adaptive_pair_integral(tst, src,
                                                oracles.green_kernel(k), n=oracle_n)
    err_s = abs(got.scalar - ref_scalar) / abs(ref_scalar)
    return err_s, err_g, err_k


def test_far_pair_against_oracle():
    # ratio ~ 8 diameters: the plain default-order branch
    k = 0.1
    tst = UNIT_TRI + np.array([6.6, 6.6, 6.6])
    err_s, err_g, err_k = _block_errors(UNIT_TRI, tst, k)
    assert err_s < 1e-9
    assert err_g < 5e-8
    assert err_k < 5e-8


def test_moderate_disjoint_pair_against_oracle():
    # ratio ~ 2.5 diameters: the escalated-order branch, worst disjoint case
    k = 1.0
    tst = UNIT_TRI + np.array([2.5, 1.5, 2.0])
    err_s, err_g, err_k = _block_errors(UNIT_TRI, tst, k)
    assert err_s < 1e-7
    assert err_g < 1e-6
    assert err_k < 1e-6


def test_near_pair_against_oracle():
    # small gap, disjoint: the extraction path with adaptive outer rule
    k = 0.7
    src = UNIT_TRI
    tst = np.array([[1.05, 0.0, 0.1], [0.05, 1.0, 0.1], [1.05, 1.0, 0.5]])
    got = quad.integrate_singular_pair(src, tst, "green", k)
    ref = oracles.adaptive_pair_integral(tst, src, oracles.green_kernel(k),
                                         max_depth=10, n=10)
    assert abs(got.scalar - ref) < 1e-6 * abs(ref)
    fn = oracles.green_dot_entry(k, tst[0], src[1])
    ref = oracles.adaptive_pair_integral(tst, src, fn, max_depth=10, n=10)
    assert abs(got.entries[0, 1] - ref) < 1e-6 * abs(ref)


def test_grad_kernel_vertex_pair_sign():
    k = 2.0
    src = UNIT_TRI
    tst = np.array([[1.0, 0.0, 0.0], [2.0, 0.5, 0.2], [1.5, -0.5, 0.6]])
    got = quad.integrate_singular_pair(src, tst, "grad_green", k)
    for a, b in ((0, 0), (1, 2), (2, 1)):
        fn = oracles.grad_green_entry(k, tst[a], src[b])
        ref = oracles.adaptive_pair_integral(tst, src, fn, max_depth=8)
        assert abs(got[a, b] - ref) < 2e-3 * max(abs(ref), 1e-4)


def test_grad_kernel_coplanar_is_zero():
    shifted = UNIT_TRI + np.array([2.0, 0.5, 0.0])
    got = quad.integrate_singular_pair(UNIT_TRI, shifted, "grad_green", 4.0)
    assert np.all(got == 0)
    touching = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.5, 1.5, 0.0]])
    got = quad.integrate_singular_pair(UNIT_TRI, touching, "grad_green", 4.0)
    assert np.all(got == 0)


def test_smooth_kernel_limits():
    k = 7.0
    r_small = np.array([1e-14, 1e-10, 1e-8])
    vals = quad.green_smooth(r_small, k)
    assert np.max(np.abs(vals - 1j * k / (4 * np.pi))) < 1e-8 * k
    assert quad.green_smooth(np.array([0.0]), k)[0] == 1j * k / (4 * np.pi)
    # series/direct switch at kR = 1 is seamless
    below = quad.grad_green_smooth_factor(np.array([0.999 / k]), k)[0]
    above = quad.grad_green_smooth_factor(np.array([1.001 / k]), k)[0]
    assert abs(below - above) < 1e-2 * abs(below)
    assert quad.grad_green_smooth_factor(np.array([0.0]), k)[0] == pytest.approx(
        -1j * k ** 3 / (12 * np.pi))


def test_shared_vertex_count():
    assert quad.count_shared_vertices(UNIT_TRI, UNIT_TRI) == 3
    other = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 1.0]])
    assert quad.count_shared_vertices(UNIT_TRI, other) == 2
    far = UNIT_TRI + 5.0
    assert quad.count_shared_vertices(UNIT_TRI, far) == 0
