"""Tests for the dense solve and truncation helpers."""

import numpy as np
import pytest

from lovebem import linalg
from lovebem.exceptions import SingularMatrix


def _random_complex(rng, rows, cols):
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def test_svd_identity():
    dec = linalg.svd(np.eye(5))
    assert np.allclose(dec.s, 1.0)


def test_svd_diagonal_values_descend():
    dec = linalg.svd(np.diag([1.0, 3.0, 2.0]))
    assert np.array_equal(dec.s, [3.0, 2.0, 1.0])


def test_svd_reconstructs():
    rng = np.random.default_rng(11)
    mat = _random_complex(rng, 9, 6)
    dec = linalg.svd(mat)
    back = (dec.u * dec.s) @ dec.vh
    assert np.abs(back - mat).max() < 1e-12 * dec.s[0]


def test_svd_values_match_gram_eigenvalues():
    rng = np.random.default_rng(12)
    mat = _random_complex(rng, 8, 5)
    dec = linalg.svd(mat)
    eig = np.sort(np.linalg.eigvalsh(mat.conj().T @ mat))[::-1]
    assert np.abs(dec.s**2 - eig).max() < 1e-10 * dec.s[0] ** 2


def test_tsvd_rank_one_drops_tiny_mode():
    mat = np.diag([1.0, 1e-16])
    x, kept = linalg.tsvd_solve(mat, np.array([1.0, 1.0]), rank=1)
    assert kept == 1
    assert np.allclose(x, [1.0, 0.0])


def test_tsvd_full_rank_matches_direct_solve():
    rng = np.random.default_rng(13)
    mat = _random_complex(rng, 6, 6)
    rhs = _random_complex(rng, 6, 1).ravel()
    x, kept = linalg.tsvd_solve(mat, rhs, rel_tol=0.0)
    assert kept == 6
    direct = np.linalg.solve(mat, rhs)
    assert np.abs(x - direct).max() < 1e-10 * np.abs(direct).max()


def test_tsvd_rank_clamps_and_zero_matrix_gives_zero():
    mat = np.diag([2.0, 1.0])
    x, kept = linalg.tsvd_solve(mat, np.array([2.0, 1.0]), rank=7)
    assert kept == 2
    assert np.allclose(x, 1.0)
    x0, kept0 = linalg.tsvd_solve(np.zeros((3, 3)), np.ones(3))
    assert kept0 == 0
    assert np.array_equal(x0, np.zeros(3))


def test_tsvd_minimum_norm_on_wide_system():
    # one equation, two unknowns: the pseudoinverse picks the shortest x
    mat = np.array([[1.0, 1.0]])
    x, kept = linalg.tsvd_solve(mat, np.array([2.0]))
    assert kept == 1
    assert np.allclose(x, [1.0, 1.0])


def test_truncated_condition_identity():
    res = linalg.truncated_condition(np.eye(4), 4)
    assert res.value == 1.0
    assert not res.clamped


def test_truncated_condition_skips_trailing_value():
    res = linalg.truncated_condition(np.diag([10.0, 5.0, 1.0, 1e-12]), 3)
    assert np.isclose(res.value, 10.0)
    assert res.used == 3


def test_truncated_condition_clamps_request():
    res = linalg.truncated_condition(np.diag([4.0, 2.0]), 800)
    assert res.clamped
    assert res.used == 2
    assert np.isclose(res.value, 2.0)


def test_truncated_condition_grows_with_count():
    rng = np.random.default_rng(14)
    mat = _random_complex(rng, 10, 10)
    vals = [linalg.truncated_condition(mat, n).value for n in range(2, 11)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_truncated_condition_rejects_degenerate_count():
    with pytest.raises(ValueError):
        linalg.truncated_condition(np.eye(3), 1)


def test_lu_solve_residual():
    rng = np.random.default_rng(15)
    mat = _random_complex(rng, 50, 50)
    rhs = _random_complex(rng, 50, 2)
    x = linalg.lu_solve(mat, rhs)
    assert np.abs(mat @ x - rhs).max() < 1e-12 * np.abs(mat).max()


def test_lu_factor_reports_condition():
    fac = linalg.LuFactor(np.diag([1.0, 0.5]))
    assert 0.0 < fac.rcond <= 1.0


def test_lu_solve_rejects_rank_deficient():
    ones = np.ones((3, 3))
    with pytest.raises(SingularMatrix):
        linalg.lu_solve(ones, np.ones(3))


def test_lu_solve_rejects_nonsquare():
    with pytest.raises(ValueError):
        linalg.lu_solve(np.ones((3, 2)), np.ones(3))


def test_determinism():
    rng = np.random.default_rng(16)
    mat = _random_complex(rng, 12, 12)
    rhs = _random_complex(rng, 12, 1).ravel()
    a = linalg.tsvd_solve(mat, rhs)[0]
    b = linalg.tsvd_solve(mat.copy(), rhs.copy())[0]
    assert np.array_equal(a, b)
