"""Dense complex linear algebra used by the system builders and experiments.

Everything here wraps LAPACK through scipy with the package's error types
and truncation conventions on top; matrices stay dense, which is fine at
the mesh sizes this library targets.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .exceptions import ConvergenceFailure, SingularMatrix

#: Relative singular-value cutoff used when a solve does not pin its own.
DEFAULT_SOLVE_TOL = 1e-8

#: Condition estimate beyond which a factorization is treated as singular.
CONDITION_LIMIT = 1e14


@dataclass(frozen=True)
class SvdResult:
    """Full decomposition A = U diag(s) Vh with s sorted descending."""

    u: np.ndarray
    s: np.ndarray
    vh: np.ndarray


def svd(mat):
    """Full SVD of a dense complex matrix as an SvdResult."""
    mat = np.asarray(mat)
    try:
        u, s, vh = sla.svd(mat, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        # gesdd occasionally fails to converge where the slower gesvd works
        try:
            u, s, vh = sla.svd(mat, full_matrices=False, lapack_driver="gesvd")
        except np.linalg.LinAlgError:
            raise ConvergenceFailure(f"SVD did not converge: {exc}") from exc
    return SvdResult(u, s, vh)


def _retained(s, rank, rel_tol):
    if s.size == 0 or s[0] == 0.0:
        return 0
    kept = int(np.count_nonzero(s > rel_tol * s[0]))
    if rank is not None:
        kept = min(kept, int(rank))
    return kept


def tsvd_solve(mat, rhs, rank=None, rel_tol=DEFAULT_SOLVE_TOL):
    """Minimum-norm least-squares solution through a truncated SVD.

    Modes with singular value at or below rel_tol * s_max are dropped; a
    rank cap, when given, is applied on top and clamped to the available
    rank.  Returns (solution, retained mode count).
    """
    dec = svd(mat)
    kept = _retained(dec.s, rank, rel_tol)
    if kept == 0:
        return np.zeros(mat.shape[1], dtype=np.complex128), 0
    coef = (dec.u[:, :kept].conj().T @ rhs) / dec.s[:kept]
    return dec.vh[:kept].conj().T @ coef, kept


@dataclass(frozen=True)
class TruncatedCondition:
    """Condition number of a rank-truncated matrix.

    `clamped` records that fewer singular values were available than the
    requested count, which the experiment outputs must flag.
    """

    value: float
    requested: int
    used: int

    @property
    def clamped(self):
        return self.used < self.requested


def truncated_condition(mat, count):
    """Ratio of the largest singular value to the count-th one."""
    if count < 2:
        raise ValueError(f"need at least two retained values, got {count}")
    s = sla.svdvals(np.asarray(mat))
    used = min(int(count), int(np.count_nonzero(s > 0.0)))
    if used == 0:
        raise SingularMatrix("matrix has no nonzero singular values")
    return TruncatedCondition(float(s[0] / s[used - 1]), int(count), used)


class LuFactor:
    """LU factorization bundled with its reciprocal condition estimate."""

    def __init__(self, mat, what="matrix"):
        mat = np.ascontiguousarray(mat, dtype=np.complex128)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"{what} must be square, got {mat.shape}")
        anorm = np.abs(mat).sum(axis=0).max()
        with warnings.catch_warnings():
            # an exact zero pivot is reported through SingularMatrix below
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            self.lu, self.piv = sla.lu_factor(mat)
        rcond, info = sla.lapack.zgecon(self.lu, anorm)
        if info != 0 or not np.isfinite(rcond):
            raise SingularMatrix(f"condition estimation failed for {what}")
        self.rcond = float(rcond)
        self.what = what
        if rcond == 0.0 or 1.0 / rcond > CONDITION_LIMIT:
            raise SingularMatrix(
                f"{what} is numerically singular "
                f"(condition estimate {1.0 / max(rcond, 1e-300):.3e})"
            )

    def solve(self, rhs):
        return sla.lu_solve((self.lu, self.piv), rhs)


def lu_solve(mat, rhs, what="matrix"):
    """Direct solve of a square system with a conditioning guard."""
    return LuFactor(mat, what).solve(rhs)
