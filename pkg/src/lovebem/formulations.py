"""Reconstruction systems built from the kernel blocks.

Four inverse-source systems share the same assembled pieces: two
single-current compositions that eliminate the companion current through
an on-surface solve (one for the magnetic trace, one for the electric),
and their frequency-stabilized variants obtained by conjugating with the
loop-star wavenumber scalings.  Two naive systems (single current tested
directly, and the uncomposed two-current stack) serve as baselines.

Block naming: the suffix gives the trial family, so `k_bc` is the curl
kernel acting on dual-expanded coefficients; measurement-surface blocks
(tested on Gamma_m, trial on Gamma) end in `_m`.  Every composed system
keeps the right scaling it was built with, so mapping a solution vector
back to current coefficients cannot be forgotten.
"""

from dataclasses import dataclass

import numpy as np

from . import linalg, sources
from .exceptions import DimensionMismatch, SingularInnerOperator, SingularMatrix
from .helmholtz import build_projectors, build_scaling, build_sigma_lambda
from .mesh import TriangleMesh
from .operators import (
    AssemblyCache,
    OperatorDescriptor,
    SurfaceSpaces,
    assemble_K,
    assemble_Ts,
    assemble_Th,
    assemble_gram,
    combine_T,
)


@dataclass
class LinearSystem:
    """One assembled system `matrix @ u = rhs` with its unknown bookkeeping.

    `unknown` tags the solution vector: "-m" and "eta-j" are current
    coefficients directly, "x-scaled" and "y-scaled" are scaled unknowns
    whose current coefficients are `transform @ u`.  `current_kind` names
    the SurfaceCurrent kind of the recovered coefficients.
    """

    matrix: np.ndarray
    rhs: np.ndarray
    unknown: str
    k: float
    transform: np.ndarray | None = None

    def current_coefficients(self, solution):
        solution = np.asarray(solution)
        if self.transform is None:
            return solution
        return self.transform @ solution

    @property
    def current_kind(self):
        return "magnetic" if self.unknown in ("-m", "x-scaled") else "electric"

    def current(self, solution, space):
        from .basis import SurfaceCurrent

        return SurfaceCurrent(
            space, self.current_kind, self.current_coefficients(solution), self.k
        )


class OperatorSuite:
    """Lazily assembled kernel blocks for one source surface at one k.

    A measurement surface may be attached for the `_m` blocks.  Sibling
    blocks share kernel passes through one AssemblyCache, so requesting
    `t_rwg` after `t_bc` costs only the sparse sandwiches.
    """

    def __init__(self, gamma, gamma_m=None, k=None, config=None):
        if isinstance(gamma, TriangleMesh):
            gamma = SurfaceSpaces(gamma)
        if isinstance(gamma_m, TriangleMesh):
            gamma_m = SurfaceSpaces(gamma_m)
        if not (k is not None and k > 0.0):
            raise ValueError(f"wavenumber must be positive, got {k}")
        self.gamma = gamma
        self.gamma_m = gamma_m
        self.k = float(k)
        self.config = config
        self._cache = AssemblyCache()
        self._blocks = {}

    def _measurement(self):
        if self.gamma_m is None:
            raise DimensionMismatch("this suite was built without a measurement surface")
        return self.gamma_m

    def _desc(self, kernel, test, test_family, trial_family, k=None):
        return OperatorDescriptor(
            kernel, test, test_family, self.gamma, trial_family,
            self.k if k is None else k,
        )

    def _get(self, name, builder):
        if name not in self._blocks:
            self._blocks[name] = builder()
        return self._blocks[name]

    def _t_block(self, name, test, family):
        def build():
            ts = assemble_Ts(self._desc("Ts", test, family, family),
                             self.config, self._cache)
            th = assemble_Th(self._desc("Th", test, family, family),
                             self.config, self._cache)
            return combine_T(ts, th, self.k)

        return self._get(name, build)

    @property
    def gram(self):
        return self._get("gram", lambda: assemble_gram(
            self._desc("Gram", self.gamma, "rwg", "bc", 0.0)))

    @property
    def t_rwg(self):
        return self._t_block("t_rwg", self.gamma, "rwg")

    @property
    def t_bc(self):
        return self._t_block("t_bc", self.gamma, "bc")

    @property
    def k_bc(self):
        return self._get("k_bc", lambda: assemble_K(
            self._desc("K", self.gamma, "rwg", "bc"), self.config, self._cache))

    @property
    def k_rwg(self):
        return self._get("k_rwg", lambda: assemble_K(
            self._desc("K", self.gamma, "bc", "rwg"), self.config, self._cache))

    @property
    def t_rwg_m(self):
        return self._t_block("t_rwg_m", self._measurement(), "rwg")

    @property
    def t_bc_m(self):
        return self._t_block("t_bc_m", self._measurement(), "bc")

    @property
    def k_bc_m(self):
        return self._get("k_bc_m", lambda: assemble_K(
            self._desc("K", self._measurement(), "rwg", "bc"),
            self.config, self._cache))

    @property
    def k_rwg_m(self):
        return self._get("k_rwg_m", lambda: assemble_K(
            self._desc("K", self._measurement(), "bc", "rwg"),
            self.config, self._cache))

    @property
    def inner_bc(self):
        """Interior pairing acting on dual-expanded eta j (rotated-RWG rows)."""
        return 0.5 * self.gram + self.k_bc

    @property
    def inner_rwg(self):
        """Interior pairing acting on primal-expanded -m (rotated-BC rows)."""
        return -0.5 * self.gram.T + self.k_rwg

    def scaling(self, surface):
        """Loop-star wavenumber scaling pair for one of the two surfaces."""
        key = "scale_gamma" if surface is self.gamma else "scale_m"

        def build():
            sigma, lam = build_sigma_lambda(surface.mesh)
            return build_scaling(build_projectors(sigma, lam), self.k)

        return self._get(key, build)

    def interior_factor(self):
        """Factorization of `inner_bc`, shared by the magnetic builders."""
        return self._get("inner_lu", lambda: _inner_factor(
            self.inner_bc, "interior pairing (dual trial)"))

    def single_layer_factor(self):
        """Factorization of T_bc through its scaled form.

        The raw block's condition blows up like 1/k^2 toward low
        wavenumber, so the factorization always conjugates with the dual
        scaling first; `solve_t_bc` undoes the conjugation, giving
        T_bc^-1 @ rhs at any frequency the scaled block supports.
        """

        def build():
            scale = self.scaling(self.gamma).M_bc
            return _inner_factor(scale @ self.t_bc @ scale,
                                 "scaled single-layer block")

        return self._get("t_bc_lu", build)

    def solve_t_bc(self, rhs):
        scale = self.scaling(self.gamma).M_bc
        return scale @ self.single_layer_factor().solve(scale @ rhs)

    def excitation(self, spec, family):
        """Tested dipole data on the measurement surface (memoized)."""
        if not np.isclose(spec.k, self.k, rtol=1e-12):
            raise ValueError(
                f"excitation wavenumber {spec.k} does not match suite {self.k}")
        key = ("rhs", family, spec.position.tobytes(), spec.moment.tobytes())
        return self._get(
            key, lambda: sources.rhs_vector(spec, self._measurement(), family)
        )


def inner_operator_blocks(mesh, k, config=None):
    """The two on-surface interior pairings (for the cancellation sweep)."""
    suite = OperatorSuite(mesh, None, k, config)
    return suite.inner_bc, suite.inner_rwg


def _inner_factor(matrix, what):
    try:
        return linalg.LuFactor(matrix, what)
    except SingularMatrix as exc:
        raise SingularInnerOperator(str(exc)) from exc


def build_magnetic_system(suite, spec):
    """Single-current system for -m with the electric companion eliminated.

    The measurement rows are dual-tested; the companion solve uses the
    interior pairing on the source surface, factorized once.
    """
    inner = suite.interior_factor()
    matrix = -suite.k_rwg_m - suite.t_bc_m @ inner.solve(suite.t_rwg)
    return LinearSystem(matrix, suite.excitation(spec, "bc"), "-m", suite.k)


def build_electric_system(suite, spec):
    """Single-current system for eta j with the magnetic companion eliminated."""
    matrix = suite.t_rwg_m + suite.k_bc_m @ suite.solve_t_bc(suite.inner_rwg)
    return LinearSystem(matrix, suite.excitation(spec, "rwg"), "eta-j", suite.k)


def build_stabilized_magnetic(suite, spec):
    """Loop-star scaled variant of the magnetic system.

    Left rows are scaled with the measurement surface's dual scaling, the
    unknown with the source surface's primal one; the solution transform
    recovers -m.
    """
    left = suite.scaling(suite.gamma_m).M_bc
    right = suite.scaling(suite.gamma).M_rwg
    inner = suite.interior_factor()
    matrix = left @ (-suite.k_rwg_m - suite.t_bc_m @ inner.solve(suite.t_rwg)) @ right
    rhs = left @ suite.excitation(spec, "bc")
    return LinearSystem(matrix, rhs, "x-scaled", suite.k, transform=right)


def build_stabilized_electric(suite, spec):
    """Loop-star scaled variant of the electric system.

    The companion elimination goes through the scaled single-layer block
    M_bc T_bc M_bc, which stays bounded at low wavenumber where T_bc
    itself does not.
    """
    left = suite.scaling(suite.gamma_m).M_rwg
    right = suite.scaling(suite.gamma).M_rwg
    bridge = suite.solve_t_bc(suite.inner_rwg @ right)
    matrix = left @ (suite.t_rwg_m @ right + suite.k_bc_m @ bridge)
    rhs = left @ suite.excitation(spec, "rwg")
    return LinearSystem(matrix, rhs, "y-scaled", suite.k, transform=right)


def build_baseline_single(suite, spec):
    """Directly tested single-current system (no companion elimination)."""
    return LinearSystem(-suite.k_rwg_m, suite.excitation(spec, "bc"), "-m", suite.k)


def build_baseline_double(suite, spec):
    """Uncomposed two-current stack [-m; eta j] with shared dual testing."""
    matrix = np.hstack([-suite.k_rwg_m, suite.t_bc_m])
    return LinearSystem(matrix, suite.excitation(spec, "bc"), "-m,eta-j", suite.k)


def recover_companion(suite, current):
    """Solve the interior pairing for the other current of a Love pair.

    Given -m on the primal space returns eta j on the dual space, and vice
    versa; the output satisfies the interior field conditions against the
    input, so for Love inputs it approximates the true companion trace.
    """
    from .basis import SurfaceCurrent

    coefs = np.asarray(current.coefficients, dtype=np.complex128)
    if current.kind == "magnetic":
        inner = suite.interior_factor()
        out = inner.solve(-(suite.t_rwg @ coefs))
        return SurfaceCurrent(suite.gamma.bc, "electric", out, suite.k)
    out = -suite.solve_t_bc(suite.inner_rwg @ coefs)
    return SurfaceCurrent(suite.gamma.bc, "magnetic", out, suite.k)


def build_calderon(suite):
    """Exterior projector on stacked [-m (primal); eta j (dual)] coefficients.

    The lifted blocks express the rotated traces of the radiated field's
    interior limit, which are zero for Love pairs and minus the input for
    pairs radiating into the interior, so adding them to the identity
    keeps the first kind fixed and annihilates the second.  The defect of
    idempotency shrinks under mesh refinement.
    """
    n = suite.gamma.n_edges
    top = np.linalg.solve(-suite.gram.T,
                          np.hstack([-suite.inner_rwg, suite.t_bc]))
    bottom = np.linalg.solve(suite.gram,
                             np.hstack([-suite.t_rwg, -suite.inner_bc]))
    return np.eye(2 * n) + np.vstack([top, bottom])
