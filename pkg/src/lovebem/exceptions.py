"""Exception types shared across the package."""


class LovebemError(Exception):
    """Base class for all package-specific errors."""


class ParseError(LovebemError):
    """A mesh or config file could not be parsed."""


class TopologyError(LovebemError):
    """Mesh connectivity violates the closed-manifold genus-0 contract."""


class OrientationError(LovebemError):
    """Mesh triangle windings cannot be made globally consistent."""


class UnsupportedOrder(LovebemError):
    """Requested quadrature order is outside the supported set."""


class DimensionMismatch(LovebemError):
    """Operands with incompatible shapes or spaces were combined."""


class OutOfSupport(LovebemError):
    """A basis function was evaluated outside its supporting triangles."""


class PointTooClose(LovebemError):
    """A field evaluation point sits (numerically) on the source surface."""


class PointAtSource(LovebemError):
    """An analytic field was requested at the singular source location."""


class DipoleOutside(LovebemError):
    """A dipole violates the required surface nesting (inside Gamma)."""


class RankError(LovebemError):
    """A combinatorial matrix has unexpected rank or nullspace."""


class SingularMatrix(LovebemError):
    """A dense factorization hit an (effectively) singular matrix."""


class SingularInnerOperator(SingularMatrix):
    """The interior-operator inverse inside a composed system is singular."""


class ConvergenceFailure(LovebemError):
    """An iterative numerical procedure failed to reach its tolerance."""


class ConfigError(LovebemError):
    """Experiment configuration is missing, malformed, or inconsistent."""
