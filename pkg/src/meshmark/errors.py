"""Exception types shared across the library.

The hierarchy mirrors how failures are reported by the command line
front end: topology problems (exit code 2) derive from
:class:`TopologyError`, numerical failures (exit code 3) derive from
:class:`NumericalError`, everything else is an input/validation error
(exit code 1).
"""


class MeshmarkError(Exception):
    """Base class for all library-specific errors."""


class ParseError(MeshmarkError):
    """A mesh file is malformed or in an unsupported dialect."""


class TopologyError(MeshmarkError):
    """Mesh connectivity violates the supported surface model."""


class DegenerateTriangleError(TopologyError):
    """A triangle has numerically zero area."""


class DisconnectedMeshError(TopologyError):
    """The operation requires a connected mesh."""


class NotDiskTypeError(TopologyError):
    """The operation requires a disk-type surface (genus 0, one boundary loop)."""


class NumericalError(MeshmarkError):
    """A numerical procedure failed or exhausted its precision."""


class BandwidthError(MeshmarkError, ValueError):
    """Kernel bandwidth must be a positive number."""


class DimensionMismatchError(MeshmarkError, ValueError):
    """Array arguments do not share the expected shape."""


class AllZeroCurvatureError(NumericalError):
    """Both curvature fields vanish identically; the weight function is undefined."""


class ZeroRowSumError(NumericalError):
    """A kernel row sums to zero; the normalized operator is undefined."""


class ConvergenceError(NumericalError):
    """An iterative solver failed to converge."""


class RankExhaustionError(NumericalError):
    """The kernel's numerical rank was exhausted before enough landmarks were found."""


class SingularSubmatrixError(NumericalError):
    """The landmark submatrix is singular to working precision."""


class ComplexityGuardError(MeshmarkError, ValueError):
    """An exhaustive search would exceed the configured complexity budget."""


class FlipRecoveryError(NumericalError):
    """No flip-free planar embedding could be produced."""


class NoConsensusError(NumericalError):
    """Too few geometrically consistent matches to fit a planar transform."""


class ConstraintInfeasibleError(NumericalError):
    """Interpolation constraints force a triangle flip that cannot be resolved."""


class DegenerateConfigurationError(NumericalError):
    """Point configuration too degenerate for a well-posed rigid alignment."""


class ConstantMatrixError(MeshmarkError, ValueError):
    """A distance matrix has zero variance off the diagonal."""


class SingleGroupError(MeshmarkError, ValueError):
    """Group comparison requires at least two groups."""


class EmptyGroupError(MeshmarkError, ValueError):
    """A declared group has no members."""
