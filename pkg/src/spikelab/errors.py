"""Exception types shared across the package."""


class SpikelabError(Exception):
    """Base class for all package errors."""


class InvalidDomain(SpikelabError):
    """Domain description is inconsistent (e.g. self-intersecting polygon)."""


class MeshTooFine(SpikelabError):
    """Requested resolution would exceed the configured vertex cap."""


class CenterOutsideDomain(SpikelabError):
    """Refinement center does not lie inside the domain."""


class DegenerateTriangle(SpikelabError):
    """Triangle area collapsed below the assembly tolerance."""


class NegativeWeight(SpikelabError):
    """Weight field passed to the mass assembler has negative entries."""


class Overflow(SpikelabError):
    """A nonlinear term evaluated to a non-finite value."""


class SolveFailure(SpikelabError):
    """Sparse factorization or triangular solve broke down."""


class NewtonDiverged(SpikelabError):
    """Residual kept increasing after maximal damping."""


class PositivityLost(SpikelabError):
    """Newton iterate (or its limit) is not strictly positive inside."""


class MaxIterations(SpikelabError):
    """Iteration budget exhausted before reaching tolerance."""


class BallEscapesDomain(SpikelabError):
    """Requested rescaling ball is not contained in the domain."""


class EigenFailure(SpikelabError):
    """Eigenvalue iteration stagnated or returned garbage."""


class WeightDegenerate(SpikelabError):
    """Spectral weight underflowed to zero on almost all of the domain."""


class PointTooCloseToBoundary(SpikelabError):
    """Source point violates the distance-to-boundary precondition."""


class MultipleCriticalPoints(SpikelabError):
    """Distinct critical-point limits found on a declared-convex domain."""


class OutsideDisk(SpikelabError):
    """Point lies outside the unit disk."""


class ShootingFailed(SpikelabError):
    """No sign change of the shooting residual in the admissible bracket."""


class RankDeficient(SpikelabError):
    """Least-squares basis is rank deficient on the sample grid."""


class InsufficientData(SpikelabError):
    """Not enough data points for the requested fit."""


class AnnulusEscapesDomain(SpikelabError):
    """Far-field annulus is not contained in the domain."""


class ConfigError(SpikelabError):
    """Malformed run configuration."""
