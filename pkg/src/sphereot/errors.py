"""Exception types shared across the package."""


class SphereOTError(Exception):
    """Base class for all package errors."""


class ValidationError(SphereOTError, ValueError):
    """Bad user input (configs, node files, arguments)."""


class UnsupportedScheme(ValidationError):
    pass


class NodeSetMismatch(ValidationError):
    pass


class AnalysisError(SphereOTError):
    """A geometric or analytic computation could not be carried out."""


class CutLocusError(AnalysisError, ValueError):
    """Two points are (numerically) antipodal, so log / transport is undefined."""


class DegenerateNeighborhood(AnalysisError):
    pass


class NonPositiveMetric(AnalysisError, ValueError):
    pass


class NonPositiveDensity(AnalysisError, ValueError):
    pass


class InvalidDensityBounds(AnalysisError, ValueError):
    pass


class SolverError(SphereOTError):
    pass


class NoConvergence(SolverError):
    def __init__(self, iterations, residual):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"Sinkhorn did not converge after {iterations} iterations "
                         f"(marginal error {residual:.3e})")


class SizeLimit(SolverError, ValueError):
    pass


class Infeasible(SolverError, ValueError):
    pass
