"""Exception hierarchy shared by the geometry, simulation and CLI layers."""


class GeometryError(Exception):
    """Base class for failures of a geometric evaluation."""


class DomainError(GeometryError):
    """A point lies outside the declared validity region of a chart or manifold."""


class SingularityError(DomainError):
    """A chart coordinate singularity was reached (e.g. a pole of spherical coordinates)."""


class DegenerateMetricError(GeometryError):
    """The metric tensor is singular or not positive definite."""


class NotASubalgebraError(GeometryError):
    """A set of matrices is not closed under the Lie bracket."""


class ConstraintViolation(GeometryError):
    """A simulated state left the manifold by more than the allowed residual."""


class ConfigError(ValueError):
    """Invalid run or integrator configuration."""


class EnsembleError(RuntimeError):
    """One or more sample paths failed.

    ``failures`` maps path index to the error message; ``partial`` holds whatever
    result was assembled from the surviving paths.
    """

    def __init__(self, failures, partial=None):
        self.failures = dict(sorted(failures.items()))
        self.partial = partial
        head = ", ".join(f"{k}: {v}" for k, v in list(self.failures.items())[:5])
        more = "" if len(self.failures) <= 5 else f" (+{len(self.failures) - 5} more)"
        super().__init__(f"{len(self.failures)} path(s) failed: {head}{more}")
