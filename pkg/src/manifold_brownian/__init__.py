"""Brownian motion on Riemannian manifolds.

Chart, embedded and Lie-group backends, Euler-Maruyama / Heun / group
exponential integrators, and Monte-Carlo checks that the simulated generator
is one half of the Laplace-Beltrami operator.
"""

from .catalog import CATALOG, ManifoldDescriptor, Observable, catalog_entries, make_manifold
from .errors import (ConfigError, ConstraintViolation, DegenerateMetricError, DomainError, EnsembleError,
                     GeometryError, NotASubalgebraError, SingularityError)
from .kernels import BACKEND as KERNEL_BACKEND
from .lie import LieAlgebraBasis, canonical_drift, structure_constants
from .montecarlo import (VerificationReport, generator_check, generator_estimate, half_laplacian,
                         hyperbolic_log_drift, ito_strat_agreement, so3_mean_decay, sphere_eigen_decay,
                         torus_stationary_test)
from .sde import (IntegratorConfig, SdeProblem, brownian_problem, ensemble_statistics, ito_strat_convert,
                  simulate_ensemble, simulate_path)

__version__ = "0.1.0"
