"""Geodesic-dither extremum seeking on Riemannian manifolds and matrix Lie groups."""

from .errors import (ChartExitError, ConfigError, DegenerateFitError, DomainError,
                     FrequencyError, GeoseekError, IntegrationDivergedError, NumericalError,
                     OracleContractError, UnsupportedOperationError)
from .manifold import (ManifoldDescriptor, TangentCoords, chart_manifold, christoffel, circle,
                       euclidean, exp_map, metric_eval, riemannian_distance,
                       validate_dither_amplitude)
from .lie import (GroupElement, GroupTag, check_group_membership, group_distance, group_exp,
                  project_to_group, rotation_angle, rz, se3_exp, so3_exp)
from .eslaw import (CostOracle, CountingOracle, DitherSpec, ESField, common_period,
                    dithered_point, es_field_eval, validate_frequencies)
from .fields import averaged_field, gradient_field
from .integrate import (IntegratorConfig, Method, Monitor, Trajectory, integrate,
                        integrate_averaged, integrate_gradient)
from .averaging import (ClosenessReport, ResidualReport, averaging_residual, closeness_report,
                        corrector_flow, lyapunov_monitor, residual_slope, taylor_remainder)
from . import costs

__version__ = "0.1.0"
