"""Inversion of controlled differential equations dY = f(Y) dX on piecewise-linear controls."""

from .errors import CDEError, DomainViolation, InfeasibleSpec, SingularDiffusion, SingularJacobian
from .fields import (
    VectorFieldModel,
    apply,
    coefficient_matrix,
    inverse_diffusion,
    make_cev,
    make_cir,
    make_constant,
    make_geometric,
    make_model,
    validate,
)
from .metrics import ErrorReport, path_error, slope_error, uniformity_ratio
from .newton import NewtonConfig
from .ode import FlowResult, IntegratorConfig, flow, flow_with_sensitivity, propagate
from .paths import (
    ObservationGrid,
    PiecewiseLinearPath,
    evaluate,
    from_slopes,
    generate_random_control,
    interpolate_observations,
    slopes,
    sup_distance,
)
from .signature import SignatureConfig
from .trace import IterationTrace

__version__ = "0.1.0"
