"""Lattice solvers and regularity diagnostics for uniformly elliptic dynamic programming principles."""

from .exceptions import (
    ConfigError,
    DPPError,
    EmptyDomain,
    MaxIterExceeded,
    NonConformingStep,
    NonFiniteValue,
    NotAdmissible,
    OutOfHull,
    RegionTooSmall,
    UnsupportedVariant,
)
from .lattice import (
    Ball,
    BallStencil,
    Box,
    Disk,
    EllipticityParams,
    Interval,
    LatticeRegion,
    Rectangle,
    ScalarField,
    ball_average_stencil,
    build_region,
)
from .operators import (
    DirectionSet,
    OperatorSpec,
    Variant,
    apply_operator,
    check_h1_sandwich,
    check_h2_translation,
    check_scaling_identity,
    mixed_two_point,
    fixed_direction,
    isaacs,
    operator_values,
    pucci_max,
    pucci_min,
    residual_field,
    second_difference,
    sup_over_set,
    tug_of_war_noise,
)
from .solver import SolveReport, solve_coset_1d, solve_dpp, step_data
from .regularity import (
    GradientField,
    ProblemFamily,
    QuotientSpec,
    SeminormReport,
    asym_seminorm,
    difference_quotient,
    discrete_gradient,
    dyadic_profile,
    sandwich_check,
    second_diff_seminorm,
    sweep_study,
    taylor_remainder,
)
from .jumps import (
    JumpProfile,
    jump_proxy_field,
    predicted_jump_bound,
    reproduce_figures,
    verify_jump_bound,
)

__version__ = "0.1.0"
