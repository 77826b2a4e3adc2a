"""Numerics for singular double phase problems driven by Minkowski norms.

The package covers the whole chain: anisotropic norm geometry
(:mod:`.minkowski`), simplicial box meshes with conical-product quadrature
(:mod:`.fespace`), the double phase modular and its Luxemburg norm
(:mod:`.musielak`), energy and weak-form assembly (:mod:`.energy`), the
embedding/threshold constants (:mod:`.thresholds`), the projected descent
solver (:mod:`.solver`), and a TOML-configured CLI (:mod:`.cli`).
"""

from .errors import (
    ConfigurationError,
    DegenerateNormError,
    FinslerDPError,
    InvalidInputError,
    NumericalDomainError,
    OutOfRangeError,
    ParameterRegimeError,
    PositivityViolationError,
    PreconditionError,
    SingularPointError,
)
from .minkowski import (
    EuclideanNorm,
    MinkowskiNorm,
    RandersNorm,
    RiemannianNorm,
    lindqvist_check,
    norm_self_check,
    parallelogram_check,
    quasi_distance,
    randers_validate,
    uniformity_constant,
)
from .fespace import (
    BoxMesh,
    FeFunction,
    build_mesh,
    export_csv,
    export_vtk,
    integrate,
    interpolate,
    lp_norm,
    quadrature_rule,
    w1p0F_norm,
)
from .musielak import (
    DoublePhaseExponents,
    HypothesisViolationWarning,
    WeightField,
    luxemburg_norm,
    modular_norm_relations_check,
    modular_rho_H,
    modular_rho_HF,
)
from .energy import (
    EnergyBreakdown,
    GSpec,
    ProblemSpec,
    apply_A,
    energy_J,
    grad_J,
    monotonicity_check,
    nehari_identity_residual,
    weak_residual,
)
from .thresholds import (
    LambdaParams,
    ThresholdReport,
    compute_thresholds,
    estimate_kappa,
    find_smax,
    lambda_capital,
    lambda_star,
    sigma_star,
    talenti_constant,
)
from .solver import (
    SolveReport,
    SolverConfig,
    VerificationRecord,
    VerifyLimits,
    initial_guess,
    minimize,
    project_to_ball,
    verify,
)
from .config import ExperimentConfig, load_config, validate_hypotheses

__version__ = "0.1.0"

__all__ = [
    "BoxMesh",
    "ConfigurationError",
    "DegenerateNormError",
    "DoublePhaseExponents",
    "EnergyBreakdown",
    "EuclideanNorm",
    "ExperimentConfig",
    "FeFunction",
    "FinslerDPError",
    "GSpec",
    "HypothesisViolationWarning",
    "InvalidInputError",
    "LambdaParams",
    "MinkowskiNorm",
    "NumericalDomainError",
    "OutOfRangeError",
    "ParameterRegimeError",
    "PositivityViolationError",
    "PreconditionError",
    "ProblemSpec",
    "RandersNorm",
    "RiemannianNorm",
    "SingularPointError",
    "SolveReport",
    "SolverConfig",
    "ThresholdReport",
    "VerificationRecord",
    "VerifyLimits",
    "WeightField",
    "apply_A",
    "build_mesh",
    "compute_thresholds",
    "energy_J",
    "estimate_kappa",
    "export_csv",
    "export_vtk",
    "find_smax",
    "grad_J",
    "initial_guess",
    "integrate",
    "interpolate",
    "lambda_capital",
    "lambda_star",
    "lindqvist_check",
    "load_config",
    "lp_norm",
    "luxemburg_norm",
    "minimize",
    "modular_norm_relations_check",
    "modular_rho_H",
    "modular_rho_HF",
    "monotonicity_check",
    "nehari_identity_residual",
    "norm_self_check",
    "parallelogram_check",
    "project_to_ball",
    "quadrature_rule",
    "quasi_distance",
    "randers_validate",
    "sigma_star",
    "talenti_constant",
    "uniformity_constant",
    "validate_hypotheses",
    "verify",
    "w1p0F_norm",
    "weak_residual",
]
