"""Minimum-risk equivariant estimation for replicated fixed-design linear models."""

from .checks import (
    CheckResult,
    group_axioms,
    loss_invariance,
    maximal_invariance,
    random_theta,
    random_transform,
    transitivity,
)
from .estimators import (
    BlockVarianceEstimator,
    CovWeights,
    EquivariantRegressor,
    NotEstimable,
    OmegaSpec,
    WrongShape,
    cov_estimate,
    equivariant_beta,
    estimator_from_spec,
    ols_beta,
    s0_scale,
    shrinkage_weights,
)
from .groups import (
    DegenerateBlock,
    MaximalInvariant,
    SampleTransform,
    apply_sample,
    compose,
    induce_decision_beta,
    induce_decision_cov,
    induce_param,
    inverse,
    maximal_invariant,
    transport,
)
from .losses import LossKind, ZeroVariance, loss_beta, loss_lik, loss_quad
from .model import (
    BadReplication,
    Design,
    ParameterPoint,
    SingularDesign,
    SufficientStats,
    block_means,
    block_variances,
    design_from_json,
    design_from_matrix,
    draw_responses,
    parameter_from_json,
    sample_responses,
    sufficient_stats,
)
from .risk import (
    EquivarianceReport,
    IncompatiblePair,
    OrbitConstancyReport,
    RiskEstimate,
    SweepResult,
    analytic_risk_beta,
    analytic_risk_lik,
    analytic_risk_lik_at,
    analytic_risk_quad,
    dominance_sweep,
    equivariance_check,
    mc_risk,
    orbit_constancy_check,
)

__version__ = "0.1.0"

__all__ = [
    "BadReplication",
    "BlockVarianceEstimator",
    "CheckResult",
    "CovWeights",
    "DegenerateBlock",
    "Design",
    "EquivarianceReport",
    "EquivariantRegressor",
    "IncompatiblePair",
    "LossKind",
    "MaximalInvariant",
    "NotEstimable",
    "OmegaSpec",
    "OrbitConstancyReport",
    "ParameterPoint",
    "RiskEstimate",
    "SampleTransform",
    "SingularDesign",
    "SufficientStats",
    "SweepResult",
    "WrongShape",
    "ZeroVariance",
    "analytic_risk_beta",
    "analytic_risk_lik",
    "analytic_risk_lik_at",
    "analytic_risk_quad",
    "apply_sample",
    "block_means",
    "block_variances",
    "compose",
    "cov_estimate",
    "design_from_json",
    "design_from_matrix",
    "dominance_sweep",
    "draw_responses",
    "equivariance_check",
    "equivariant_beta",
    "estimator_from_spec",
    "group_axioms",
    "induce_decision_beta",
    "induce_decision_cov",
    "induce_param",
    "inverse",
    "loss_beta",
    "loss_invariance",
    "loss_lik",
    "loss_quad",
    "maximal_invariance",
    "maximal_invariant",
    "mc_risk",
    "ols_beta",
    "orbit_constancy_check",
    "parameter_from_json",
    "random_theta",
    "random_transform",
    "s0_scale",
    "sample_responses",
    "shrinkage_weights",
    "sufficient_stats",
    "transitivity",
    "transport",
]
