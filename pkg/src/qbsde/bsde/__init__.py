"""Deep BSDE solver: problems, per-step model, gradient estimators, training, oracles."""

from .estimators import (
    ESTIMATORS,
    NumericWarning,
    TrainConfig,
    backprop_gradient,
    directional_derivatives,
    draw_directions,
    estimate_gradient,
    forward_gradient,
    numerical_gradient,
)
from .model import (
    BsdeModel,
    default_widths,
    dumps_model,
    loads_model,
    loss_batch,
    loss_generic,
    make_model,
    payoffs,
    rollout,
    sample_batch,
)
from .problems import PdeProblem, make_allen_cahn, make_black_scholes_default, make_hjb
from .reference import OracleFailure, cole_hopf_monte_carlo, cole_hopf_quadrature, crank_nicolson, hjb_reference
from .train import LossHistory, TrainingDiverged, clip_gradient, evaluation_loss, train

__all__ = [
    "BsdeModel", "ESTIMATORS", "LossHistory", "NumericWarning", "OracleFailure", "PdeProblem", "TrainConfig",
    "TrainingDiverged", "backprop_gradient", "clip_gradient", "cole_hopf_monte_carlo", "cole_hopf_quadrature",
    "crank_nicolson", "default_widths", "directional_derivatives", "dumps_model", "loads_model", "draw_directions", "estimate_gradient",
    "evaluation_loss", "forward_gradient", "hjb_reference", "loss_batch", "loss_generic", "make_allen_cahn",
    "make_black_scholes_default", "make_hjb", "make_model", "numerical_gradient", "payoffs", "rollout",
    "sample_batch", "train",
]
