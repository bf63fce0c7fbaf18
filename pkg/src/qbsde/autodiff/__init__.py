"""Forward and reverse mode differentiation for feedforward networks."""

from . import ops
from .dual import Dual
from .network import (
    apply_layers,
    split_params,
    Activation,
    FeedForwardNet,
    NumericError,
    RejectedInput,
    apply_sgd,
    backprop,
    dumps_checkpoint,
    flatten,
    forward_directional,
    forward_eval,
    init_net,
    linear_loss,
    lipschitz_bound,
    load_checkpoint,
    loads_checkpoint,
    make_net,
    output_loss,
    param_count,
    quadratic_loss,
    reverse_gradient,
    save_checkpoint,
    spectral_norm,
    stored_param_count,
    unflatten,
)
from .tape import Tape, Var


__all__ = [
    "Activation", "Dual", "FeedForwardNet", "NumericError", "RejectedInput", "Tape", "Var",
    "apply_layers", "apply_sgd", "backprop", "dumps_checkpoint", "flatten", "forward_directional",
    "forward_eval", "init_net", "linear_loss", "lipschitz_bound", "load_checkpoint",
    "loads_checkpoint", "make_net", "ops", "output_loss", "param_count", "quadratic_loss",
    "reverse_gradient", "save_checkpoint", "spectral_norm", "split_params", "stored_param_count",
    "unflatten",
]
