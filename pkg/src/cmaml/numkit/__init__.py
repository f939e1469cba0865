"""Deterministic numerical core: MLPs, action distributions, solvers, advantages."""
from .advantage import AdvantageEstimate, discounted_cumsum, gae, normalize
from .distributions import (
    GaussianPolicyOut,
    categorical_kl,
    categorical_log_prob,
    gaussian_kl,
    gaussian_log_prob,
    log_softmax,
    softmax,
)
from .mlp import MlpSpec, ShapeError, init_params, mlp_backward, mlp_forward, mlp_jvp
from .optim import Adam, NumericError, backtracking_line_search, conjugate_gradient
from .policy import Policy, fisher_vector_product

__all__ = [
    "AdvantageEstimate", "discounted_cumsum", "gae", "normalize",
    "GaussianPolicyOut", "categorical_kl", "categorical_log_prob", "gaussian_kl",
    "gaussian_log_prob", "log_softmax", "softmax",
    "MlpSpec", "ShapeError", "init_params", "mlp_backward", "mlp_forward", "mlp_jvp",
    "Adam", "NumericError", "backtracking_line_search", "conjugate_gradient",
    "Policy", "fisher_vector_product",
]
