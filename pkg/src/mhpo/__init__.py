"""Smooth, bounded ratio transforms for group-relative policy optimization, with a
tabular training testbed and a numerical certification suite."""

from .advantage import group_normalize
from .errors import ConfigError, DomainError
from .objectives import Method, MethodConfig, batch_loss, token_terms
from .transforms import (DhpParams, LfmParams, dhp_penalty, gradient_multiplier, lfm, lfm_derivative,
                         multiplier_bound, survival_weight)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DhpParams", "DomainError", "LfmParams", "Method", "MethodConfig", "batch_loss",
    "dhp_penalty", "gradient_multiplier", "group_normalize", "lfm", "lfm_derivative",
    "multiplier_bound", "survival_weight", "token_terms",
]
