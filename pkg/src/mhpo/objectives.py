"""Per-token surrogate terms and their gradient coefficients.

Every method's token term has the form ``f(r) * adv`` and its parameter
gradient is ``coef(r) * adv * grad log pi``, so a method is fully described by
two arrays: the objective values and the coefficients. The batch loss is the
negated group mean of token means.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np

from . import transforms as tf
from .errors import ConfigError, DomainError

log = logging.getLogger(__name__)


class Method(str, Enum):
    MHPO = "mhpo"
    GRPO_CLIP = "grpo_clip"
    DAPO_CLIP = "dapo_clip"
    NAIVE_PG = "naive_pg"


@dataclass(frozen=True)
class MethodConfig:
    method: Method
    lfm: tf.LfmParams | None = None
    dhp: tf.DhpParams | None = None
    eps: float | None = None
    eps_low: float | None = None
    eps_high: float | None = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "method", Method(self.method))
        except ValueError:
            raise ConfigError(f"method: unknown method {self.method!r}") from None
        required = {
            Method.MHPO: ("lfm", "dhp"),
            Method.GRPO_CLIP: ("eps",),
            Method.DAPO_CLIP: ("eps_low", "eps_high"),
            Method.NAIVE_PG: (),
        }[self.method]
        for name in ("lfm", "dhp", "eps", "eps_low", "eps_high"):
            present = getattr(self, name) is not None
            if name in required and not present:
                raise ConfigError(f"method.{name}: required for method {self.method.value}")
            if present and name not in required:
                raise ConfigError(f"method.{name}: not used by method {self.method.value}")
        for name in ("eps", "eps_low", "eps_high"):
            v = getattr(self, name)
            if v is not None and not 0 < v < 1:
                raise ConfigError(f"method.{name}: must lie in (0, 1), got {v!r}")

    @classmethod
    def mhpo(cls, c: float = 1.5, dhp: tf.DhpParams | None = None) -> "MethodConfig":
        return cls(Method.MHPO, lfm=tf.LfmParams(c), dhp=dhp or tf.DhpParams())

    @classmethod
    def grpo(cls, eps: float = 0.2) -> "MethodConfig":
        return cls(Method.GRPO_CLIP, eps=eps)

    @classmethod
    def dapo(cls, eps_low: float = 0.2, eps_high: float = 0.28) -> "MethodConfig":
        return cls(Method.DAPO_CLIP, eps_low=eps_low, eps_high=eps_high)

    @classmethod
    def naive(cls) -> "MethodConfig":
        return cls(Method.NAIVE_PG)

    @property
    def label(self) -> str:
        return self.method.value


class TokenTerm(NamedTuple):
    objective_value: float
    grad_coefficient: float


def _check_ratio(log_r: np.ndarray) -> None:
    if not np.all(np.isfinite(log_r)):
        raise DomainError("ratio must be finite and > 0")


def _clip_terms(r, adv, lo, hi):
    unclipped = r * adv
    clipped = np.clip(r, lo, hi) * adv
    # ties count as the unclipped branch
    active = unclipped <= clipped
    return np.minimum(unclipped, clipped), np.where(active, r, 0.0)


def token_terms_from_log(log_r, adv, cfg: MethodConfig):
    """Vectorized (objective values, gradient coefficients) for log-ratios."""
    log_r = np.asarray(log_r, dtype=np.float64)
    adv = np.broadcast_to(np.asarray(adv, dtype=np.float64), log_r.shape)
    _check_ratio(log_r)
    m = cfg.method
    if m is Method.MHPO:
        c = cfg.lfm.c
        psi = c * np.tanh(log_r / c)
        # zeta is a constant for differentiation (stop-gradient)
        zeta = np.asarray(tf.dhp_penalty(psi, cfg.dhp))
        w = np.exp(psi - zeta)
        return w * adv, w * tf.sech2(log_r / c)
    with np.errstate(over="ignore"):
        r = np.exp(log_r)
    if m is Method.NAIVE_PG:
        return r * adv, r.copy()
    if m is Method.GRPO_CLIP:
        return _clip_terms(r, adv, 1.0 - cfg.eps, 1.0 + cfg.eps)
    return _clip_terms(r, adv, 1.0 - cfg.eps_low, 1.0 + cfg.eps_high)


def token_terms(r, adv, cfg: MethodConfig):
    r_arr = np.asarray(r, dtype=np.float64)
    if not np.all(np.isfinite(r_arr)) or np.any(r_arr <= 0):
        raise DomainError("ratio must be finite and > 0")
    return token_terms_from_log(np.log(r_arr), adv, cfg)


def _scalar_term(r, adv, cfg) -> TokenTerm:
    v, g = token_terms(r, adv, cfg)
    return TokenTerm(float(v), float(g))


def _require(cfg: MethodConfig, method: Method) -> None:
    if cfg.method is not method:
        raise ConfigError(f"expected a {method.value} config, got {cfg.method.value}")


def mhpo_token_term(r: float, adv: float, cfg: MethodConfig) -> TokenTerm:
    _require(cfg, Method.MHPO)
    return _scalar_term(r, adv, cfg)


def grpo_token_term(r: float, adv: float, cfg: MethodConfig) -> TokenTerm:
    _require(cfg, Method.GRPO_CLIP)
    return _scalar_term(r, adv, cfg)


def dapo_token_term(r: float, adv: float, cfg: MethodConfig) -> TokenTerm:
    _require(cfg, Method.DAPO_CLIP)
    return _scalar_term(r, adv, cfg)


def naive_pg_token_term(r: float, adv: float) -> TokenTerm:
    return _scalar_term(r, adv, MethodConfig.naive())


@dataclass
class BatchLoss:
    value: float
    skipped: int = 0
    responses: int = 0


def aggregate_terms(term_values: Sequence[Sequence[float]]) -> BatchLoss:
    """-(1/K) sum_i (1/T_i) sum_t term; empty responses are skipped and counted."""
    total = 0.0
    kept = skipped = 0
    for terms in term_values:
        t = np.asarray(terms, dtype=np.float64)
        if t.size == 0:
            skipped += 1
            continue
        total += float(t.mean())
        kept += 1
    if skipped:
        log.warning("skipped %d empty response(s) in batch loss", skipped)
    value = -total / kept if kept else 0.0
    return BatchLoss(value=value, skipped=skipped, responses=kept)


def batch_loss(log_ratios: Sequence[Sequence[float]], advantages: Sequence[float],
               cfg: MethodConfig) -> BatchLoss:
    """Loss of one group: per-response log-ratio arrays and per-response advantages."""
    if len(log_ratios) != len(advantages):
        raise ConfigError("one advantage per response is required")
    terms = []
    for lr, a in zip(log_ratios, advantages):
        lr = np.asarray(lr, dtype=np.float64)
        terms.append(token_terms_from_log(lr, a, cfg)[0] if lr.size else lr)
    return aggregate_terms(terms)
