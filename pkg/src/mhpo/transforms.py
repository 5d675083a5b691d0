"""Scalar transforms on importance ratios.

Everything here is a pure function of the ratio (or its logarithm) and the
hyperparameters. Functions accept Python floats or numpy arrays and return the
same kind. Callers that already hold ``log r`` should use the ``*_from_log``
variants so no ``log(exp(x))`` round trip is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class LfmParams:
    """Smooth bound of the log-fidelity modulator."""

    c: float = 1.5

    def __post_init__(self):
        if not (math.isfinite(self.c) and self.c > 0):
            raise DomainError(f"c must be a positive finite number, got {self.c!r}")


@dataclass(frozen=True)
class DhpParams:
    """Weibull shape/scale pairs for positive and negative policy shifts."""

    k_pos: float = 1.5
    lambda_pos: float = 1.0
    k_neg: float = 2.0
    lambda_neg: float = 0.8

    def __post_init__(self):
        for name in ("k_pos", "lambda_pos", "k_neg", "lambda_neg"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise DomainError(f"{name} must be finite, got {v!r}")
        if self.lambda_pos <= 0 or self.lambda_neg <= 0:
            raise DomainError("Weibull scales lambda_pos and lambda_neg must be > 0")
        if self.k_pos < 1 or self.k_neg < 1:
            raise DomainError("Weibull shapes k_pos and k_neg must be >= 1")

    @classmethod
    def symmetric(cls, k: float, lam: float) -> "DhpParams":
        return cls(k_pos=k, lambda_pos=lam, k_neg=k, lambda_neg=lam)


@dataclass(frozen=True)
class TokenCredit:
    ratio: float
    log_ratio: float
    psi: float
    zeta: float
    survival_weight: float
    multiplier: float
    advantage: float


def _c(p) -> float:
    return p.c if isinstance(p, LfmParams) else LfmParams(float(p)).c


def _finite(x, what: str) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{what} must be finite")
    return a


def _positive_ratio(r) -> np.ndarray:
    a = _finite(r, "ratio")
    if np.any(a <= 0):
        raise DomainError("ratio must be > 0")
    return a


def _out(a: np.ndarray, like):
    if np.ndim(like) == 0 and not isinstance(like, np.ndarray):
        return float(a)
    return a


def softplus(x):
    """log(1 + e^x) without overflow."""
    a = _finite(x, "softplus input")
    return _out(np.maximum(a, 0.0) + np.log1p(np.exp(-np.abs(a))), x)


def sech2(x):
    # 4 e^{-2|x|} / (1 + e^{-2|x|})^2 never overflows and has no cancellation.
    a = np.asarray(x, dtype=np.float64)
    e = np.exp(-2.0 * np.abs(a))
    return _out(4.0 * e / (1.0 + e) ** 2, x)


def lfm_from_log(log_r, p):
    c = _c(p)
    a = _finite(log_r, "log-ratio")
    return _out(c * np.tanh(a / c), log_r)


def lfm(r, p):
    """c * tanh(log r / c), bounded by c in magnitude (saturating to +/-c in float64)."""
    a = _positive_ratio(r)
    return _out(lfm_from_log(np.log(a), p), r)


def lfm_derivative_from_log(log_r, p):
    c = _c(p)
    a = _finite(log_r, "log-ratio")
    return _out(np.exp(-a) * sech2(a / c), log_r)


def lfm_derivative(r, p):
    """d/dr of :func:`lfm`: (1/r) sech^2(log r / c)."""
    a = _positive_ratio(r)
    return _out(lfm_derivative_from_log(np.log(a), p), r)


def dhp_terms(psi, d: DhpParams):
    """The (positive-shift, negative-shift) cumulative-hazard terms separately."""
    a = _finite(psi, "psi")
    pos = (softplus(a) / d.lambda_pos) ** d.k_pos
    neg = (softplus(-a) / d.lambda_neg) ** d.k_neg
    return _out(pos, psi), _out(neg, psi)


def dhp_penalty(psi, d: DhpParams):
    """Sum of Weibull cumulative hazards of softplus(psi) and softplus(-psi).

    Any finite ``psi`` is accepted; in the objective it is the LFM output.
    """
    pos, neg = dhp_terms(psi, d)
    return pos + neg


def survival_weight(psi, d: DhpParams):
    """exp(-zeta), always in (0, 1]."""
    z = np.asarray(dhp_penalty(psi, d))
    return _out(np.exp(-z), psi)


def multiplier_from_log(log_r, p, d: DhpParams):
    c = _c(p)
    a = _finite(log_r, "log-ratio")
    psi = c * np.tanh(a / c)
    zeta = np.asarray(dhp_penalty(psi, d))
    return _out(np.exp(psi - zeta) * sech2(a / c), log_r)


def gradient_multiplier(r, p, d: DhpParams):
    """exp(psi - zeta) * sech^2(log r / c), the factor on each token's score gradient."""
    a = _positive_ratio(r)
    return _out(multiplier_from_log(np.log(a), p, d), r)


def hazard_free_multiplier_from_log(log_r, p):
    """exp(psi) * sech^2(log r / c): the multiplier with zeta dropped."""
    c = _c(p)
    a = _finite(log_r, "log-ratio")
    return _out(np.exp(c * np.tanh(a / c)) * sech2(a / c), log_r)


def multiplier_bound(p) -> float:
    """Closed-form sup over r of exp(psi) sech^2(log r / c); never above e^c."""
    c = _c(p)
    s = 1.0 + math.sqrt(1.0 + c * c)
    return 2.0 / s * math.exp(c * c / s)


def multiplier_argmax_log(p) -> float:
    """log r at which the hazard-free multiplier peaks.

    With u = tanh(log r / c) the peak solves c u^2 + 2u - c = 0.
    """
    c = _c(p)
    u = c / (1.0 + math.sqrt(1.0 + c * c))
    return c * math.atanh(u)


def token_credit(log_ratio: float, advantage: float, p: LfmParams, d: DhpParams) -> TokenCredit:
    lr = float(_finite(log_ratio, "log-ratio"))
    psi = lfm_from_log(lr, p)
    zeta = dhp_penalty(psi, d)
    return TokenCredit(
        ratio=math.exp(lr),
        log_ratio=lr,
        psi=psi,
        zeta=zeta,
        survival_weight=math.exp(-zeta),
        multiplier=multiplier_from_log(lr, p, d),
        advantage=float(advantage),
    )
