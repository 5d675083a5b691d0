"""Numerical certification of the transforms and the training gradient.

Each ``certify_*`` function returns a :class:`CertReport` made of named
checks, each with a measured value, the bound it is compared against and the
tolerance used. All randomness is seeded, so reports are reproducible.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import mpmath
import numpy as np

from . import transforms as tf
from .advantage import group_normalize
from .envs import EnvSpec
from .errors import ConfigError
from .objectives import Method, MethodConfig, token_terms_from_log
from .policy import PolicyParams, sample_group, snapshot
from .trainer import build_batch, surrogate

BOUND_GRID = (1e-6, 1e6, 100_000)
BOUND_ABS_TOL = 1e-9
BOUND_REL_MATCH = 1e-4
GRADCHECK_REL_TOL = 1e-5
GRADCHECK_ABS_FLOOR = 1e-9
TABLE3_C_GRID = (0.5, 1.0, 1.5, 2.0)


@dataclass
class CertCheck:
    name: str
    invariant: str
    passed: bool
    measured: float
    bound: float
    tolerance: float
    runtime: float = 0.0
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        # runtime stays out of the JSON so reports are byte-for-byte reproducible
        return {
            "name": self.name,
            "invariant": self.invariant,
            "passed": bool(self.passed),
            "measured": _num(self.measured),
            "bound": _num(self.bound),
            "tolerance": _num(self.tolerance),
            "detail": {k: _num(v) for k, v in self.detail.items()},
        }


def _num(v):
    if isinstance(v, (bool, str)) or v is None:
        return v
    if isinstance(v, (list, tuple)):
        return [_num(x) for x in v]
    v = float(v)
    if math.isnan(v) or math.isinf(v):
        return repr(v)
    return v


@dataclass
class CertReport:
    suite: str
    checks: list[CertCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def extend(self, other: "CertReport") -> "CertReport":
        self.checks.extend(other.checks)
        return self

    def to_json(self) -> str:
        payload = {"suite": self.suite, "passed": self.passed,
                   "checks": [c.to_dict() for c in self.checks]}
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        lines = [f"suite: {self.suite}"]
        for c in self.checks:
            flag = "PASS" if c.passed else "FAIL"
            lines.append(f"[{flag}] {c.name}: measured={c.measured:.6g} bound={c.bound:.6g} "
                         f"tol={c.tolerance:.1g} ({c.runtime:.2f}s) -- {c.invariant}")
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"


class _Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def log_grid(lo: float = BOUND_GRID[0], hi: float = BOUND_GRID[1], n: int = BOUND_GRID[2]) -> np.ndarray:
    return np.linspace(math.log(lo), math.log(hi), n)


# ---------------------------------------------------------------------------
# multiplier bound

def certify_multiplier_bound(c_grid: Sequence[float] = TABLE3_C_GRID,
                             dhp: tf.DhpParams | None = None) -> CertReport:
    dhp = dhp or tf.DhpParams()
    rep = CertReport("bounds")
    y = log_grid()
    for c in c_grid:
        with _Timer() as t:
            bound = tf.multiplier_bound(c)
            hazard_free = float(np.max(tf.hazard_free_multiplier_from_log(y, c)))
            full = float(np.max(np.abs(tf.multiplier_from_log(y, c, dhp))))
        rel = abs(hazard_free - bound) / bound
        rep.checks += [
            CertCheck(f"hazard_free_max_le_bound[c={c}]", "grid max of exp(psi) sech^2 <= closed-form bound",
                      hazard_free <= bound + BOUND_ABS_TOL, hazard_free, bound, BOUND_ABS_TOL, t.elapsed),
            CertCheck(f"hazard_free_max_matches_bound[c={c}]", "closed form equals the grid supremum",
                      rel <= BOUND_REL_MATCH, rel, BOUND_REL_MATCH, BOUND_REL_MATCH, 0.0,
                      {"grid_max": hazard_free, "closed_form": bound}),
            CertCheck(f"multiplier_max_le_bound[c={c}]", "|M(r)| <= closed-form bound for every token",
                      full <= bound + BOUND_ABS_TOL, full, bound, BOUND_ABS_TOL, 0.0),
            CertCheck(f"bound_lt_exp_c[c={c}]", "closed-form bound < e^c",
                      bound < math.exp(c), bound, math.exp(c), 0.0),
        ]
    fine = np.linspace(0.01, 5.0, 500)
    worst = max(tf.multiplier_bound(c) / math.exp(c) for c in fine)
    rep.checks.append(CertCheck("bound_le_exp_c_fine_grid", "closed-form bound <= e^c for c in (0, 5]",
                                worst <= 1.0, worst, 1.0, 0.0))
    return rep


# ---------------------------------------------------------------------------
# LFM properties

def _mp_lfm(r, c):
    return c * mpmath.tanh(mpmath.log(r) / c)


def fd_lfm_derivative(r: float, c: float, rel_step: float = 1e-12, dps: int = 40) -> float:
    """Central finite difference of the LFM evaluated in extended precision."""
    with mpmath.workdps(dps):
        r = mpmath.mpf(r)
        c = mpmath.mpf(c)
        h = r * rel_step
        return float((_mp_lfm(r + h, c) - _mp_lfm(r - h, c)) / (2 * h))


def certify_lfm_properties(c_grid: Sequence[float] = TABLE3_C_GRID, c_attenuation: float = 1.5) -> CertReport:
    rep = CertReport("lfm")
    r = np.logspace(-6, 6, 10_000)
    for c in c_grid:
        anti = float(np.max(np.abs(tf.lfm(1.0 / r, c) + tf.lfm(r, c))))
        rep.checks.append(CertCheck(f"reciprocal_antisymmetry[c={c}]", "lfm(1/r) = -lfm(r)",
                                    anti <= 1e-12, anti, 0.0, 1e-12))
        top = float(np.max(np.abs(tf.lfm(np.logspace(-40, 40, 10_000), c))))
        rep.checks.append(CertCheck(f"bounded[c={c}]", "|lfm| <= c and the sup approaches c",
                                    top <= c and top >= c * (1 - 1e-6), top, c, 1e-6))
        y = np.concatenate([-np.logspace(-4, math.log10(c / 100), 500), np.logspace(-4, math.log10(c / 100), 500)])
        err = np.abs(tf.lfm_from_log(y, c) - y)
        cubic = np.abs(y) ** 3 / (3 * c * c) * (1 + 1e-6)
        worst = float(np.max(err / cubic))
        rep.checks.append(CertCheck(f"local_fidelity[c={c}]", "|lfm - log r| <= |log r|^3/(3c^2) near r=1",
                                    worst <= 1.0, worst, 1.0, 1e-6))
        rg = np.logspace(-3, 3, 241)
        with _Timer() as t:
            fd = np.array([fd_lfm_derivative(x, c) for x in rg])
        an = tf.lfm_derivative(rg, c)
        rel = float(np.max(np.abs(an - fd) / np.abs(fd)))
        rep.checks.append(CertCheck(f"derivative_matches_fd[c={c}]", "d lfm/dr equals central finite difference",
                                    rel < 1e-6, rel, 1e-6, 1e-6, t.elapsed))
    rep.checks.append(CertCheck("derivative_at_anchor", "d lfm/dr = 1 at r = 1",
                                all(tf.lfm_derivative(1.0, c) == 1.0 for c in c_grid),
                                max(abs(tf.lfm_derivative(1.0, c) - 1.0) for c in c_grid), 0.0, 0.0))
    rep.extend(certify_attenuation(c_attenuation))
    rep.extend(certify_smoothness())
    return rep


def certify_attenuation(c: float = 1.5) -> CertReport:
    """The LFM derivative is unimodal in log r and vanishes in both tails.

    With y = log r the derivative is e^{-y} sech^2(y/c), whose log has slope
    2/c - 1 as y -> -inf and -(1 + 2/c) as y -> inf. It therefore vanishes as
    r -> 0 only for c < 2; the slope check fails for larger bounds.
    """
    rep = CertReport("attenuation")
    y = np.linspace(-50.0, 50.0, 100_001)
    d = tf.lfm_derivative_from_log(y, c)
    peak = int(np.argmax(d))
    diffs = np.diff(d)
    rising = bool(np.all(diffs[:peak] >= 0))
    falling = bool(np.all(diffs[peak:] <= 0))
    logd = np.log(d)
    left = (logd[10_000] - logd[0]) / (y[10_000] - y[0])
    right = (logd[-1] - logd[-10_001]) / (y[-1] - y[-10_001])
    want_left, want_right = 2.0 / c - 1.0, -(1.0 + 2.0 / c)
    slope_err = max(abs(left - want_left), abs(right - want_right))
    ok = rising and falling and left > 0 and right < 0 and slope_err < 1e-3
    rep.checks.append(CertCheck(f"smooth_attenuation[c={c}]",
                                "derivative unimodal, vanishing as r->0+ and r->inf at the predicted power laws",
                                ok, slope_err, 1e-3, 1e-3,
                                detail={"peak_log_r": float(y[peak]), "left_slope": left, "right_slope": right,
                                        "rising": rising, "falling": falling}))
    return rep


def _max_jump(f: np.ndarray) -> float:
    return float(np.max(np.abs(np.diff(f))))


def certify_smoothness(c: float = 1.5, eps: float = 0.2, n: int = 2001) -> CertReport:
    """Continuity of lfm and its first two derivatives on [0.5, 2], against hard clipping.

    A continuous function's largest adjacent-grid jump halves when the grid is
    refined twofold; a genuine discontinuity keeps the same jump.
    """
    rep = CertReport("smoothness")

    def jumps(m):
        r = np.linspace(0.5, 2.0, m)
        h = r[1] - r[0]
        d1 = tf.lfm_derivative(r, c)
        d2 = np.diff(d1) / h
        clip_coef = token_terms(r, 1.0, MethodConfig.grpo(eps))[1]
        return {"psi": _max_jump(tf.lfm(r, c)), "dpsi": _max_jump(d1), "d2psi": _max_jump(d2),
                "clip_coef": _max_jump(clip_coef)}

    coarse, fine = jumps(n), jumps(2 * n - 1)
    for key in ("psi", "dpsi", "d2psi"):
        ratio = coarse[key] / fine[key]
        rep.checks.append(CertCheck(f"continuity_{key}", f"{key} jumps shrink with the grid (C-infinity, no shocks)",
                                    ratio >= 1.8, ratio, 1.8, 0.2, 0.0,
                                    {"coarse_jump": coarse[key], "fine_jump": fine[key]}))
    ratio = coarse["clip_coef"] / fine["clip_coef"]
    rep.checks.append(CertCheck("clip_coefficient_discontinuous", "hard-clip gradient coefficient jumps at 1+eps",
                                fine["clip_coef"] >= 1.0 - eps and ratio < 1.2, fine["clip_coef"], 1.0 - eps, 0.0,
                                detail={"refinement_ratio": ratio}))
    for edge in (1.0 - eps, 1.0 + eps):
        h = 1e-6
        left = (tf.lfm(edge, c) - tf.lfm(edge - h, c)) / h
        right = (tf.lfm(edge + h, c) - tf.lfm(edge, c)) / h
        gap = abs(left - right) / tf.lfm_derivative(edge, c)
        rep.checks.append(CertCheck(f"one_sided_derivatives_agree[r={edge:.2f}]",
                                    "d lfm/dr continuous across the former clip boundary",
                                    gap < 1e-4, gap, 1e-4, 1e-4))
    return rep


def token_terms(r, adv, cfg):
    return token_terms_from_log(np.log(np.asarray(r, dtype=np.float64)), adv, cfg)


# ---------------------------------------------------------------------------
# semi-gradient

def _frozen_surrogate(params: PolicyParams, batch, cfg: MethodConfig, zeta0: np.ndarray) -> float:
    flat = params.flat()
    z = flat[batch.rows] - flat[batch.rows].max(axis=1, keepdims=True)
    lsm = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    log_r = lsm[np.arange(batch.rows.size), batch.tokens] - batch.old_logprob
    c = cfg.lfm.c
    psi = c * np.tanh(log_r / c)
    return -float(np.sum(batch.weight * np.exp(psi - zeta0) * batch.advantage))


def semi_gradient_error(params: PolicyParams, batch, cfg: MethodConfig, h: float = 1e-6):
    """Max per-parameter relative error of the analytic semi-gradient.

    The oracle differentiates the objective with zeta frozen at its value at
    ``params``, by central differences over every logit that the batch touches.
    """
    ev = surrogate(params, batch, cfg)
    c = cfg.lfm.c
    zeta0 = np.asarray(tf.dhp_penalty(c * np.tanh(ev.log_ratio / c), cfg.dhp))
    analytic = ev.grad.reshape(params.n_rows, params.vocab_size)
    numeric = np.zeros_like(analytic)
    base = params.flat()
    for row in np.unique(batch.rows):
        for v in range(params.vocab_size):
            plus, minus = base.copy(), base.copy()
            plus[row, v] += h
            minus[row, v] -= h
            fp = _frozen_surrogate(_with(params, plus), batch, cfg, zeta0)
            fm = _frozen_surrogate(_with(params, minus), batch, cfg, zeta0)
            numeric[row, v] = (fp - fm) / (2 * h)
    diff = np.abs(analytic - numeric)
    rel = diff / np.maximum(np.abs(numeric), GRADCHECK_ABS_FLOOR)
    # entries below the absolute floor are compared absolutely
    small = np.maximum(np.abs(numeric), np.abs(analytic)) < GRADCHECK_ABS_FLOOR
    rel = np.where(small, diff / GRADCHECK_ABS_FLOOR, rel)
    return float(rel.max()), analytic, numeric, ev


def _with(params: PolicyParams, flat: np.ndarray) -> PolicyParams:
    return PolicyParams(params.vocab_size, params.order, params.n_prompts, params.max_len,
                        flat.reshape(params.logits.shape))


def _random_policy_batch(seed: int, zero_advantages: bool = False):
    rng = np.random.default_rng([seed, 17])
    env = EnvSpec("bandit", n_prompts=3, vocab_size=4)
    params = PolicyParams(env.vocab_size, order=1, n_prompts=env.n_prompts, max_len=6,
                          logits=rng.normal(0.0, 1.0, size=(3, 5, 4)))
    old = snapshot(params)
    groups = [sample_group(old, env, p, 6, (seed, p)) for p in range(env.n_prompts)]
    for g in groups:
        # keep every group informative so advantages are nonzero
        if g.rewards.std() == 0:
            g.rewards[0] = 1.0 - g.rewards[0]
    adv = [np.zeros(g.group_size) if zero_advantages else group_normalize(g.rewards) for g in groups]
    return params, rng, build_batch(old, groups, adv)


def certify_semi_gradient(seed: int = 0, cfg: MethodConfig | None = None) -> CertReport:
    cfg = cfg or MethodConfig.mhpo()
    rep = CertReport("gradcheck")

    with _Timer() as t:
        params, rng, batch = _random_policy_batch(seed)
        err, _, _, ev = semi_gradient_error(params, batch, cfg)
    anchor = math.exp(-tf.dhp_penalty(0.0, cfg.dhp))
    coef_dev = float(np.max(np.abs(ev.coefficient - anchor)))
    rep.checks.append(CertCheck("semi_gradient_fresh_snapshot", "analytic semi-gradient equals FD of frozen-zeta objective",
                                err < GRADCHECK_REL_TOL, err, GRADCHECK_REL_TOL, GRADCHECK_ABS_FLOOR, t.elapsed))
    rep.checks.append(CertCheck("anchor_coefficient", "at r = 1 every coefficient equals exp(-zeta(1))",
                                coef_dev <= 1e-15, coef_dev, 0.0, 1e-15))

    with _Timer() as t:
        drifted = params
        for _ in range(3):
            drifted = _with(drifted, drifted.flat() + rng.normal(0.0, 0.3, size=drifted.flat().shape))
        err, _, _, ev = semi_gradient_error(drifted, batch, cfg)
    drift = float(np.max(np.abs(ev.log_ratio)))
    rep.checks.append(CertCheck("semi_gradient_drifted", "agreement persists after the ratio has drifted",
                                err < GRADCHECK_REL_TOL and drift > 0.1, err, GRADCHECK_REL_TOL,
                                GRADCHECK_ABS_FLOOR, t.elapsed, {"max_abs_log_ratio": drift}))

    params0, _, zero_batch = _random_policy_batch(seed, zero_advantages=True)
    err, analytic, numeric, _ = semi_gradient_error(params0, zero_batch, cfg)
    worst = float(max(np.max(np.abs(analytic)), np.max(np.abs(numeric))))
    rep.checks.append(CertCheck("zero_advantage_zero_gradient", "zero advantages give a zero gradient both ways",
                                worst == 0.0, worst, 0.0, 0.0))
    return rep


# ---------------------------------------------------------------------------
# stress and second moment

class RatioDist(str, Enum):
    LOGNORMAL = "lognormal"
    PARETO_TAIL = "pareto_tail"


class AdvDist(str, Enum):
    RADEMACHER = "rademacher"
    STANDARD_NORMAL = "standard_normal"


@dataclass
class StressSpec:
    """Synthetic (ratio, advantage) population.

    ``lognormal``: log r ~ N(mu, sigma). ``pareto_tail``: a N(0, 0.1) bulk of
    log-ratios, where a fraction ``mix`` is replaced by r = X^(+/-1) with X
    Pareto(alpha) on [1, inf) and a fair random sign.
    """

    ratio_distribution: RatioDist = RatioDist.LOGNORMAL
    mu: float = 0.0
    sigma: float = 1.0
    alpha: float = 1.5
    mix: float = 0.05
    n_samples: int = 100_000
    advantage_distribution: AdvDist = AdvDist.RADEMACHER
    transforms_under_test: list[MethodConfig] = field(default_factory=lambda: [
        MethodConfig.mhpo(), MethodConfig.grpo(0.2), MethodConfig.dapo(), MethodConfig.naive()])
    vocab_size: int = 8
    seed: int = 0

    def __post_init__(self):
        self.ratio_distribution = RatioDist(self.ratio_distribution)
        self.advantage_distribution = AdvDist(self.advantage_distribution)
        if self.n_samples < 10_000:
            raise ConfigError("stress.n_samples: must be >= 1e4 for distributional reports")

    @property
    def label(self) -> str:
        if self.ratio_distribution is RatioDist.LOGNORMAL:
            return f"lognormal(mu={self.mu:g},sigma={self.sigma:g})"
        return f"pareto_tail(alpha={self.alpha:g},mix={self.mix:g})"


def sample_log_ratios(spec: StressSpec, n: int | None = None) -> np.ndarray:
    n = spec.n_samples if n is None else n
    rng = np.random.default_rng([spec.seed, 1])
    if spec.ratio_distribution is RatioDist.LOGNORMAL:
        return spec.mu + spec.sigma * rng.standard_normal(n)
    bulk = 0.1 * rng.standard_normal(n)
    tail = rng.exponential(1.0 / spec.alpha, n) * rng.choice([-1.0, 1.0], n)
    return np.where(rng.random(n) < spec.mix, tail, bulk)


def sample_advantages(spec: StressSpec, n: int | None = None) -> np.ndarray:
    n = spec.n_samples if n is None else n
    rng = np.random.default_rng([spec.seed, 2])
    if spec.advantage_distribution is AdvDist.RADEMACHER:
        return rng.choice([-1.0, 1.0], n)
    return rng.standard_normal(n)


def sample_scores(spec: StressSpec, n: int | None = None) -> np.ndarray:
    """Score vectors one-hot(token) - softmax(logits) for random categorical rows."""
    n = spec.n_samples if n is None else n
    rng = np.random.default_rng([spec.seed, 3])
    logits = rng.normal(0.0, 1.5, size=(n, spec.vocab_size))
    p = np.exp(logits - logits.max(axis=1, keepdims=True))
    p /= p.sum(axis=1, keepdims=True)
    u = rng.random(n)[:, None]
    tok = np.minimum((np.cumsum(p, axis=1) < u).sum(axis=1), spec.vocab_size - 1)
    score = -p
    score[np.arange(n), tok] += 1.0
    return score


def second_moment_terms(coef: np.ndarray, adv: np.ndarray, score_sq: np.ndarray) -> np.ndarray:
    """Squared norms of per-token contributions coef * adv * score."""
    return coef * coef * adv * adv * score_sq


def certify_second_moment(spec: StressSpec, p: tf.LfmParams | None = None,
                          d: tf.DhpParams | None = None, batch_size: int = 8, tokens: int = 4) -> CertReport:
    p = p or tf.LfmParams()
    d = d or tf.DhpParams()
    cfg = MethodConfig(Method.MHPO, lfm=p, dhp=d)
    rep = CertReport("moment")
    with _Timer() as t:
        log_r = sample_log_ratios(spec)
        adv = sample_advantages(spec)
        score = sample_scores(spec)
        score_sq = np.sum(score * score, axis=1)
        coef = token_terms_from_log(log_r, adv, cfg)[1]
        lhs = float(np.mean(second_moment_terms(coef, adv, score_sq)))
        sigma_a2 = float(np.max(adv * adv))
        g2 = float(np.max(score_sq))
        bound = tf.multiplier_bound(p)
        rhs = sigma_a2 * g2 * bound ** 2

        naive_coef = token_terms_from_log(log_r, adv, MethodConfig.naive())[1]
        with np.errstate(over="ignore"):
            naive = float(np.mean(second_moment_terms(naive_coef, adv, score_sq)))
        # batch-level estimator g = (1/K) sum_i sum_t M score A, reported only
        k, T = batch_size, tokens
        m = spec.n_samples // (k * T)
        contrib = (coef * adv)[:, None] * score
        g = contrib[: m * k * T].reshape(m, k * T, spec.vocab_size).sum(axis=1) / k
        batch_moment = float(np.mean(np.sum(g * g, axis=1)))
    rep.checks.append(CertCheck(
        f"per_token_second_moment[{spec.label},c={p.c:g}]",
        "E||M(r) A score||^2 <= sigma_A^2 G^2 M_psi(c)^2 (per token)",
        lhs <= rhs, lhs, rhs, 0.0, t.elapsed,
        {"slack_factor": rhs / lhs if lhs > 0 else math.inf, "sigma_A2_hat": sigma_a2, "G2_hat": g2,
         "naive_pg_second_moment": naive,
         "naive_over_mhpo": naive / lhs if lhs > 0 else math.inf,
         "batch_second_moment": batch_moment, "batch_K": k, "batch_T": T}))
    return rep


def anchor_second_moment(spec: StressSpec, d: tf.DhpParams | None = None, p: tf.LfmParams | None = None):
    """(measured, analytic) second moment when every ratio is exactly 1."""
    p = p or tf.LfmParams()
    d = d or tf.DhpParams()
    cfg = MethodConfig(Method.MHPO, lfm=p, dhp=d)
    adv = sample_advantages(spec)
    score_sq = np.sum(sample_scores(spec) ** 2, axis=1)
    coef = token_terms_from_log(np.zeros(spec.n_samples), adv, cfg)[1]
    measured = float(np.mean(second_moment_terms(coef, adv, score_sq)))
    analytic = math.exp(-2 * tf.dhp_penalty(0.0, d)) * float(np.mean(adv * adv * score_sq))
    return measured, analytic


@dataclass
class StressRow:
    transform: str
    zero_fraction: float
    p999: float
    max: float
    mean_sq: float
    histogram: list[tuple[float, float, int]]


HIST_EDGES = np.logspace(-12, 12, 49)


def stress_compare(spec: StressSpec) -> list[StressRow]:
    log_r = sample_log_ratios(spec)
    adv = sample_advantages(spec)
    rows = []
    for cfg in spec.transforms_under_test:
        with np.errstate(over="ignore"):
            coef = token_terms_from_log(log_r, adv, cfg)[1]
        zero = float(np.mean(coef == 0.0))
        pos = coef[coef > 0]
        # out-of-range positives land in the first/last bin
        hist, _ = np.histogram(np.clip(pos, HIST_EDGES[0], HIST_EDGES[-1]), bins=HIST_EDGES)
        bins = [(0.0, 0.0, int(np.sum(coef == 0.0)))] + [
            (float(lo), float(hi), int(n)) for lo, hi, n in zip(HIST_EDGES[:-1], HIST_EDGES[1:], hist)]
        with np.errstate(over="ignore"):
            mean_sq = float(np.mean(coef * coef))
        rows.append(StressRow(cfg.label, zero, float(np.quantile(coef, 0.999)), float(coef.max()), mean_sq, bins))
    return rows


def certify_stress(spec: StressSpec) -> CertReport:
    rep = CertReport("stress")
    with _Timer() as t:
        rows = {r.transform: r for r in stress_compare(spec)}
    smooth = [cfg for cfg in spec.transforms_under_test if cfg.method is Method.MHPO]
    if smooth:
        bound = tf.multiplier_bound(smooth[0].lfm)
        m = rows["mhpo"]
        rep.checks.append(CertCheck(f"mhpo_no_dead_zone[{spec.label}]", "smooth multiplier is never exactly zero",
                                    m.zero_fraction == 0.0, m.zero_fraction, 0.0, 0.0, t.elapsed))
        rep.checks.append(CertCheck(f"mhpo_max_le_bound[{spec.label}]", "max coefficient <= M_psi(c)",
                                    m.max <= bound + BOUND_ABS_TOL, m.max, bound, BOUND_ABS_TOL))
    if "grpo_clip" in rows:
        g = rows["grpo_clip"]
        rep.checks.append(CertCheck(f"grpo_dead_zone_present[{spec.label}]", "hard clipping zeroes some coefficients",
                                    g.zero_fraction > 0.0, g.zero_fraction, 0.0, 0.0))
    return rep


def naive_max_growth(spec: StressSpec) -> tuple[float, float]:
    """Max naive coefficient over the first n/10 samples and over all n."""
    log_r = sample_log_ratios(spec)
    with np.errstate(over="ignore"):
        r = np.exp(log_r)
    return float(r[: spec.n_samples // 10].max()), float(r.max())


# ---------------------------------------------------------------------------
# suites

MOMENT_SIGMAS = (0.5, 1.0, 2.0, 3.0)


def default_stress_specs() -> list[StressSpec]:
    specs = [StressSpec(RatioDist.LOGNORMAL, sigma=s) for s in (0.25, 1.0, 3.0)]
    specs.append(StressSpec(RatioDist.PARETO_TAIL, alpha=1.5, mix=0.05))
    specs.append(StressSpec(RatioDist.LOGNORMAL, sigma=1.0, advantage_distribution=AdvDist.STANDARD_NORMAL))
    return specs


def run_suite(name: str) -> CertReport:
    if name == "bounds":
        return certify_multiplier_bound().extend(certify_lfm_properties())
    if name == "gradcheck":
        return certify_semi_gradient(0).extend(certify_semi_gradient(1))
    if name == "moment":
        rep = CertReport("moment")
        for s in MOMENT_SIGMAS:
            rep.extend(certify_second_moment(StressSpec(RatioDist.LOGNORMAL, sigma=s)))
        rep.extend(certify_second_moment(StressSpec(RatioDist.PARETO_TAIL)))
        return rep
    if name == "stress":
        rep = CertReport("stress")
        for spec in default_stress_specs():
            rep.extend(certify_stress(spec))
        return rep
    if name == "all":
        rep = CertReport("all")
        for sub in ("bounds", "gradcheck", "moment", "stress"):
            rep.extend(run_suite(sub))
        return rep
    raise ValueError(f"unknown suite {name!r}")


SUITES = ("bounds", "gradcheck", "moment", "stress", "all")
