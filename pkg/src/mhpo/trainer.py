"""Rollout / advantage / surrogate-gradient training loop.

One ``train_step`` snapshots the policy, samples ``prompts_per_batch`` groups
from the snapshot, standardizes rewards within each group and then applies
``updates_per_rollout`` optimizer steps on that fixed batch. Ratios are always
taken against the snapshot, so they drift away from 1 only on the second and
later inner updates.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .advantage import DEGENERACY_TOL, group_normalize, is_degenerate
from .envs import EnvSpec, verify_reward
from .errors import ConfigError
from .objectives import Method, MethodConfig, token_terms_from_log
from .optim import AdamState, NonFiniteError, adaptive_update, sgd_update
from .policy import PolicyParams, RolloutGroup, greedy_response, log_softmax, sample_group, snapshot
from .transforms import multiplier_bound

log = logging.getLogger(__name__)


class Optimizer(str, Enum):
    SGD = "sgd"
    ADAPTIVE_MOMENT = "adaptive_moment"


DEFAULT_LR = {Optimizer.SGD: 0.05, Optimizer.ADAPTIVE_MOMENT: 0.01}


@dataclass
class TrainConfig:
    method_cfg: MethodConfig
    env: EnvSpec
    group_size: int = 8
    prompts_per_batch: int = 16
    updates_per_rollout: int = 4
    optimizer: Optimizer = Optimizer.SGD
    learning_rate: float | None = None
    moment_decays: tuple[float, float] = (0.9, 0.999)
    epsilon_hat: float = 1e-8
    total_steps: int = 500
    eval_every: int = 10
    seed: int = 0
    order: int = 2
    max_len: int = 16
    degeneracy_tol: float = DEGENERACY_TOL

    def __post_init__(self):
        try:
            self.optimizer = Optimizer(self.optimizer)
        except ValueError:
            raise ConfigError(f"train.optimizer: unknown optimizer {self.optimizer!r}") from None
        if self.learning_rate is None:
            self.learning_rate = DEFAULT_LR[self.optimizer]
        checks = [
            ("group_size", self.group_size >= 2, "must be >= 2"),
            ("prompts_per_batch", self.prompts_per_batch >= 1, "must be >= 1"),
            ("updates_per_rollout", self.updates_per_rollout >= 1, "must be >= 1"),
            ("learning_rate", self.learning_rate > 0, "must be > 0"),
            ("total_steps", self.total_steps >= 1, "must be >= 1"),
            ("eval_every", self.eval_every >= 1, "must be >= 1"),
            ("moment_decays", all(0 < b < 1 for b in self.moment_decays), "entries must lie in (0, 1)"),
            ("epsilon_hat", self.epsilon_hat > 0, "must be > 0"),
            ("max_len", self.max_len >= 1, "must be >= 1"),
            ("order", self.order >= 0, "must be >= 0"),
            ("degeneracy_tol", self.degeneracy_tol > 0, "must be > 0"),
        ]
        for name, ok, msg in checks:
            if not ok:
                raise ConfigError(f"train.{name}: {msg}")


@dataclass
class TokenBatch:
    """All non-forced tokens of a rollout batch, flattened.

    ``weight`` folds the token mean, the response mean and the group mean into
    one coefficient, so the loss is ``-sum(weight * term)``.
    """

    rows: np.ndarray
    tokens: np.ndarray
    old_logprob: np.ndarray
    advantage: np.ndarray
    weight: np.ndarray


def build_batch(params: PolicyParams, groups: list[RolloutGroup], advantages: list[np.ndarray]) -> TokenBatch:
    rows, toks, old, adv, w = [], [], [], [], []
    n_groups = len(groups)
    for g, a in zip(groups, advantages):
        k = sum(1 for r in g.responses if len(r))
        for resp, lp, a_i in zip(g.responses, g.old_logprobs, a):
            if not resp:
                continue
            wt = 1.0 / (n_groups * k * len(resp))
            for t, tok in enumerate(resp):
                if params.is_forced(t):
                    # forced end-of-sequence: log-ratio is 0 and the score is 0
                    continue
                rows.append(params.row_index(g.prompt_id, resp[:t]))
                toks.append(tok)
                old.append(lp[t])
                adv.append(a_i)
                w.append(wt)
    return TokenBatch(np.array(rows, dtype=np.int64), np.array(toks, dtype=np.int64),
                      np.array(old), np.array(adv), np.array(w))


@dataclass
class SurrogateEval:
    loss: float
    grad: np.ndarray
    log_ratio: np.ndarray
    coefficient: np.ndarray


def surrogate(params: PolicyParams, batch: TokenBatch, cfg: MethodConfig) -> SurrogateEval:
    """Loss and (semi-)gradient of the batch objective at ``params``.

    Forced tokens are absent from ``batch``; their terms are constant (ratio 1)
    with zero gradient and are added back by :func:`batch_forced_loss`.
    """
    flat = params.flat()
    lsm = log_softmax(flat[batch.rows])
    new_lp = lsm[np.arange(batch.rows.size), batch.tokens]
    log_r = new_lp - batch.old_logprob
    values, coef = token_terms_from_log(log_r, batch.advantage, cfg)
    loss = -float(np.sum(batch.weight * values))
    scale = -batch.weight * coef * batch.advantage
    contrib = -np.exp(lsm) * scale[:, None]
    contrib[np.arange(batch.rows.size), batch.tokens] += scale
    grad = np.zeros_like(flat)
    np.add.at(grad, batch.rows, contrib)
    return SurrogateEval(loss, grad.reshape(params.logits.shape), log_r, coef)


def batch_forced_loss(params: PolicyParams, groups: list[RolloutGroup], advantages, cfg: MethodConfig) -> float:
    n_groups = len(groups)
    one, _ = token_terms_from_log(np.zeros(1), 1.0, cfg)
    total = 0.0
    for g, a in zip(groups, advantages):
        k = sum(1 for r in g.responses if len(r))
        for resp, a_i in zip(g.responses, a):
            if resp and params.is_forced(len(resp) - 1):
                total += float(one[0]) * a_i / (n_groups * k * len(resp))
    return -total


@dataclass
class StepRecord:
    step: int
    mean_reward: float
    loss: float
    grad_norm: float
    max_multiplier: float
    ratio_min: float
    ratio_med: float
    ratio_max: float
    degenerate_groups: int
    eval_success: float | None = None
    incident: bool = False


@dataclass
class Checkpoint:
    step: int
    eval_success: float
    params: PolicyParams


@dataclass
class RunLog:
    records: list[StepRecord] = field(default_factory=list)
    best: Checkpoint | None = None
    latest: Checkpoint | None = None
    incidents: list[str] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=np.float64)

    @property
    def delta(self) -> float:
        return self.latest.eval_success - self.best.eval_success


@dataclass
class TrainState:
    params: PolicyParams
    opt: AdamState | None = None
    step: int = 0
    incident: str | None = None


def init_state(cfg: TrainConfig) -> TrainState:
    params = PolicyParams(cfg.env.vocab_size, cfg.order, cfg.env.n_prompts, cfg.max_len)
    opt = AdamState.zeros_like(params.logits) if cfg.optimizer is Optimizer.ADAPTIVE_MOMENT else None
    return TrainState(params, opt, 0)


def _apply(cfg: TrainConfig, logits: np.ndarray, grad: np.ndarray, opt: AdamState | None):
    if cfg.optimizer is Optimizer.SGD:
        return sgd_update(logits, grad, cfg.learning_rate), opt
    return adaptive_update(logits, grad, opt, cfg.learning_rate, cfg.moment_decays, cfg.epsilon_hat)


def rollout(state: TrainState, cfg: TrainConfig):
    """Snapshot, sample prompts and groups, and compute advantages."""
    old = snapshot(state.params)
    prompt_rng = np.random.default_rng([cfg.seed, state.step, 1])
    prompts = prompt_rng.integers(0, cfg.env.n_prompts, size=cfg.prompts_per_batch)
    groups = [sample_group(old, cfg.env, int(p), cfg.group_size, (cfg.seed, state.step, 2, slot))
              for slot, p in enumerate(prompts)]
    advantages = [group_normalize(g.rewards, cfg.degeneracy_tol) for g in groups]
    return old, groups, advantages


def train_step(state: TrainState, cfg: TrainConfig) -> tuple[TrainState, StepRecord]:
    old, groups, advantages = rollout(state, cfg)
    batch = build_batch(old, groups, advantages)
    forced = batch_forced_loss(old, groups, advantages, cfg.method_cfg)
    mean_reward = float(np.mean(np.concatenate([g.rewards for g in groups])))
    n_degenerate = sum(is_degenerate(g.rewards, cfg.degeneracy_tol) for g in groups)

    params, opt = state.params, state.opt
    losses, norms, log_ratios, coefs = [], [], [], []
    incident = None
    for _ in range(cfg.updates_per_rollout):
        ev = surrogate(params, batch, cfg.method_cfg)
        norm = float(np.linalg.norm(ev.grad))
        if not (math.isfinite(ev.loss) and math.isfinite(norm)):
            incident = f"step {state.step}: non-finite loss or gradient"
            break
        try:
            logits, opt = _apply(cfg, params.logits, ev.grad, opt)
        except NonFiniteError as exc:
            incident = f"step {state.step}: {exc}"
            break
        losses.append(ev.loss + forced)
        norms.append(norm)
        log_ratios.append(ev.log_ratio)
        coefs.append(ev.coefficient)
        params = PolicyParams(params.vocab_size, params.order, params.n_prompts, params.max_len, logits)

    if incident is not None:
        log.warning("incident, restoring pre-step parameters: %s", incident)
        params, opt = state.params, state.opt

    if log_ratios:
        lr_all = np.concatenate(log_ratios)
        c_all = np.concatenate(coefs)
    else:
        lr_all = c_all = np.zeros(0)
    if lr_all.size:
        with np.errstate(over="ignore"):
            ratios = np.exp(lr_all)
        rmin, rmed, rmax = float(ratios.min()), float(np.median(ratios)), float(ratios.max())
        cmax = float(c_all.max())
    else:
        rmin = rmed = rmax = cmax = 1.0 if not incident else float("nan")
    rec = StepRecord(
        step=state.step,
        mean_reward=mean_reward,
        loss=float(np.mean(losses)) if losses else float("nan"),
        grad_norm=float(max(norms)) if norms else float("nan"),
        max_multiplier=cmax,
        ratio_min=rmin,
        ratio_med=rmed,
        ratio_max=rmax,
        degenerate_groups=int(n_degenerate),
        incident=incident is not None,
    )
    return TrainState(params, opt, state.step + 1, incident), rec


def evaluate(params: PolicyParams, env: EnvSpec, n_prompts: int | None = None) -> float:
    """Fraction of prompts whose greedy (argmax) decode earns reward 1."""
    n = env.n_prompts if n_prompts is None else n_prompts
    wins = sum(verify_reward(env, p, greedy_response(params, p)) for p in range(n))
    return wins / n


def train(cfg: TrainConfig, on_record=None) -> tuple[TrainState, RunLog]:
    """Run ``total_steps`` train steps, evaluating every ``eval_every`` steps and at the end."""
    state = init_state(cfg)
    run = RunLog()
    bound = multiplier_bound(cfg.method_cfg.lfm) if cfg.method_cfg.method is Method.MHPO else math.inf
    for _ in range(cfg.total_steps):
        state, rec = train_step(state, cfg)
        if state.incident:
            run.incidents.append(state.incident)
        if rec.max_multiplier > bound:
            raise AssertionError(f"step {rec.step}: multiplier {rec.max_multiplier} above bound {bound}")
        last = state.step == cfg.total_steps
        if state.step % cfg.eval_every == 0 or last:
            score = evaluate(state.params, cfg.env)
            rec.eval_success = score
            ckpt = Checkpoint(state.step, score, snapshot(state.params))
            if run.best is None or score > run.best.eval_success:
                run.best = ckpt
            if last:
                run.latest = ckpt
        run.records.append(rec)
        if on_record is not None:
            on_record(rec)
    return state, run
