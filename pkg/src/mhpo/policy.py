"""Order-m Markov categorical policy over a small vocabulary.

The next-token distribution is conditioned on the prompt id and the last
``order`` tokens (left-padded with a begin marker). Logits live in a dense
``(n_prompts, n_contexts, vocab)`` table initialized to zero, which is the
uniform distribution for every context that training has not touched yet.

The final position ``max_len - 1`` is not a policy decision: end-of-sequence is
forced there, so its log-probability is 0 and its score gradient is zero.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .envs import EnvSpec, verify_reward
from .errors import ConfigError


@dataclass
class PolicyParams:
    vocab_size: int
    order: int = 2
    n_prompts: int = 8
    max_len: int = 16
    logits: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.vocab_size < 2:
            raise ConfigError("vocab_size must be >= 2")
        if self.order < 0:
            raise ConfigError("order must be >= 0")
        if self.max_len < 1:
            raise ConfigError("max_len must be >= 1")
        shape = (self.n_prompts, (self.vocab_size + 1) ** self.order, self.vocab_size)
        if self.logits is None:
            self.logits = np.zeros(shape)
        else:
            self.logits = np.array(self.logits, dtype=np.float64)
            if self.logits.shape != shape:
                raise ConfigError(f"logit table shape {self.logits.shape} != {shape}")
        if not np.all(np.isfinite(self.logits)):
            raise ConfigError("logits must be finite")

    @classmethod
    def for_env(cls, env: EnvSpec, order: int = 2, max_len: int = 16) -> "PolicyParams":
        return cls(vocab_size=env.vocab_size, order=order, n_prompts=env.n_prompts, max_len=max_len)

    @property
    def eos(self) -> int:
        return self.vocab_size - 1

    @property
    def n_contexts(self) -> int:
        return (self.vocab_size + 1) ** self.order

    @property
    def n_rows(self) -> int:
        return self.n_prompts * self.n_contexts

    def flat(self) -> np.ndarray:
        """(n_rows, vocab) view of the logit table."""
        return self.logits.reshape(self.n_rows, self.vocab_size)

    def context_index(self, prefix: Sequence[int]) -> int:
        bos = self.vocab_size
        tail = list(prefix[len(prefix) - self.order:]) if self.order else []
        tail = [bos] * (self.order - len(tail)) + tail
        idx = 0
        for t in tail:
            idx = idx * (self.vocab_size + 1) + t
        return idx

    def row_index(self, prompt_id: int, prefix: Sequence[int]) -> int:
        return prompt_id * self.n_contexts + self.context_index(prefix)

    def is_forced(self, position: int) -> bool:
        return position >= self.max_len - 1

    def copy(self) -> "PolicyParams":
        return PolicyParams(self.vocab_size, self.order, self.n_prompts, self.max_len,
                            self.logits.copy())


def snapshot(params: PolicyParams) -> PolicyParams:
    """Frozen deep copy used as the rollout (denominator) policy."""
    snap = params.copy()
    snap.logits.flags.writeable = False
    return snap


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def token_logprob(params: PolicyParams, prompt_id: int, prefix: Sequence[int], token: int) -> float:
    """log pi(token | prompt, prefix); ``prefix`` is every token generated so far."""
    if not 0 <= token < params.vocab_size:
        raise ConfigError(f"token {token} outside vocabulary of size {params.vocab_size}")
    if params.is_forced(len(prefix)):
        return 0.0 if token == params.eos else -np.inf
    row = params.logits[prompt_id, params.context_index(prefix)]
    return float(log_softmax(row)[token])


def response_logprobs(params: PolicyParams, prompt_id: int, response: Sequence[int]) -> np.ndarray:
    return np.array([token_logprob(params, prompt_id, response[:t], tok)
                     for t, tok in enumerate(response)])


def score_gradient(params: PolicyParams, prompt_id: int, response: Sequence[int]):
    """Per-token gradients of log pi with respect to the logit rows they touch.

    Returns a list of ``(flat_row_index, vector)`` pairs, one per token; the
    vector is one-hot(token) minus the row's softmax. Forced positions have no
    row and are reported with index -1 and a zero vector.
    """
    out = []
    for t, tok in enumerate(response):
        if params.is_forced(t):
            out.append((-1, np.zeros(params.vocab_size)))
            continue
        ridx = params.row_index(prompt_id, response[:t])
        g = -softmax(params.flat()[ridx])
        g[tok] += 1.0
        out.append((ridx, g))
    return out


def dense_score_gradient(params: PolicyParams, prompt_id: int, response: Sequence[int]) -> np.ndarray:
    """Gradient of the whole response log-likelihood, shaped like the logit table."""
    grad = np.zeros((params.n_rows, params.vocab_size))
    for ridx, g in score_gradient(params, prompt_id, response):
        if ridx >= 0:
            grad[ridx] += g
    return grad.reshape(params.logits.shape)


@dataclass
class RolloutGroup:
    prompt_id: int
    responses: list[tuple[int, ...]]
    old_logprobs: list[np.ndarray]
    rewards: np.ndarray

    def __post_init__(self):
        if len(self.responses) != len(self.old_logprobs) or len(self.responses) != len(self.rewards):
            raise ConfigError("responses, old_logprobs and rewards must have one entry per response")
        for resp, lp in zip(self.responses, self.old_logprobs):
            if len(resp) != len(lp):
                raise ConfigError("old_logprobs length must match response length")

    @property
    def group_size(self) -> int:
        return len(self.responses)


def _rng(seed, index: int) -> np.random.Generator:
    key = list(seed) if isinstance(seed, (tuple, list)) else [seed]
    return np.random.default_rng([*key, index])


def _prompt_tables(params: PolicyParams, prompt_id: int):
    lsm = log_softmax(params.logits[prompt_id])
    cdf = np.cumsum(np.exp(lsm), axis=-1)
    return lsm.tolist(), (cdf / cdf[:, -1:]).tolist()


def sample_response(params: PolicyParams, prompt_id: int, rng: np.random.Generator, tables=None):
    lsm, cdf = tables if tables is not None else _prompt_tables(params, prompt_id)
    tokens: list[int] = []
    logps: list[float] = []
    while True:
        if params.is_forced(len(tokens)):
            tokens.append(params.eos)
            logps.append(0.0)
            break
        ctx = params.context_index(tokens)
        tok = min(bisect.bisect_right(cdf[ctx], rng.random()), params.vocab_size - 1)
        tokens.append(tok)
        logps.append(lsm[ctx][tok])
        if tok == params.eos:
            break
    return tuple(tokens), np.array(logps)


def sample_group(params: PolicyParams, env: EnvSpec, prompt_id: int, K: int, rng_seed) -> RolloutGroup:
    """K independent ancestral samples for one prompt, with rewards attached.

    Response ``i`` draws from its own generator keyed by ``(*rng_seed, i)``, so
    the group is reproducible and independent of sampling order.
    """
    if K < 2:
        raise ConfigError(f"group_size must be >= 2, got {K}")
    if not 0 <= prompt_id < params.n_prompts:
        raise ConfigError(f"prompt id {prompt_id} outside [0, {params.n_prompts})")
    responses, logps = [], []
    tables = _prompt_tables(params, prompt_id)
    for i in range(K):
        resp, lp = sample_response(params, prompt_id, _rng(rng_seed, i), tables)
        responses.append(resp)
        logps.append(lp)
    rewards = np.array([verify_reward(env, prompt_id, r) for r in responses], dtype=np.float64)
    return RolloutGroup(prompt_id, responses, logps, rewards)


def greedy_response(params: PolicyParams, prompt_id: int) -> tuple[int, ...]:
    tokens: list[int] = []
    table = params.logits[prompt_id]
    while True:
        if params.is_forced(len(tokens)):
            tokens.append(params.eos)
            return tuple(tokens)
        # argmax breaks ties toward the lowest token id
        tok = int(np.argmax(table[params.context_index(tokens)]))
        tokens.append(tok)
        if tok == params.eos:
            return tuple(tokens)
