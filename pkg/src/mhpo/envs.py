"""Synthetic tasks with rule-verified binary rewards.

The last vocabulary id is always end-of-sequence. A well-formed response is a
sequence of in-vocabulary tokens whose only end-of-sequence is its last token.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .errors import ConfigError

log = logging.getLogger(__name__)


class EnvKind(str, Enum):
    BANDIT = "bandit"
    PARITY = "parity"
    DIGIT_SUM = "digit_sum"


_DEFAULT_VOCAB = {EnvKind.BANDIT: 5, EnvKind.PARITY: 3, EnvKind.DIGIT_SUM: 11}


@dataclass
class EnvSpec:
    """Task family plus its size.

    parity: prompt p asks for an even (p % 2 == 0) or odd count of token 1.
    digit_sum: tokens 0..9 are digits; prompt p asks for a digit sum = p mod 10.
    bandit: prompt p rewards a first token equal to arm p % (V - 1).
    """

    kind: EnvKind
    n_prompts: int = 8
    vocab_size: int | None = None
    malformed: int = field(default=0, compare=False, repr=False)

    def __post_init__(self):
        try:
            self.kind = EnvKind(self.kind)
        except ValueError:
            raise ConfigError(f"env.kind: unknown environment {self.kind!r}") from None
        if self.vocab_size is None:
            self.vocab_size = _DEFAULT_VOCAB[self.kind]
        if self.n_prompts < 1:
            raise ConfigError("env.n_prompts: must be >= 1")
        if self.kind is EnvKind.PARITY and self.vocab_size < 3:
            raise ConfigError("env.vocab_size: parity needs tokens 0, 1 and end-of-sequence")
        if self.kind is EnvKind.DIGIT_SUM and self.vocab_size != 11:
            raise ConfigError("env.vocab_size: digit_sum uses ten digits plus end-of-sequence (11)")
        if self.kind is EnvKind.BANDIT and self.vocab_size < 3:
            raise ConfigError("env.vocab_size: bandit needs at least two arms")

    @property
    def eos(self) -> int:
        return self.vocab_size - 1

    def target(self, prompt_id: int) -> int:
        if self.kind is EnvKind.PARITY:
            return prompt_id % 2
        if self.kind is EnvKind.DIGIT_SUM:
            return prompt_id % 10
        return prompt_id % (self.vocab_size - 1)


def is_well_formed(env: EnvSpec, response: Sequence[int]) -> bool:
    if len(response) == 0 or response[-1] != env.eos:
        return False
    return all(0 <= t < env.eos for t in response[:-1])


def verify_reward(env: EnvSpec, prompt_id: int, response: Sequence[int]) -> int:
    if not is_well_formed(env, response):
        env.malformed += 1
        log.warning("malformed response for prompt %d: %r", prompt_id, list(response))
        return 0
    body = response[:-1]
    target = env.target(prompt_id)
    if env.kind is EnvKind.PARITY:
        return int(sum(1 for t in body if t == 1) % 2 == target)
    if env.kind is EnvKind.DIGIT_SUM:
        return int(sum(body) % 10 == target)
    return int(len(body) > 0 and body[0] == target)
