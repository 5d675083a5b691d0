"""Plain SGD and a bias-corrected adaptive-moment optimizer.

Both are functional: they return new arrays and never mutate their inputs, so
a failed step can be discarded by keeping the old references.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NonFiniteError(FloatingPointError):
    """A gradient or update contained nan/inf."""


def _check(grad: np.ndarray) -> None:
    if not np.all(np.isfinite(grad)):
        raise NonFiniteError("non-finite gradient entries")


def sgd_update(params: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
    grad = np.asarray(grad, dtype=np.float64)
    if np.shape(params) != grad.shape:
        raise ValueError(f"shape mismatch {np.shape(params)} vs {grad.shape}")
    _check(grad)
    return params - lr * grad


@dataclass(frozen=True)
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0

    @classmethod
    def zeros_like(cls, params: np.ndarray) -> "AdamState":
        return cls(np.zeros_like(params, dtype=np.float64), np.zeros_like(params, dtype=np.float64), 0)


def adaptive_update(params: np.ndarray, grad: np.ndarray, state: AdamState, lr: float,
                    decays: tuple[float, float] = (0.9, 0.999),
                    epsilon_hat: float = 1e-8) -> tuple[np.ndarray, AdamState]:
    grad = np.asarray(grad, dtype=np.float64)
    if state.first_moment.shape != grad.shape or np.shape(params) != grad.shape:
        raise ValueError("optimizer state, params and grad must share a shape")
    _check(grad)
    b1, b2 = decays
    t = state.step_count + 1
    m = b1 * state.first_moment + (1.0 - b1) * grad
    v = b2 * state.second_moment + (1.0 - b2) * grad * grad
    m_hat = m / (1.0 - b1 ** t)
    v_hat = v / (1.0 - b2 ** t)
    new = params - lr * m_hat / (np.sqrt(v_hat) + epsilon_hat)
    if not np.all(np.isfinite(new)):
        raise NonFiniteError("non-finite parameters after update")
    return new, AdamState(m, v, t)
