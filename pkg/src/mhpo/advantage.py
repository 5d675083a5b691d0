"""Group-relative advantages."""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, DomainError

DEGENERACY_TOL = 1e-8


def group_normalize(rewards, degeneracy_tol: float = DEGENERACY_TOL) -> np.ndarray:
    """Standardize a group's rewards by their mean and population std.

    Groups whose std falls below ``degeneracy_tol`` carry no ranking signal and
    get all-zero advantages.
    """
    r = np.asarray(rewards, dtype=np.float64)
    if r.ndim != 1 or r.size < 2:
        raise ConfigError(f"a reward group needs K >= 2 rewards, got {r.size}")
    if not np.all(np.isfinite(r)):
        raise DomainError("rewards must be finite")
    std = r.std()
    if std < degeneracy_tol:
        return np.zeros_like(r)
    return (r - r.mean()) / std


def is_degenerate(rewards, degeneracy_tol: float = DEGENERACY_TOL) -> bool:
    return float(np.std(np.asarray(rewards, dtype=np.float64))) < degeneracy_tol
