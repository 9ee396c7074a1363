"""Input checks shared by the estimators and the CLI."""
from __future__ import annotations

import math
import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .ising import IsingProblem

__all__ = ["check_problem", "check_positive", "check_seed", "check_points"]


def check_problem(S) -> IsingProblem:
    """Coerce a coupling matrix (or an :class:`IsingProblem`) to a validated problem."""
    if isinstance(S, IsingProblem):
        return S
    S = check_array(S, dtype=np.float64, ensure_2d=True, ensure_min_samples=1, ensure_min_features=1)
    return IsingProblem(S)


def check_positive(name: str, value, allow_none: bool = False) -> float | None:
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    value = float(value)
    if not (value > 0 and math.isfinite(value)):
        raise ValueError(f"{name} must be positive and finite, got {value}")
    return value


def check_seed(seed) -> int:
    """Seeds are plain non-negative integers so every run is reproducible from its log line."""
    if seed is None:
        return 0
    if isinstance(seed, bool) or not isinstance(seed, numbers.Integral) or seed < 0:
        raise ValueError(f"random_state must be a non-negative integer, got {seed!r}")
    return int(seed)


def check_points(X, n: int) -> np.ndarray:
    X = check_array(X, dtype=np.float64, ensure_2d=False)
    X = np.atleast_2d(X)
    if X.shape[1] != n:
        raise ValueError(f"points have {X.shape[1]} coordinates, the problem has {n} spins")
    return X
