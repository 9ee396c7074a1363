"""Closed forms for the 2-spin instance ``S = [[0, 1], [1, 0]]`` and the cubic root utility.

With ``a = alpha**2 - beta`` the critical points of ``U`` are

    lambda1 = sqrt(a + 1)                       (a > -1)
    lambda2 = sqrt(a - 1)                       (a > 1)
    lambda3, lambda4 = sqrt((a +- sqrt(a**2 - 4)) / 2)   (a > 2)

and the critical values are ``c0 = 0`` (origin), ``c1 = -a**2/4 + 1/2``
(saddles ``(lambda3, -lambda4)`` and images), ``c2 = -(a - 1)**2 / 2``
(local minima ``(lambda2, -lambda2)``) and ``c3 = -(a + 1)**2 / 2`` (global
minima ``(lambda1, lambda1)``).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .potential import CriticalKind

__all__ = ["R2Regime", "R2Point", "R2ClosedForm", "r2_closed_form", "r2_problem", "cubic_roots", "BifurcationError"]


class BifurcationError(ValueError):
    """Raised exactly at a bifurcation value, where the closed form is degenerate."""


class R2Regime(str, enum.Enum):
    ORIGIN_ONLY = "alpha^2 < beta-1"
    TWO_MINIMA = "beta-1 < alpha^2 < beta+1"
    FIVE_POINTS = "beta+1 < alpha^2 < beta+2"
    NINE_POINTS = "alpha^2 > beta+2"


@dataclass(frozen=True)
class R2Point:
    x: tuple[float, float]
    kind: CriticalKind
    value: float


@dataclass(frozen=True)
class R2ClosedForm:
    alpha: float
    beta: float
    regime: R2Regime
    lambda1: float | None
    lambda2: float | None
    lambda3: float | None
    lambda4: float | None
    points: tuple[R2Point, ...]
    c0: float
    c1: float | None
    c2: float | None
    c3: float | None

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "regime": self.regime.value,
            "lambda": [self.lambda1, self.lambda2, self.lambda3, self.lambda4],
            "c": [self.c0, self.c1, self.c2, self.c3],
            "count": len(self.points),
            "points": [{"x": list(p.x), "class": p.kind.value, "value": p.value} for p in self.points],
        }


def r2_problem():
    from .ising import IsingProblem

    return IsingProblem(np.array([[0.0, 1.0], [1.0, 0.0]]), name="S2")


def _u2(x1: float, x2: float, a: float) -> float:
    return 0.25 * (x1**4 + x2**4) - 0.5 * a * (x1 * x1 + x2 * x2) - x1 * x2


def r2_closed_form(alpha: float, beta: float) -> R2ClosedForm:
    """All critical points of the 2-spin potential with their classes and values."""
    alpha, beta = float(alpha), float(beta)
    if not (alpha > 0 and beta > 0 and math.isfinite(alpha) and math.isfinite(beta)):
        raise ValueError("alpha and beta must be positive and finite")
    a = alpha * alpha - beta
    for edge in (-1.0, 1.0, 2.0):
        if math.isclose(a, edge, rel_tol=0.0, abs_tol=1e-12 * (1.0 + abs(beta))):
            raise BifurcationError(f"alpha^2 - beta = {a!r} sits on the bifurcation value {edge:g}")

    l1 = math.sqrt(a + 1.0) if a > -1 else None
    l2 = math.sqrt(a - 1.0) if a > 1 else None
    l3 = l4 = None
    if a > 2:
        root = math.sqrt(a * a - 4.0)
        l3 = math.sqrt((a + root) / 2.0)
        # (a - root)/2 = 2/(a + root) avoids cancellation for large a
        l4 = math.sqrt(2.0 / (a + root))

    pts: list[R2Point] = []

    def add(x1, x2, kind):
        pts.append(R2Point((x1, x2), kind, _u2(x1, x2, a)))

    if a < -1:
        regime = R2Regime.ORIGIN_ONLY
        add(0.0, 0.0, CriticalKind.MINIMUM)
    elif a < 1:
        regime = R2Regime.TWO_MINIMA
        add(l1, l1, CriticalKind.MINIMUM)
        add(-l1, -l1, CriticalKind.MINIMUM)
        add(0.0, 0.0, CriticalKind.SADDLE)
    elif a < 2:
        regime = R2Regime.FIVE_POINTS
        add(l1, l1, CriticalKind.MINIMUM)
        add(-l1, -l1, CriticalKind.MINIMUM)
        add(l2, -l2, CriticalKind.SADDLE)
        add(-l2, l2, CriticalKind.SADDLE)
        add(0.0, 0.0, CriticalKind.MAXIMUM)
    else:
        regime = R2Regime.NINE_POINTS
        add(l1, l1, CriticalKind.MINIMUM)
        add(-l1, -l1, CriticalKind.MINIMUM)
        add(l2, -l2, CriticalKind.MINIMUM)
        add(-l2, l2, CriticalKind.MINIMUM)
        add(l3, -l4, CriticalKind.SADDLE)
        add(-l3, l4, CriticalKind.SADDLE)
        add(l4, -l3, CriticalKind.SADDLE)
        add(-l4, l3, CriticalKind.SADDLE)
        add(0.0, 0.0, CriticalKind.MAXIMUM)

    return R2ClosedForm(
        alpha=alpha,
        beta=beta,
        regime=regime,
        lambda1=l1,
        lambda2=l2,
        lambda3=l3,
        lambda4=l4,
        points=tuple(pts),
        c0=0.0,
        c1=-a * a / 4.0 + 0.5 if a > 2 else None,
        c2=-((a - 1.0) ** 2) / 2.0 if a > 2 else None,
        c3=-((a + 1.0) ** 2) / 2.0 if a > -1 else None,
    )


def cubic_roots(alpha: float, eps: float, sign: int = 1) -> tuple[float, float, float]:
    """The three real roots of ``x**3 / alpha**2 - x + sign * eps``, increasing.

    Trigonometric form of the depressed cubic ``x**3 - alpha**2 x + sign*eps*alpha**2``
    followed by two Newton polishing steps. Three real roots exist iff
    ``alpha > sqrt(27/4) * |eps|``.
    """
    alpha, eps = float(alpha), float(eps)
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if not (alpha > 0 and math.isfinite(alpha) and math.isfinite(eps)):
        raise ValueError("alpha must be positive and finite, eps finite")
    if eps == 0.0:
        return (-alpha, 0.0, alpha)
    if sign == -1:
        r = cubic_roots(alpha, eps, 1)
        return (-r[2], -r[1], -r[0])
    if not alpha > math.sqrt(27.0 / 4.0) * abs(eps):
        raise ValueError(
            f"x^3/alpha^2 - x + eps has complex roots unless alpha > sqrt(27/4)|eps| (alpha={alpha}, eps={eps})"
        )
    # x^3 + p x + q with p = -alpha^2, q = eps alpha^2
    m = 2.0 * alpha / math.sqrt(3.0)
    arg = -1.5 * eps * math.sqrt(3.0) / alpha  # (3q / 2p) sqrt(-3/p)
    theta = math.acos(max(-1.0, min(1.0, arg))) / 3.0
    roots = sorted(m * math.cos(theta - 2.0 * math.pi * k / 3.0) for k in range(3))

    a2 = alpha * alpha

    def polish(x):
        for _ in range(3):
            f = x * x * x / a2 - x + eps
            df = 3.0 * x * x / a2 - 1.0
            if df == 0.0:
                break
            x -= f / df
        return x

    return tuple(sorted(polish(r) for r in roots))
