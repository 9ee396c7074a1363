"""Hill regions, transit/capture classification, the capture stopping rule and the 2-spin neck.

Capture rule (general ``n``). With ``B5`` bounding ``|U_s / alpha**2 + (n-1) alpha**2 / 4|``::

    R0      = (n-1) alpha_inf**2 / 2 + B5
    U_B(t)  = -(n-1) alpha(t)**4 / 4 - B5 alpha(t)**2
    U_R0(t) = min over |x|**2 = R0 of U(x, t)
    captured  <=>  |x|**2 > R0  and  H <= min(U_R0(t), U_B(t))

For the 2-spin instance ``S = [[0, 1], [1, 0]]`` the sharper test uses
``R0 = (alpha_inf**2 - beta) / 2`` and ``U_sd(t) = -(alpha(t)**2 - beta)**2 / 4``
(the lowest value of ``U`` on the coordinate axes) and drops the norm clause;
it is valid once ``alpha(t)**2 >= 3/4 alpha_inf**2 + beta / 4``.

On a sphere ``|x|**2 = R0`` only the quadratic term of ``U`` depends on
``alpha``, so ``U_R0(alpha) = U_R0(alpha_ref) - (alpha**2 - alpha_ref**2) R0 / 2``
and the sphere minimization is done once per rule.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import Schedule, State, Trajectory, hamiltonian_sb
from .ising import IsingProblem, sign_vector
from .potential import (
    CriticalKind,
    LandscapeSummary,
    PotentialParams,
    _morse_counts,
    _newton_from_seeds,
    _seed_grid,
    eval_U,
    grad_U,
)

__all__ = [
    "HillQuery",
    "hill_contains",
    "saddle_floor_threshold",
    "estimate_B5",
    "estimate_B6",
    "min_on_sphere",
    "CaptureMode",
    "CaptureReport",
    "CaptureRule",
    "capture_test",
    "is_canonical_r2",
    "TransitKind",
    "TransitVerdict",
    "classify_trajectory",
    "default_nbhd_radius",
    "NeckAnalysis",
    "neck_linearize",
    "NeckOrbit",
    "classify_neck_orbit",
    "Orientation",
    "periodic_orbit_ellipse",
]


# --------------------------------------------------------------- Hill region


@dataclass(frozen=True)
class HillQuery:
    c: float
    params: PotentialParams


def hill_contains(query: HillQuery, x) -> bool | np.ndarray:
    """``U(x) < c``; vectorized over stacked points."""
    val = eval_U(query.params, x) < query.c
    return bool(val) if np.ndim(val) == 0 else val


def saddle_floor_threshold(summary: LandscapeSummary) -> float | None:
    """``U_s``: no orbit with energy below it can transit between minima."""
    return summary.U_s


# ------------------------------------------------------------ B5, B6, U_R0


_LANDSCAPES: dict = {}


def _newton_points(problem, beta, alpha, zero_count, morse_index):
    """Converged Newton limits from the seeds with ``zero_count`` zeros that have
    the given Morse index and no null direction, as ``(X, U)``.

    Duplicates are kept (only extrema over the set are used). Memoized so
    rule rebuilds and repeated samples reuse the enumeration.
    """
    key = (problem.coupling.tobytes(), problem.n, float(beta), float(alpha), zero_count, morse_index)
    if key not in _LANDSCAPES:
        if len(_LANDSCAPES) > 64:
            _LANDSCAPES.clear()
        params = PotentialParams(alpha, beta, problem)
        X, ok = _newton_from_seeds(params, _seed_grid(problem.n, {zero_count}))
        X = X[ok]
        index, nullity = _morse_counts(params, X)
        X = X[(index == morse_index) & (nullity == 0)]
        _LANDSCAPES[key] = (X, eval_U(params, X) if len(X) else np.empty(0))
    return _LANDSCAPES[key]


def estimate_B5(problem: IsingProblem, beta: float, alpha_samples) -> float:
    """Twice the largest ``|U_s / alpha**2 + (n-1) alpha**2 / 4|`` over the samples.

    ``U_s`` at each sample is the least value among index-1 saddles found by
    Newton from the seeds with exactly one zero entry.
    """
    samples = [float(a) for a in alpha_samples]
    if not samples:
        raise ValueError("need at least one alpha sample")
    n = problem.n
    if n < 2:
        raise ValueError("index-1 saddles need n >= 2")
    devs = []
    for a in samples:
        _, values = _newton_points(problem, beta, a, 1, 1)
        if not len(values):
            raise ValueError(f"no index-1 saddle found at alpha={a}; is alpha above the calibrated threshold?")
        U_s = float(np.min(values))
        devs.append(abs(U_s / a**2 + (n - 1) * a**2 / 4.0))
    return 2.0 * max(devs)


def estimate_B6(problem: IsingProblem, beta: float, alpha_samples) -> float:
    """Lower bound ``B6`` with ``|x|**2 >= n alpha**2 + B6`` at every minimum, doubled when negative."""
    n = problem.n
    worst = math.inf
    for a in alpha_samples:
        X, _ = _newton_points(problem, beta, float(a), 0, 0)
        if len(X):
            worst = min(worst, float(np.min(np.sum(X * X, axis=1))) - n * a * a)
    if not math.isfinite(worst):
        raise ValueError("no minima found at the given alpha samples")
    return 2.0 * worst if worst < 0 else 0.5 * worst


def _canonical_directions(D: np.ndarray) -> np.ndarray:
    """Unit rows with one representative per ``+-`` pair (``U`` is even)."""
    norms = np.linalg.norm(D, axis=1)
    D = D[norms > 0] / norms[norms > 0, None]
    lead = D[np.arange(len(D)), np.argmax(np.abs(D) > 1e-12, axis=1)]
    D = D * np.where(lead < 0, -1.0, 1.0)[:, None]
    return np.unique(np.round(D, 12), axis=0)


def _sphere_descent(f, tangent_grad, Uv, max_iter, step0):
    vals = f(Uv)
    step = np.full(len(Uv), step0)
    scale = 1.0 + np.abs(vals)
    for _ in range(max_iter):
        G = tangent_grad(Uv)
        gsq = np.sum(G * G, axis=1)
        active = gsq > (1e-12 * scale) ** 2
        if not active.any():
            break
        idx = np.flatnonzero(active)
        for _ in range(60):
            trial = Uv[idx] - step[idx, None] * G[idx]
            trial /= np.linalg.norm(trial, axis=1, keepdims=True)
            tv = f(trial)
            ok = tv <= vals[idx] - 1e-4 * step[idx] * gsq[idx]
            acc = idx[ok]
            Uv[acc], vals[acc] = trial[ok], tv[ok]
            step[acc] *= 2.0
            idx = idx[~ok]
            step[idx] *= 0.5
            if idx.size == 0:
                break
        if idx.size:
            # no descent possible at machine precision: treat as converged
            scale[idx] = np.inf
    return Uv, vals


def min_on_sphere(
    params: PotentialParams,
    r0_sq: float,
    directions=None,
    n_random: int = 8,
    seed: int = 0,
    max_iter: int = 5000,
    screen_iter: int = 30,
    keep: int = 8,
) -> float:
    """Least value of ``U`` on ``|x|**2 = r0_sq`` by multi-start projected gradient descent.

    Starts: the ``n`` axes, the normalized ``directions`` (for instance the
    minima of ``U``) and ``n_random`` random unit vectors from a fixed seed,
    one per ``+-`` pair. All starts take ``screen_iter`` steps; the ``keep``
    lowest then run to convergence. Each step moves along the tangential
    gradient with Armijo backtracking and renormalizes onto the sphere.
    """
    if r0_sq < 0:
        raise ValueError("r0_sq must be non-negative")
    if r0_sq == 0:
        return 0.0
    n = params.n
    r = math.sqrt(r0_sq)
    starts = [np.eye(n)]
    if directions is not None:
        starts.append(np.asarray(directions, dtype=float).reshape(-1, n))
    if n_random:
        starts.append(np.random.default_rng(seed).normal(size=(n_random, n)))
    Uv = _canonical_directions(np.vstack(starts))

    def f(Uv):
        return eval_U(params, r * Uv)

    def tangent_grad(Uv):
        g = r * grad_U(params, r * Uv)
        return g - np.sum(g * Uv, axis=1, keepdims=True) * Uv

    step0 = 1.0 / (1.0 + r * r * (1.0 + abs(params.shift)))
    if len(Uv) > keep:
        Uv, vals = _sphere_descent(f, tangent_grad, Uv, screen_iter, step0)
        Uv = Uv[np.argsort(vals, kind="stable")[:keep]]
    _, vals = _sphere_descent(f, tangent_grad, Uv, max_iter, step0)
    return float(np.min(vals))


# -------------------------------------------------------------- capture rule


def is_canonical_r2(problem: IsingProblem) -> bool:
    return problem.n == 2 and problem.coupling[0, 1] == 1.0


class CaptureMode(str, enum.Enum):
    GENERAL = "general"
    R2 = "r2"


@dataclass(frozen=True)
class CaptureReport:
    in_capture: bool
    t: float
    H: float
    U_R0: float
    U_B: float  # U_sd(t) in the 2-spin mode
    r0: float
    norm_sq: float
    b5_estimate: float
    alpha: float
    premature: bool
    preconditions_met: bool
    mode: CaptureMode

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["mode"] = self.mode.value
        return d


@dataclass
class CaptureRule:
    """Precomputed constants of the capture test for one (problem, beta, schedule).

    Build with :meth:`build`. ``alpha_star`` is the calibrated threshold
    above which the landscape picture holds.
    """

    problem: IsingProblem
    beta: float
    schedule: Schedule
    alpha_star: float
    mode: CaptureMode
    b5: float
    b6: float
    r0: float
    U_R0_ref: float
    alpha_ref: float
    preconditions_met: bool
    notes: list[str] = field(default_factory=list)

    @classmethod
    def build(
        cls,
        problem: IsingProblem,
        beta: float,
        schedule: Schedule,
        alpha_star: float,
        b5: float | None = None,
        b6: float | None = None,
        mode: CaptureMode | str | None = None,
    ) -> "CaptureRule":
        a_inf = schedule.alpha_inf
        n = problem.n
        if mode is None:
            mode = CaptureMode.R2 if is_canonical_r2(problem) else CaptureMode.GENERAL
        mode = CaptureMode(mode)
        notes = []
        if mode is CaptureMode.R2:
            if not is_canonical_r2(problem):
                raise ValueError("the 2-spin capture test needs S = [[0, 1], [1, 0]]")
            r0 = (a_inf**2 - beta) / 2.0
            if r0 <= 0:
                raise ValueError("alpha_inf**2 must exceed beta")
            b5 = float("nan") if b5 is None else b5
            b6 = float("nan") if b6 is None else b6
            ok = a_inf > alpha_star
            if not ok:
                notes.append("alpha_inf <= alpha_star")
        else:
            if n < 2:
                raise ValueError("the capture test needs n >= 2")
            # the test is premature below alpha**2 = alpha_inf**2 / 2, so the bounds
            # only need to hold on [alpha_inf / sqrt(2), alpha_inf]
            a_lo = max(alpha_star, a_inf / math.sqrt(2.0))
            samples = sorted({a_lo, math.sqrt(a_lo * a_inf), a_inf})
            b5 = estimate_B5(problem, beta, samples) if b5 is None else float(b5)
            b6 = estimate_B6(problem, beta, samples) if b6 is None else float(b6)
            r0 = (n - 1) * a_inf**2 / 2.0 + b5
            ok = True
            if not a_inf > 8.0 * alpha_star:
                ok = False
                notes.append(f"alpha_inf={a_inf:.6g} <= 8 alpha_star={8 * alpha_star:.6g}")
            if not a_inf**2 >= 10.0 * abs(2.0 * (b5 - b6)):
                ok = False
                notes.append("alpha_inf**2 < 10 |2 (B5 - B6)|")
        params = PotentialParams(a_inf, beta, problem)
        minima = _newton_points(problem, beta, a_inf, 0, 0)[0] if n <= 16 else None
        U_R0_ref = min_on_sphere(params, r0, directions=minima)
        return cls(problem, beta, schedule, alpha_star, mode, b5, b6, r0, U_R0_ref, a_inf, ok, notes)

    def U_R0(self, alpha: float) -> float:
        return self.U_R0_ref - (alpha * alpha - self.alpha_ref**2) * self.r0 / 2.0

    def threshold_B(self, alpha: float) -> float:
        if self.mode is CaptureMode.R2:
            return -((alpha * alpha - self.beta) ** 2) / 4.0
        n = self.problem.n
        return -(n - 1) * alpha**4 / 4.0 - self.b5 * alpha**2

    def premature(self, alpha: float) -> bool:
        a_inf, n = self.schedule.alpha_inf, self.problem.n
        if alpha <= self.alpha_star:
            return True
        if self.mode is CaptureMode.R2:
            return alpha * alpha < 0.75 * a_inf**2 + 0.25 * self.beta
        need = max(0.5 * a_inf**2, (n - 1) * a_inf**2 / (2 * n) + (self.b5 - self.b6) / n)
        return alpha * alpha <= need

    def evaluate_batch(self, t: float, alpha: float, X, H) -> np.ndarray:
        """Vectorized verdicts for stacked positions ``X`` with Hamiltonians ``H``."""
        if self.premature(alpha):
            return np.zeros(len(X), dtype=bool)
        thr = min(self.U_R0(alpha), self.threshold_B(alpha))
        ok = np.asarray(H) <= thr
        if self.mode is CaptureMode.GENERAL:
            ok &= np.sum(np.asarray(X) ** 2, axis=1) > self.r0
        return ok

    def report(self, t: float, state: State) -> CaptureReport:
        alpha = float(self.schedule.alpha(t))
        y = state.y if state.y is not None else np.zeros_like(state.x)
        H = float(hamiltonian_sb(self.problem, self.beta, alpha, (state.x, y)))
        ok = bool(self.evaluate_batch(t, alpha, state.x[None], np.array([H]))[0])
        return CaptureReport(
            in_capture=ok,
            t=float(t),
            H=H,
            U_R0=self.U_R0(alpha),
            U_B=self.threshold_B(alpha),
            r0=self.r0,
            norm_sq=float(state.x @ state.x),
            b5_estimate=self.b5,
            alpha=alpha,
            premature=self.premature(alpha),
            preconditions_met=self.preconditions_met,
            mode=self.mode,
        )


_RULE_CACHE: dict = {}


def capture_test(
    problem: IsingProblem,
    beta: float,
    schedule: Schedule,
    state: State,
    b5: float | None,
    alpha_star: float,
) -> CaptureReport:
    """One capture verdict at ``state.t``; constants are cached per (problem, beta, schedule, b5, alpha_star)."""
    key = (problem.coupling.tobytes(), problem.n, beta, schedule, b5, alpha_star)
    rule = _RULE_CACHE.get(key)
    if rule is None:
        rule = CaptureRule.build(problem, beta, schedule, alpha_star, b5=b5)
        if len(_RULE_CACHE) > 64:
            _RULE_CACHE.clear()
        _RULE_CACHE[key] = rule
    return rule.report(state.t, state)


# ----------------------------------------------------------- transit/capture


class TransitKind(str, enum.Enum):
    TRANSIT = "transit"
    CAPTURE = "capture"
    UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class TransitVerdict:
    kind: TransitKind
    witness_times: list[float]
    minima_visited: list[np.ndarray]


def default_nbhd_radius(summary: LandscapeSummary) -> float:
    """A third of the least distance between two minima."""
    M = np.array([p.x for p in summary.minima])
    if len(M) < 2:
        return math.inf
    d = np.linalg.norm(M[:, None, :] - M[None, :, :], axis=-1)
    d[np.diag_indices(len(M))] = np.inf
    return float(d.min()) / 3.0


def classify_trajectory(traj: Trajectory, summary: LandscapeSummary, nbhd_radius: float | None = None) -> TransitVerdict:
    """Transit if the samples enter the balls of two different minima; Capture if the last 20% stay in one ball."""
    minima = summary.minima
    if not minima:
        return TransitVerdict(TransitKind.UNDETERMINED, [], [])
    radius = default_nbhd_radius(summary) if nbhd_radius is None else float(nbhd_radius)
    M = np.array([p.x for p in minima])
    k = len(traj.t)
    which = np.full(k, -1)
    for start in range(0, k, 4096):
        X = traj.x[start : start + 4096]
        d = np.linalg.norm(X[:, None, :] - M[None, :, :], axis=-1)
        j = np.argmin(d, axis=1)
        inside = d[np.arange(len(X)), j] < radius
        which[start : start + len(X)] = np.where(inside, j, -1)
    times, visited, seen = [], [], []
    last = -1
    for i in np.flatnonzero(which >= 0):
        if which[i] != last:
            last = which[i]
            times.append(float(traj.t[i]))
            visited.append(sign_vector(M[last]))
            if last not in seen:
                seen.append(last)
    if len(seen) >= 2:
        return TransitVerdict(TransitKind.TRANSIT, times, visited)
    tail = which[int(math.floor(0.8 * k)) :]
    if k and tail.size and tail[0] >= 0 and np.all(tail == tail[0]):
        return TransitVerdict(TransitKind.CAPTURE, times, visited)
    return TransitVerdict(TransitKind.UNDETERMINED, times, visited)


# ------------------------------------------------------------------- the neck


@dataclass(frozen=True)
class NeckAnalysis:
    """Linearization of 2-spin SB at the saddle ``(lambda3, -lambda4)``.

    Phase-space vectors use the ``(y1, y2, x1, x2)`` ordering. ``e1``/``e2``
    span the hyperbolic plane (eigenvalues ``-mu1``/``+mu1``); ``e3``/``e4``
    are the complex-conjugate elliptic pair with eigenvalues ``-i mu2_im`` and
    ``+i mu2_im``.
    """

    alpha: float
    beta: float
    saddle: np.ndarray
    mu1: float
    mu2_im: float
    u: float
    v: float
    e1: np.ndarray
    e2: np.ndarray
    e3: np.ndarray
    e4: np.ndarray

    @property
    def z0(self) -> np.ndarray:
        return np.concatenate([np.zeros(2), self.saddle])

    def matrix(self) -> np.ndarray:
        """``J4 D^2H(z0)`` in the ``(y, x)`` ordering."""
        a = self.alpha**2 - self.beta
        l3, l4 = self.saddle[0], -self.saddle[1]
        hess_x = np.array([[3 * l3 * l3 - a, -1.0], [-1.0, 3 * l4 * l4 - a]])
        A = np.zeros((4, 4))
        A[:2, 2:] = -hess_x
        A[2:, :2] = np.eye(2)
        return A

    def charpoly(self, mu):
        a = self.alpha**2 - self.beta
        l3, l4 = self.saddle[0], -self.saddle[1]
        return mu**4 + (3 * (l3 * l3 + l4 * l4) - 2 * a) * mu**2 + (3 * l3 * l3 - a) * (3 * l4 * l4 - a) - 1

    @property
    def eigenvalues(self) -> tuple:
        return (-self.mu1, self.mu1, -1j * self.mu2_im, 1j * self.mu2_im)

    def eigvec_residuals(self) -> list[float]:
        A = self.matrix()
        return [
            float(np.max(np.abs(A @ e - lam * e)))
            for e, lam in zip((self.e1, self.e2, self.e3, self.e4), self.eigenvalues)
        ]

    def linear_state(self, xi1: float, xi2: float, eta: complex = 0.0) -> np.ndarray:
        """``z0 + xi1 e1 + xi2 e2 + 2 Re(eta e3)`` as a ``(y1, y2, x1, x2)`` vector."""
        return self.z0 + xi1 * self.e1 + xi2 * self.e2 + 2.0 * np.real(eta * self.e3)

    def energy_offset(self, xi1: float, xi2: float, eta: complex = 0.0) -> float:
        """Quadratic part of ``H - U_s`` for the linear state; the hyperbolic term is ``-2 mu1**2 (1 + u**2) xi1 xi2``."""
        w = 2.0 * np.real(eta * self.e3)
        elliptic = 0.5 * float(w[:2] @ w[:2]) + 0.5 * float(w[2:] @ (-self.matrix()[:2, 2:]) @ w[2:])
        return -2.0 * self.mu1**2 * (1.0 + self.u**2) * xi1 * xi2 + elliptic


def neck_linearize(beta: float, alpha: float) -> NeckAnalysis:
    a = alpha * alpha - beta
    if not a > 2:
        raise ValueError(f"alpha**2 - beta = {a:g} must exceed 2 for the saddle (lambda3, -lambda4) to exist")
    root = math.sqrt(a * a - 4.0)
    l3 = math.sqrt((a + root) / 2.0)
    l4 = math.sqrt(2.0 / (a + root))
    Q = math.sqrt(9.0 * a * a - 32.0)
    P = 3.0 * root
    mu1 = math.sqrt(Q - a) / math.sqrt(2.0)
    mu2 = math.sqrt(Q + a) / math.sqrt(2.0)
    u = 0.5 * (Q - P)
    v = 0.5 * (Q + P)
    e1 = np.array([-mu1 * u, -mu1, u, 1.0])
    e2 = np.array([mu1 * u, mu1, u, 1.0])
    e3 = np.array([1j * mu2 * v, -1j * mu2, -v, 1.0])
    e4 = np.array([-1j * mu2 * v, 1j * mu2, -v, 1.0])
    return NeckAnalysis(alpha, beta, np.array([l3, -l4]), mu1, mu2, u, v, e1, e2, e3, e4)


class NeckOrbit(str, enum.Enum):
    PERIODIC = "periodic"
    ASYMPTOTIC = "asymptotic"
    SADDLE_TRANSIT = "saddle_transit"
    SADDLE_NON_TRANSIT = "saddle_non_transit"


def classify_neck_orbit(xi1: float, xi2: float) -> NeckOrbit:
    if xi1 == 0 and xi2 == 0:
        return NeckOrbit.PERIODIC
    if xi1 == 0 or xi2 == 0:
        return NeckOrbit.ASYMPTOTIC
    return NeckOrbit.SADDLE_TRANSIT if xi1 * xi2 < 0 else NeckOrbit.SADDLE_NON_TRANSIT


class Orientation(str, enum.Enum):
    CLOCKWISE = "clockwise"
    COUNTERCLOCKWISE = "counterclockwise"
    DEGENERATE = "degenerate"


def periodic_orbit_ellipse(analysis: NeckAnalysis, eta_abs: float) -> tuple[float, float, Orientation]:
    """Axis lengths ``(2 v |eta|, 2 |eta|)`` and orientation of the predicted periodic-orbit ellipse.

    Note the linear periodic solution ``2 Re(eta e3 exp(i mu2 t))`` has the
    real ``x``-part ``(-v, 1)`` in ``e3``, so its ``x``-projection is actually
    a segment along ``(-v, 1)`` with half-extents ``2 v |eta|`` and ``2 |eta|``
    along the axes; the motion is clockwise in the mode's (position,
    velocity) plane. See :func:`linear_periodic_orbit` for the exact curve.
    """
    if eta_abs < 0:
        raise ValueError("eta_abs must be non-negative")
    if eta_abs == 0:
        return 0.0, 0.0, Orientation.DEGENERATE
    return 2.0 * analysis.v * eta_abs, 2.0 * eta_abs, Orientation.CLOCKWISE


def linear_periodic_orbit(analysis: NeckAnalysis, eta: complex, t) -> np.ndarray:
    """Linearized periodic solution ``z0 + 2 Re(eta e4 exp(i mu2 t))``; rows ``(y1, y2, x1, x2)``."""
    t = np.asarray(t, dtype=float)
    phase = np.exp(1j * analysis.mu2_im * t)
    return analysis.z0 + 2.0 * np.real(eta * phase[..., None] * analysis.e4)
