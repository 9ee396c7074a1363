"""Continuous-time dynamics: simulated bifurcation (SB), KPO, and two CIM gradient flows.

SB in rescaled units::

    dx/dt = y
    dy/dt = -(x**2 + beta - alpha(t)**2) x + S x
    H(x, y, t) = |y|**2 / 2 + U(x; alpha(t))

With constant ``alpha`` the flow conserves ``H``; with ``alpha`` increasing,
``dH/dt = -alpha * alpha' * |x|**2 <= 0``.

The unscaled SB form with constants ``K, Delta, xi0`` and pump ``p`` maps onto
this one by ``beta = 1``, ``alpha**2 = p / Delta``, ``S = xi0 J / Delta``,
time ``s = Delta t``, ``x = sqrt(Delta / K) X`` and ``H_s = (Delta**2 / K) H``;
see :func:`sb_from_kpo_constants`.

All integrators are batched: a stack of ``m`` initial states advances in
lockstep, which is how multi-seed experiments stay fast. A single state is a
batch of one.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .ising import IsingProblem
from .potential import batched_newton

__all__ = [
    "ScheduleKind",
    "Schedule",
    "State",
    "Trajectory",
    "Integrator",
    "BlowUpError",
    "integrate_sb",
    "integrate_sb_batch",
    "integrate_kpo",
    "integrate_gradient_cim",
    "integrate_dopo",
    "hamiltonian_sb",
    "hamiltonian_kpo",
    "potential_cim",
    "potential_dopo",
    "grad_dopo",
    "hess_dopo",
    "dopo_critical_points",
    "sb_from_kpo_constants",
]


class ScheduleKind(str, enum.Enum):
    CONSTANT = "constant"
    LINEAR = "linear"
    TANH = "tanh"


@dataclass(frozen=True)
class Schedule:
    """Monotone saturating parameter ramp ``alpha(t)``.

    ``linear`` rises linearly from ``alpha_start`` and saturates at
    ``alpha_inf`` around ``t = ramp_time``; the corner is replaced by a
    quadratic blend of half-width ``0.1 * ramp_time`` so the ramp is C1.
    ``tanh`` is ``alpha_start + (alpha_inf - alpha_start) tanh(t / ramp_time)``.
    ``constant`` is ``alpha_inf`` throughout.

    KPO and CIM runs reuse this type for the pump ``p(t)``.
    """

    kind: ScheduleKind
    alpha_inf: float
    alpha_start: float = 0.0
    ramp_time: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ScheduleKind(self.kind))
        for name in ("alpha_inf", "alpha_start", "ramp_time"):
            val = float(getattr(self, name))
            if not math.isfinite(val):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, val)
        if self.alpha_inf <= 0:
            raise ValueError("alpha_inf must be positive")
        if self.ramp_time <= 0:
            raise ValueError("ramp_time must be positive")
        if not 0 <= self.alpha_start <= self.alpha_inf:
            raise ValueError("alpha_start must lie in [0, alpha_inf]")

    @classmethod
    def constant(cls, alpha: float) -> "Schedule":
        return cls(ScheduleKind.CONSTANT, alpha, alpha, 1.0)

    @property
    def is_ramped(self) -> bool:
        return self.kind is not ScheduleKind.CONSTANT and self.alpha_start < self.alpha_inf

    @property
    def saturation_time(self) -> float:
        """First time with ``alpha == alpha_inf`` exactly (``inf`` for tanh)."""
        if self.kind is ScheduleKind.CONSTANT:
            return 0.0
        if self.kind is ScheduleKind.LINEAR:
            return 1.1 * self.ramp_time
        return math.inf

    def _progress(self, t):
        T = self.ramp_time
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        if self.kind is ScheduleKind.TANH:
            return np.tanh(t / T), (1.0 - np.tanh(t / T) ** 2) / T
        w = 0.1 * T
        s = t - (T - w)
        h = np.where(t <= T - w, t, np.where(t >= T + w, T, T - w + s - s * s / (4 * w)))
        dh = np.where(t <= T - w, 1.0, np.where(t >= T + w, 0.0, 1.0 - s / (2 * w)))
        return h / T, dh / T

    def alpha(self, t):
        if self.kind is ScheduleKind.CONSTANT:
            return np.full(np.shape(t), self.alpha_inf) if np.ndim(t) else self.alpha_inf
        g, _ = self._progress(t)
        val = self.alpha_start + (self.alpha_inf - self.alpha_start) * g
        return float(val) if np.ndim(val) == 0 else val

    def alpha_dot(self, t):
        if self.kind is ScheduleKind.CONSTANT:
            return np.zeros(np.shape(t)) if np.ndim(t) else 0.0
        _, dg = self._progress(t)
        val = (self.alpha_inf - self.alpha_start) * dg
        return float(val) if np.ndim(val) == 0 else val

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "alpha_inf": self.alpha_inf,
            "alpha_start": self.alpha_start,
            "ramp_time": self.ramp_time,
        }


@dataclass
class State:
    x: np.ndarray
    y: np.ndarray | None = None
    t: float = 0.0

    def __post_init__(self):
        self.x = np.array(self.x, dtype=float)
        if self.x.ndim != 1:
            raise ValueError("state x must be a vector")
        if self.y is not None:
            self.y = np.array(self.y, dtype=float)
            if self.y.shape != self.x.shape:
                raise ValueError("state x and y must have equal length")
        if not (np.all(np.isfinite(self.x)) and (self.y is None or np.all(np.isfinite(self.y)))):
            raise ValueError("state must be finite")
        self.t = float(self.t)

    def negated(self) -> "State":
        return State(-self.x, None if self.y is None else -self.y, self.t)


class Integrator(str, enum.Enum):
    SYMPLECTIC_EULER = "symplectic_euler"
    LEAPFROG = "leapfrog"
    DISCRETE_GRADIENT = "discrete_gradient"
    RK4 = "rk4"


@dataclass
class Trajectory:
    """Recorded samples of one run.

    ``H`` is the SB Hamiltonian for SB, ``H_k`` for KPO, and the potential
    (``U_c`` or ``U_d``) for the gradient flows. ``alpha`` holds the schedule
    value, which is the pump ``p`` for KPO and CIM runs. For DOPO runs ``x``
    and ``y`` hold the ``c`` and ``s`` quadratures.
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray | None
    H: np.ndarray
    alpha: np.ndarray
    dt: float
    integrator: Integrator
    seed: int | None = None
    in_capture: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def final_x(self) -> np.ndarray:
        return self.x[-1]

    def final_state(self) -> State:
        return State(self.x[-1], None if self.y is None else self.y[-1], self.t[-1])

    def negated(self) -> "Trajectory":
        return Trajectory(
            self.t, -self.x, None if self.y is None else -self.y, self.H, self.alpha,
            self.dt, self.integrator, self.seed, self.in_capture, dict(self.meta),
        )


class BlowUpError(FloatingPointError):
    def __init__(self, t: float, reason: str):
        super().__init__(f"integration blew up at t={t:.6g}: {reason}; try a smaller dt")
        self.t = t


# --------------------------------------------------------------------------- SB


def _sb_force(S, beta, a2, X):
    return -(X * X + (beta - a2)) * X + X @ S


def hamiltonian_sb(problem: IsingProblem, beta: float, alpha: float, state) -> float | np.ndarray:
    """``|y|**2 / 2 + U(x)`` with ``alpha`` frozen; accepts a State or an ``(x, y)`` pair of stacks."""
    if isinstance(state, State):
        x, y = state.x, state.y if state.y is not None else np.zeros_like(state.x)
    else:
        x, y = (np.asarray(v, dtype=float) for v in state)
    sq = x * x
    val = 0.5 * np.sum(y * y, axis=-1) + 0.25 * np.sum(sq * sq, axis=-1)
    val = val + 0.5 * (beta - alpha * alpha) * np.sum(sq, axis=-1) - 0.5 * np.sum((x @ problem.coupling) * x, axis=-1)
    return float(val) if np.ndim(val) == 0 else val


def _avf_step(S, beta, a2, X, Y, dt, tol=1e-13, max_iter=30):
    """Average-vector-field step with alpha frozen; conserves H up to the solve residual.

    Solves ``d = dt y - dt**2/2 G(d)`` where ``G`` is the mean of ``grad U`` on
    the segment ``[x, x + d]``, evaluated exactly for the quartic.
    """
    shift = beta - a2
    n = X.shape[1]
    eye = np.eye(n)
    J_lin = 0.5 * (shift * eye - S)

    def G(D):
        cubic = X * X * X + 1.5 * X * X * D + X * D * D + 0.25 * D * D * D
        mid = X + 0.5 * D
        return cubic + shift * mid - mid @ S

    D = dt * Y
    scale = 1.0 + np.max(np.abs(X), axis=1) + np.max(np.abs(Y), axis=1)
    for _ in range(max_iter):
        F = D - dt * Y + 0.5 * dt * dt * G(D)
        if np.all(np.max(np.abs(F), axis=1) <= tol * scale * dt):
            break
        diag = 1.5 * X * X + 2.0 * X * D + 0.75 * D * D
        Jac = np.broadcast_to(eye + 0.5 * dt * dt * J_lin, (len(X), n, n)).copy()
        Jac[:, np.arange(n), np.arange(n)] += 0.5 * dt * dt * diag
        D = D - np.linalg.solve(Jac, F[..., None])[..., 0]
    Y_new = Y - dt * G(D)
    return X + D, Y_new


def integrate_sb_batch(
    problem: IsingProblem,
    beta: float,
    schedule: Schedule,
    X0,
    Y0=None,
    dt: float = 1e-2,
    t_max: float = 10.0,
    record_stride: int = 1,
    method: Integrator | str = Integrator.SYMPLECTIC_EULER,
    t0: float = 0.0,
    on_check: Callable | None = None,
    check_stride: int = 10,
    blowup_factor: float = 10.0,
):
    """Integrate a batch of SB initial states in lockstep.

    Returns a dict of stacked recordings: ``t`` (k,), ``x``/``y`` (m, k, n),
    ``H``/``alpha`` as (m, k) / (k,) arrays, plus ``stopped`` (step index at
    which each row was frozen by ``on_check``, or -1).

    ``on_check(step, t, alpha, X, Y, H, active)`` is called every
    ``check_stride`` steps with the rows still advancing; it returns a boolean
    mask of rows to freeze (stop integrating). Frozen rows keep their last
    state in later samples.
    """
    method = Integrator(method)
    if method is Integrator.RK4:
        raise ValueError("SB uses symplectic_euler, leapfrog or discrete_gradient")
    if not (dt > 0 and math.isfinite(dt)):
        raise ValueError("dt must be positive and finite")
    if record_stride < 1 or check_stride < 1:
        raise ValueError("strides must be >= 1")
    S = problem.coupling
    X = np.array(X0, dtype=float, ndmin=2, copy=True)
    if X.shape[1] != problem.n:
        raise ValueError(f"initial x has dimension {X.shape[1]}, expected {problem.n}")
    Y = np.zeros_like(X) if Y0 is None else np.array(Y0, dtype=float, ndmin=2, copy=True)
    if Y.shape != X.shape:
        raise ValueError("initial y must match x")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise ValueError("initial state must be finite")
    m = len(X)
    n_steps = int(round(t_max / dt))
    bound = blowup_factor * max(schedule.alpha_inf, 1.0)

    ts, xs, ys, Hs, als = [], [], [], [], []
    active = np.ones(m, dtype=bool)
    stopped = np.full(m, -1)

    def record(k, t, a):
        ts.append(t)
        xs.append(X.copy())
        ys.append(Y.copy())
        Hs.append(hamiltonian_sb(problem, beta, a, (X, Y)))
        als.append(a)

    alphas = np.atleast_1d(schedule.alpha(t0 + dt * np.arange(n_steps + 1))).tolist()
    t = t0
    a = alphas[0]
    record(0, t, a)
    idx = slice(None)
    for k in range(1, n_steps + 1):
        Xa, Ya = X[idx], Y[idx]
        a2 = a * a
        if method is Integrator.SYMPLECTIC_EULER:
            Ya = Ya + dt * _sb_force(S, beta, a2, Xa)
            Xa = Xa + dt * Ya
        elif method is Integrator.LEAPFROG:
            a_next = alphas[k]
            Ya = Ya + 0.5 * dt * _sb_force(S, beta, a2, Xa)
            Xa = Xa + dt * Ya
            Ya = Ya + 0.5 * dt * _sb_force(S, beta, a_next * a_next, Xa)
        else:
            Xa, Ya = _avf_step(S, beta, a2, Xa, Ya, dt)
        X[idx], Y[idx] = Xa, Ya
        t = t0 + k * dt
        a = alphas[k]
        # NaN fails the comparison, so one reduction covers both checks
        if not np.max(np.abs(Xa), initial=0.0) <= bound:
            if not (np.all(np.isfinite(Xa)) and np.all(np.isfinite(Ya))):
                raise BlowUpError(t, "non-finite state")
            raise BlowUpError(t, f"|x|_inf exceeded {bound:g}")
        if on_check is not None and k % check_stride == 0 and active.any():
            rows = np.flatnonzero(active)
            H_now = hamiltonian_sb(problem, beta, a, (X[rows], Y[rows]))
            freeze = np.asarray(on_check(k, t, a, X[rows], Y[rows], H_now, rows), dtype=bool)
            stopped[rows[freeze]] = k
            active[rows[freeze]] = False
            if freeze.any():
                idx = np.flatnonzero(active)
        if k % record_stride == 0 or k == n_steps or not active.any():
            record(k, t, a)
        if not active.any():
            break
    return {
        "t": np.array(ts),
        "x": np.stack(xs, axis=1),
        "y": np.stack(ys, axis=1),
        "H": np.stack(Hs, axis=1),
        "alpha": np.array(als),
        "stopped": stopped,
        "dt": dt,
        "method": method,
    }


def integrate_sb(
    problem: IsingProblem,
    beta: float,
    schedule: Schedule,
    init: State,
    dt: float = 1e-2,
    t_max: float = 10.0,
    record_stride: int = 1,
    method: Integrator | str = Integrator.SYMPLECTIC_EULER,
    seed: int | None = None,
) -> Trajectory:
    """Integrate SB from one state.

    ``symplectic_euler`` (default) kicks ``y`` with the force at the current
    ``x`` and ``alpha(t_k)``, then drifts ``x``. ``leapfrog`` is the
    second-order, time-reversible variant. ``discrete_gradient`` takes an
    energy-conserving average-vector-field step with ``alpha`` frozen and then
    moves ``alpha`` to the next grid time, so the recorded ``H`` drops by
    exactly ``(alpha_{k+1}**2 - alpha_k**2) |x|**2 / 2`` per step; it is the
    integrator to use when the monotone decrease of ``H`` matters.
    """
    y0 = init.y if init.y is not None else np.zeros_like(init.x)
    out = integrate_sb_batch(
        problem, beta, schedule, init.x[None], y0[None], dt=dt, t_max=t_max,
        record_stride=record_stride, method=method, t0=init.t,
    )
    return Trajectory(
        t=out["t"], x=out["x"][0], y=out["y"][0], H=out["H"][0], alpha=out["alpha"],
        dt=dt, integrator=Integrator(method), seed=seed,
    )


def sb_from_kpo_constants(J, K: float, Delta: float, xi0: float, p: float):
    """Rescaled SB parameters ``(problem, beta, alpha, x_scale, H_scale)`` for the unscaled SB constants.

    Time scales by ``Delta``: rescaled time ``s`` equals ``Delta * t``.
    """
    if min(K, Delta, xi0) <= 0 or p < 0:
        raise ValueError("K, Delta, xi0 must be positive and p non-negative")
    S = xi0 * np.asarray(J, dtype=float) / Delta
    return IsingProblem(S), 1.0, math.sqrt(p / Delta), math.sqrt(Delta / K), Delta * Delta / K


# ------------------------------------------------------------------ RK4 flows


def _rk4(f, t0, Z0, dt, t_max, record_stride, H_fn, p_fn, bound, on_step=None):
    if not (dt > 0 and math.isfinite(dt)):
        raise ValueError("dt must be positive and finite")
    Z = np.array(Z0, dtype=float, copy=True)
    if not np.all(np.isfinite(Z)):
        raise ValueError("initial state must be finite")
    n_steps = int(round(t_max / dt))
    ts, zs, Hs, ps = [t0], [Z.copy()], [H_fn(t0, Z)], [p_fn(t0)]
    for k in range(1, n_steps + 1):
        t = t0 + (k - 1) * dt
        k1 = f(t, Z)
        k2 = f(t + 0.5 * dt, Z + 0.5 * dt * k1)
        k3 = f(t + 0.5 * dt, Z + 0.5 * dt * k2)
        k4 = f(t + dt, Z + dt * k3)
        Z = Z + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t0 + k * dt
        if not np.all(np.isfinite(Z)):
            raise BlowUpError(t, "non-finite state")
        if np.max(np.abs(Z)) > bound:
            raise BlowUpError(t, f"|state|_inf exceeded {bound:g}")
        if k % record_stride == 0 or k == n_steps:
            ts.append(t)
            zs.append(Z.copy())
            Hs.append(H_fn(t, Z))
            ps.append(p_fn(t))
    return np.array(ts), np.array(zs), np.array(Hs), np.array(ps)


def hamiltonian_kpo(J, K, Delta, xi0, p, x, y):
    r2 = x * x + y * y
    val = np.sum(0.25 * K * r2 * r2 - 0.5 * p * (x * x - y * y) + 0.5 * Delta * r2, axis=-1)
    return val - 0.5 * xi0 * (np.sum((x @ J) * x, axis=-1) + np.sum((y @ J) * y, axis=-1))


def integrate_kpo(
    problem: IsingProblem,
    K: float,
    Delta: float,
    xi0: float,
    schedule_p: Schedule,
    init: State,
    dt: float = 1e-2,
    t_max: float = 10.0,
    record_stride: int = 1,
    seed: int | None = None,
) -> Trajectory:
    """RK4 on Hamilton's equations of the KPO Hamiltonian ``H_k``.

    The equations are derived from ``H_k`` (``dx/dt = dH_k/dy``,
    ``dy/dt = -dH_k/dx``), so ``dy_i/dt = (p - Delta - K r_i**2) x_i + xi0 (J x)_i``.
    """
    if min(K, Delta, xi0) <= 0:
        raise ValueError("K, Delta and xi0 must be positive")
    J = problem.coupling
    n = problem.n
    y0 = init.y if init.y is not None else np.zeros(n)

    def f(t, Z):
        x, y = Z[:n], Z[n:]
        p = schedule_p.alpha(t)
        r2 = x * x + y * y
        dx = (K * r2 + p + Delta) * y - xi0 * (J @ y)
        dy = (p - Delta - K * r2) * x + xi0 * (J @ x)
        return np.concatenate([dx, dy])

    def H(t, Z):
        return float(hamiltonian_kpo(J, K, Delta, xi0, schedule_p.alpha(t), Z[:n], Z[n:]))

    rho = problem.spectral_radius()
    bound = 10.0 * math.sqrt((schedule_p.alpha_inf + Delta + xi0 * rho) / K + 1.0)
    t, Z, Hs, ps = _rk4(f, init.t, np.concatenate([init.x, y0]), dt, t_max, record_stride, H, schedule_p.alpha, bound)
    return Trajectory(t=t, x=Z[:, :n], y=Z[:, n:], H=Hs, alpha=ps, dt=dt, integrator=Integrator.RK4, seed=seed)


def potential_cim(problem: IsingProblem, p: float, eps: float, x) -> float | np.ndarray:
    """``U_c = sum(x**4/4 + (1-p)/2 x**2) - eps x^T S_c x``."""
    x = np.asarray(x, dtype=float)
    sq = x * x
    val = np.sum(0.25 * sq * sq + 0.5 * (1.0 - p) * sq, axis=-1) - eps * np.sum((x @ problem.coupling) * x, axis=-1)
    return float(val) if np.ndim(val) == 0 else val


def integrate_gradient_cim(
    problem: IsingProblem,
    p: float,
    eps: float,
    init: State,
    dt: float = 1e-2,
    t_max: float = 10.0,
    record_stride: int = 1,
    seed: int | None = None,
) -> Trajectory:
    """RK4 on ``dx/dt = -grad U_c``.

    ``U_c`` equals the potential ``U`` with ``beta = 1``, ``alpha = sqrt(p)``
    and ``S = 2 eps S_c``.
    """
    if p <= 0 or eps <= 0:
        raise ValueError("p and eps must be positive")
    S2 = 2.0 * eps * problem.coupling

    def f(t, x):
        return -(x * x * x + (1.0 - p) * x - x @ S2)

    bound = 10.0 * math.sqrt(p + 2.0 * eps * problem.spectral_radius() + 1.0)
    t, X, Hs, ps = _rk4(
        f, init.t, init.x, dt, t_max, record_stride,
        lambda t, x: potential_cim(problem, p, eps, x), lambda t: p, bound,
    )
    return Trajectory(t=t, x=X, y=None, H=Hs, alpha=ps, dt=dt, integrator=Integrator.RK4, seed=seed)


def potential_dopo(problem_xi: IsingProblem, p: float, c, s) -> float | np.ndarray:
    """``U_d(c, s)``; its negative gradient is the two-quadrature CIM vector field."""
    c = np.asarray(c, dtype=float)
    s = np.asarray(s, dtype=float)
    Xi = problem_xi.coupling
    r2 = c * c + s * s
    val = np.sum(0.25 * r2 * r2 - 0.5 * p * (c * c - s * s) + 0.5 * r2, axis=-1)
    val = val - 0.5 * np.sum((c @ Xi) * c, axis=-1) - 0.5 * np.sum((s @ Xi) * s, axis=-1)
    return float(val) if np.ndim(val) == 0 else val


def grad_dopo(problem_xi: IsingProblem, p: float, Z) -> np.ndarray:
    """Gradient of ``U_d`` for stacked states ``Z = [c, s]`` of shape (..., 2n)."""
    Z = np.asarray(Z, dtype=float)
    n = problem_xi.n
    Xi = problem_xi.coupling
    c, s = Z[..., :n], Z[..., n:]
    r2 = c * c + s * s
    gc = (r2 + 1.0 - p) * c - c @ Xi
    gs = (r2 + 1.0 + p) * s - s @ Xi
    return np.concatenate([gc, gs], axis=-1)


def hess_dopo(problem_xi: IsingProblem, p: float, Z) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    n = problem_xi.n
    Xi = problem_xi.coupling
    c, s = Z[..., :n], Z[..., n:]
    shape = Z.shape[:-1]
    H = np.zeros(shape + (2 * n, 2 * n))
    i = np.arange(n)
    H[..., :n, :n] = -Xi
    H[..., n:, n:] = -Xi
    H[..., i, i] += 3 * c * c + s * s + 1.0 - p
    H[..., n + i, n + i] += c * c + 3 * s * s + 1.0 + p
    H[..., i, n + i] = 2 * c * s
    H[..., n + i, i] = 2 * c * s
    return H


def dopo_critical_points(problem_xi: IsingProblem, p: float, Z0, tol: float = 1e-10, max_iter: int = 200):
    """Batched damped Newton on ``grad U_d = 0``; returns ``(Z, grad_norm, converged)``."""
    return batched_newton(
        lambda Z: grad_dopo(problem_xi, p, Z), lambda Z: hess_dopo(problem_xi, p, Z), Z0, tol, max_iter
    )


def integrate_dopo(
    problem_xi: IsingProblem,
    p: float,
    init_c,
    init_s,
    dt: float = 1e-2,
    t_max: float = 10.0,
    record_stride: int = 1,
    seed: int | None = None,
) -> Trajectory:
    """RK4 on the two-quadrature CIM flow ``(dc/dt, ds/dt) = -grad U_d``."""
    n = problem_xi.n
    Z0 = np.concatenate([np.asarray(init_c, dtype=float), np.asarray(init_s, dtype=float)])
    if Z0.shape != (2 * n,):
        raise ValueError(f"init_c and init_s must have length {n}")
    bound = 10.0 * math.sqrt(abs(p) + problem_xi.spectral_radius() + 1.0)
    t, Z, Hs, ps = _rk4(
        lambda t, Z: -grad_dopo(problem_xi, p, Z), 0.0, Z0, dt, t_max, record_stride,
        lambda t, Z: potential_dopo(problem_xi, p, Z[:n], Z[n:]), lambda t: p, bound,
    )
    return Trajectory(t=t, x=Z[:, :n], y=Z[:, n:], H=Hs, alpha=ps, dt=dt, integrator=Integrator.RK4, seed=seed)
