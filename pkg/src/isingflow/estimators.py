"""scikit-learn style front ends.

The "data" passed to ``fit`` is the coupling matrix itself (or an
:class:`~isingflow.ising.IsingProblem`); fitted solvers expose the spin
configuration as ``spins_`` and its Ising energy as ``energy_``.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .dynamics import Schedule, ScheduleKind, State, integrate_dopo, integrate_gradient_cim, integrate_kpo
from .ising import IsingProblem, energy, sign_vector
from .potential import PotentialParams, calibrate, eval_U, find_critical_points, global_minima
from .solver import SolverConfig, resolve_schedule, solve_many
from .validation import check_points, check_positive, check_problem, check_seed

__all__ = [
    "SimulatedBifurcation",
    "GradientCIM",
    "DOPOSolver",
    "KPOSolver",
    "CriticalPointAnalysis",
]


def _readout(x) -> np.ndarray:
    s = sign_vector(x)
    return np.where(s == 0, 1, s).astype(np.int8)


class _SpinSolverMixin:
    def fit_predict(self, S, y=None):
        return self.fit(S).spins_

    def score(self, S, y=None):
        """Negative Ising energy of the fitted spins on ``S`` (higher is better)."""
        check_is_fitted(self, "spins_")
        return -energy(check_problem(S), self.spins_)


class SimulatedBifurcation(_SpinSolverMixin, BaseEstimator):
    """Ramped SB with the capture stopping rule.

    With ``n_runs > 1`` the runs advance in one batch from seeds
    ``random_state, random_state + 1, ...`` and the lowest-energy result is
    kept (ties go to the earliest seed). ``None`` parameters are derived from
    the instance as described in :class:`~isingflow.solver.SolverConfig`.
    """

    def __init__(
        self,
        beta=1.0,
        alpha_inf=None,
        alpha_factor=8.5,
        ramp_rate=0.1,
        dt=None,
        t_max=None,
        integrator="symplectic_euler",
        n_runs=1,
        capture_check_stride=10,
        record_stride=10,
        random_state=0,
    ):
        self.beta = beta
        self.alpha_inf = alpha_inf
        self.alpha_factor = alpha_factor
        self.ramp_rate = ramp_rate
        self.dt = dt
        self.t_max = t_max
        self.integrator = integrator
        self.n_runs = n_runs
        self.capture_check_stride = capture_check_stride
        self.record_stride = record_stride
        self.random_state = random_state

    def _config(self) -> SolverConfig:
        return SolverConfig(
            beta=check_positive("beta", self.beta),
            alpha_inf=check_positive("alpha_inf", self.alpha_inf, allow_none=True),
            alpha_factor=check_positive("alpha_factor", self.alpha_factor),
            ramp_rate=check_positive("ramp_rate", self.ramp_rate),
            dt=check_positive("dt", self.dt, allow_none=True),
            t_max=check_positive("t_max", self.t_max, allow_none=True),
            integrator=self.integrator,
            seed=check_seed(self.random_state),
            capture_check_stride=self.capture_check_stride,
            record_stride=self.record_stride,
        )

    def fit(self, S, y=None):
        problem = check_problem(S)
        if int(self.n_runs) < 1:
            raise ValueError("n_runs must be >= 1")
        config = self._config()
        plan = resolve_schedule(problem, config)
        seeds = range(config.seed, config.seed + int(self.n_runs))
        self.results_ = solve_many(problem, config, seeds, plan=plan)
        best = min(range(len(self.results_)), key=lambda k: self.results_[k].energy)
        res = self.results_[best]
        self.spins_ = res.spins
        self.energy_ = res.energy
        self.captured_ = res.captured
        self.trajectory_ = res.trajectory
        self.report_ = res.report
        self.alpha_star_ = plan.alpha_star
        self.n_features_in_ = problem.n
        return self


class GradientCIM(_SpinSolverMixin, BaseEstimator):
    """Gradient-flow CIM at fixed pump ``p`` and coupling scale ``eps``."""

    def __init__(self, p=3.0, eps=None, dt=1e-2, t_max=60.0, init_scale=0.1, random_state=0):
        self.p = p
        self.eps = eps
        self.dt = dt
        self.t_max = t_max
        self.init_scale = init_scale
        self.random_state = random_state

    def fit(self, S, y=None):
        problem = check_problem(S)
        eps = self.eps
        if eps is None:
            eps = 0.5 / max(problem.spectral_radius(), 1e-12)
        rng = np.random.default_rng(check_seed(self.random_state))
        x0 = rng.uniform(-self.init_scale, self.init_scale, problem.n)
        self.trajectory_ = integrate_gradient_cim(
            problem, check_positive("p", self.p), check_positive("eps", eps), State(x0),
            dt=check_positive("dt", self.dt), t_max=check_positive("t_max", self.t_max),
            seed=self.random_state,
        )
        self.spins_ = _readout(self.trajectory_.x[-1])
        self.energy_ = energy(problem, self.spins_)
        self.n_features_in_ = problem.n
        return self


class DOPOSolver(_SpinSolverMixin, BaseEstimator):
    """Two-quadrature CIM flow; ``p=None`` picks ``lambda_max(Xi) + 1.5`` where ``s`` decays.

    The coupling is used as ``Xi`` after dividing by its spectral radius
    unless ``normalize=False``.
    """

    def __init__(self, p=None, normalize=True, dt=1e-2, t_max=60.0, init_scale=0.1, random_state=0):
        self.p = p
        self.normalize = normalize
        self.dt = dt
        self.t_max = t_max
        self.init_scale = init_scale
        self.random_state = random_state

    def fit(self, S, y=None):
        problem = check_problem(S)
        Xi = problem.coupling
        if self.normalize:
            Xi = Xi / max(problem.spectral_radius(), 1e-12)
        xi = IsingProblem(Xi)
        p = self.p
        if p is None:
            p = float(np.max(np.linalg.eigvalsh(Xi))) + 1.5
        rng = np.random.default_rng(check_seed(self.random_state))
        c0 = rng.uniform(-self.init_scale, self.init_scale, problem.n)
        s0 = rng.uniform(-self.init_scale, self.init_scale, problem.n)
        self.trajectory_ = integrate_dopo(
            xi, float(p), c0, s0, dt=check_positive("dt", self.dt), t_max=check_positive("t_max", self.t_max),
            seed=self.random_state,
        )
        self.p_ = float(p)
        self.spins_ = _readout(self.trajectory_.x[-1])
        self.energy_ = energy(problem, self.spins_)
        self.n_features_in_ = problem.n
        return self


class KPOSolver(_SpinSolverMixin, BaseEstimator):
    """KPO network with a linear pump ramp to ``p_inf`` over ``ramp_time``."""

    def __init__(self, K=1.0, Delta=1.0, xi0=None, p_inf=2.0, ramp_time=48.0, dt=1e-2, t_max=60.0,
                 init_scale=0.1, random_state=0):
        self.K = K
        self.Delta = Delta
        self.xi0 = xi0
        self.p_inf = p_inf
        self.ramp_time = ramp_time
        self.dt = dt
        self.t_max = t_max
        self.init_scale = init_scale
        self.random_state = random_state

    def fit(self, S, y=None):
        problem = check_problem(S)
        xi0 = self.xi0 if self.xi0 is not None else 0.5 / max(problem.spectral_radius(), 1e-12)
        sched = Schedule(ScheduleKind.LINEAR, check_positive("p_inf", self.p_inf), 0.0,
                         check_positive("ramp_time", self.ramp_time))
        rng = np.random.default_rng(check_seed(self.random_state))
        x0 = rng.uniform(-self.init_scale, self.init_scale, problem.n)
        self.trajectory_ = integrate_kpo(
            problem, check_positive("K", self.K), check_positive("Delta", self.Delta), check_positive("xi0", xi0),
            sched, State(x0, np.zeros(problem.n)), dt=check_positive("dt", self.dt),
            t_max=check_positive("t_max", self.t_max), seed=self.random_state,
        )
        self.spins_ = _readout(self.trajectory_.x[-1])
        self.energy_ = energy(problem, self.spins_)
        self.n_features_in_ = problem.n
        return self


class CriticalPointAnalysis(TransformerMixin, BaseEstimator):
    """Enumerate the critical points of ``U`` for a coupling matrix.

    ``alpha=None`` calibrates it first. After ``fit``, ``transform`` maps
    points of R^n to their sign vectors (the spin readout) and
    ``score_samples`` evaluates ``U`` at them.
    """

    def __init__(self, alpha=None, beta=1.0, max_n=16):
        self.alpha = alpha
        self.beta = beta
        self.max_n = max_n

    def fit(self, S, y=None):
        problem = check_problem(S)
        beta = check_positive("beta", self.beta)
        if self.alpha is None:
            cal = calibrate(problem, beta, max_n=self.max_n)
            alpha, self.alpha_verified_ = cal.alpha, cal.verified
        else:
            alpha, self.alpha_verified_ = check_positive("alpha", self.alpha), False
        self.params_ = PotentialParams(alpha, beta, problem)
        self.landscape_ = find_critical_points(self.params_, max_n=self.max_n)
        self.alpha_ = alpha
        self.global_minima_ = global_minima(self.landscape_)
        self.n_features_in_ = problem.n
        return self

    def transform(self, X):
        check_is_fitted(self, "landscape_")
        return sign_vector(check_points(X, self.n_features_in_))

    def score_samples(self, X):
        check_is_fitted(self, "landscape_")
        return eval_U(self.params_, check_points(X, self.n_features_in_))
