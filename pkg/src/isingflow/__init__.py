"""Ising minimization through the critical points and dynamics of a quartic potential."""
from .bench import BenchResult, InstanceSpec, random_instance, run_campaign
from .capture import CaptureRule, capture_test, classify_trajectory, neck_linearize
from .closed_form import cubic_roots, r2_closed_form, r2_problem
from .dynamics import Integrator, Schedule, ScheduleKind, State, Trajectory, integrate_sb
from .estimators import CriticalPointAnalysis, DOPOSolver, GradientCIM, KPOSolver, SimulatedBifurcation
from .ising import IsingProblem, OracleResult, brute_force, energy, sign_vector
from .potential import (
    PotentialParams,
    calibrate,
    calibrate_alpha,
    classify,
    eval_U,
    find_critical_points,
    grad_U,
    hess_U,
)
from .solver import SolverConfig, solve

__version__ = "0.1.0"

__all__ = [
    "BenchResult",
    "CaptureRule",
    "CriticalPointAnalysis",
    "DOPOSolver",
    "GradientCIM",
    "Integrator",
    "InstanceSpec",
    "IsingProblem",
    "KPOSolver",
    "OracleResult",
    "PotentialParams",
    "Schedule",
    "ScheduleKind",
    "SimulatedBifurcation",
    "SolverConfig",
    "State",
    "Trajectory",
    "brute_force",
    "calibrate",
    "calibrate_alpha",
    "capture_test",
    "classify",
    "classify_trajectory",
    "cubic_roots",
    "energy",
    "eval_U",
    "find_critical_points",
    "grad_U",
    "hess_U",
    "integrate_sb",
    "neck_linearize",
    "r2_closed_form",
    "r2_problem",
    "random_instance",
    "run_campaign",
    "sign_vector",
    "solve",
]
