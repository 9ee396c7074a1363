"""Random instances and solver-versus-oracle campaigns."""
from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np

from .dynamics import Schedule, ScheduleKind, State, integrate_dopo, integrate_gradient_cim, integrate_kpo
from .ising import DEFAULT_ORACLE_CAP, IsingProblem, OracleCapError, brute_force, energy, sign_vector
from .solver import SolverConfig, resolve_schedule, solve_many

__all__ = [
    "Distribution",
    "InstanceSpec",
    "random_instance",
    "RunRecord",
    "BenchResult",
    "run_campaign",
    "SOLVERS",
    "canonical_seed_specs",
]

SOLVERS = ("sb", "cim", "dopo", "kpo")


class Distribution(str, enum.Enum):
    UNIFORM_PM1 = "uniform_pm1"  # uniform on [-1, 1]
    GAUSSIAN = "gaussian"
    SPIN_GLASS_PM1 = "spin_glass_pm1"  # entries exactly +-1


@dataclass(frozen=True)
class InstanceSpec:
    n: int
    distribution: Distribution = Distribution.SPIN_GLASS_PM1
    density: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "distribution", Distribution(self.distribution))
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")
        if not (0.0 < self.density <= 1.0):
            raise ValueError(f"density must lie in (0, 1], got {self.density}")


def random_instance(spec: InstanceSpec) -> IsingProblem:
    """Fill the strict upper triangle per distribution and density, then mirror it."""
    rng = np.random.default_rng(spec.seed)
    n = spec.n
    iu = np.triu_indices(n, k=1)
    m = len(iu[0])
    if spec.distribution is Distribution.UNIFORM_PM1:
        vals = rng.uniform(-1.0, 1.0, m)
    elif spec.distribution is Distribution.GAUSSIAN:
        vals = rng.standard_normal(m)
    else:
        vals = rng.choice(np.array([-1.0, 1.0]), m)
    keep = rng.random(m) < spec.density if spec.density < 1.0 else np.ones(m, dtype=bool)
    S = np.zeros((n, n))
    S[iu] = np.where(keep, vals, 0.0)
    S = S + S.T
    return IsingProblem(S, name=f"{spec.distribution.value}-n{n}-d{spec.density:g}-s{spec.seed}")


@dataclass(frozen=True)
class RunRecord:
    instance_seed: int
    run_seed: int
    oracle_energy: float
    solver_energy: float
    success: bool
    wall_time: float
    captured: bool
    capture_time: float | None
    spins: tuple[int, ...]

    def row(self) -> list:
        ct = "" if self.capture_time is None else self.capture_time
        return [self.instance_seed, self.run_seed, self.oracle_energy, self.solver_energy, int(self.success),
                self.wall_time, int(self.captured), ct, " ".join(str(s) for s in self.spins)]


RECORD_HEADER = ["instance_seed", "run_seed", "oracle_energy", "solver_energy", "success",
                 "wall_time", "captured", "capture_time", "spins"]


def _percentiles(vals, qs=(0, 25, 50, 75, 100)):
    vals = [v for v in vals if v is not None]
    if not vals:
        return None
    p = np.percentile(np.array(vals, dtype=float), qs)
    return {f"p{q}": float(v) for q, v in zip(qs, p)}


@dataclass
class BenchResult:
    solver: str
    per_instance: list[RunRecord]
    failures: list = field(default_factory=list, repr=False)

    @property
    def success_rate(self) -> float:
        if not self.per_instance:
            return float("nan")
        return sum(r.success for r in self.per_instance) / len(self.per_instance)

    @property
    def capture_rate(self) -> float:
        if not self.per_instance:
            return float("nan")
        return sum(r.captured for r in self.per_instance) / len(self.per_instance)

    def energy_violations(self) -> int:
        """Runs whose energy beats the exact oracle; always zero for a correct oracle."""
        return sum(r.solver_energy < r.oracle_energy for r in self.per_instance)

    def summary(self) -> dict:
        return {
            "solver": self.solver,
            "runs": len(self.per_instance),
            "instances": len({r.instance_seed for r in self.per_instance}),
            "success_rate": self.success_rate,
            "capture_rate": self.capture_rate,
            "capture_time": _percentiles([r.capture_time for r in self.per_instance]),
            "energy_gap": _percentiles([r.solver_energy - r.oracle_energy for r in self.per_instance]),
            "wall_time": _percentiles([r.wall_time for r in self.per_instance]),
        }

    def rows(self) -> list[list]:
        return [r.row() for r in self.per_instance]


def _other_solver(problem: IsingProblem, solver: str, seed: int, t_max: float):
    """Spins from one run of a non-SB flow; these report no capture."""
    n = problem.n
    rng = np.random.default_rng(seed)
    rho = max(problem.spectral_radius(), 1e-12)
    x0 = rng.uniform(-0.1, 0.1, n)
    if solver == "cim":
        eps = 0.5 / rho
        traj = integrate_gradient_cim(problem, 3.0, eps, State(x0), dt=1e-2, t_max=t_max, record_stride=100)
    elif solver == "dopo":
        xi = IsingProblem(problem.coupling / rho)
        p = float(np.max(np.linalg.eigvalsh(xi.coupling))) + 1.5 if n > 1 else 1.5
        traj = integrate_dopo(xi, p, x0, rng.uniform(-0.1, 0.1, n), dt=1e-2, t_max=t_max, record_stride=100)
    elif solver == "kpo":
        xi0 = 0.5 / rho
        sched = Schedule(ScheduleKind.LINEAR, 2.0, 0.0, 0.8 * t_max)
        traj = integrate_kpo(problem, 1.0, 1.0, xi0, sched, State(x0, np.zeros(n)), dt=1e-2, t_max=t_max, record_stride=100)
    else:
        raise ValueError(f"unknown solver {solver!r}; choose from {SOLVERS}")
    spins = sign_vector(traj.x[-1])
    return np.where(spins == 0, 1, spins).astype(np.int8), traj


def run_campaign(
    specs,
    solver_config: SolverConfig | None = None,
    runs_per_instance: int = 1,
    master_seed: int = 0,
    solver: str = "sb",
    oracle_cap: int = DEFAULT_ORACLE_CAP,
    timing: bool = False,
    other_t_max: float = 60.0,
) -> BenchResult:
    """Solve each instance ``runs_per_instance`` times and score against brute force.

    ``specs`` holds :class:`InstanceSpec` entries or ready :class:`IsingProblem`
    objects; the latter are keyed by their position in the list.

    Run seeds come from ``SeedSequence(master_seed)`` spawned per instance, so
    the result is a pure function of the arguments. Wall times are recorded as
    0.0 unless ``timing`` is set, which keeps reports byte-identical.
    Runs that miss the optimum are kept (with their trajectories) in ``failures``.
    """
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}; choose from {SOLVERS}")
    if runs_per_instance < 1:
        raise ValueError("runs_per_instance must be >= 1")
    items = []
    for k, item in enumerate(specs):
        if isinstance(item, IsingProblem):
            items.append((k, item))
        else:
            items.append((item.seed, item))
        n = items[-1][1].n
        if n > oracle_cap:
            raise OracleCapError(f"instance n={n} exceeds the oracle cap {oracle_cap}")
    config = solver_config or SolverConfig()
    children = np.random.SeedSequence(master_seed).spawn(len(items))
    records: list[RunRecord] = []
    failures = []
    order = sorted(range(len(items)), key=lambda k: items[k][0])
    for k in order:
        inst_seed, item = items[k]
        child = children[k]
        problem = item if isinstance(item, IsingProblem) else random_instance(item)
        oracle = brute_force(problem, cap=oracle_cap)
        run_seeds = [int(s) for s in child.generate_state(runs_per_instance)]
        t0 = time.perf_counter()
        if solver == "sb":
            plan = resolve_schedule(problem, config)
            outcomes = [(r.spins, r.trajectory, r.captured, r.report.capture_time)
                        for r in solve_many(problem, config, run_seeds, plan=plan)]
        else:
            outcomes = []
            for s in run_seeds:
                spins, traj = _other_solver(problem, solver, s, other_t_max)
                outcomes.append((spins, traj, False, None))
        per_run = (time.perf_counter() - t0) / runs_per_instance if timing else 0.0
        for s, (spins, traj, captured, ct) in zip(run_seeds, outcomes):
            e = energy(problem, spins)
            ok = e == oracle.min_energy
            rec = RunRecord(inst_seed, s, oracle.min_energy, e, bool(ok), per_run, bool(captured), ct,
                            tuple(int(v) for v in spins))
            records.append(rec)
            if not ok:
                failures.append((rec, traj))
    return BenchResult(solver, records, failures)


def canonical_seed_specs(n: int, count: int, distribution="spin_glass_pm1", density: float = 1.0, seed: int = 0):
    """``count`` instance specs with seeds ``seed, seed+1, ...``."""
    return [InstanceSpec(n, Distribution(distribution), density, seed + k) for k in range(count)]
