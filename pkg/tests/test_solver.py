import numpy as np
import pytest

from isingflow.ising import IsingProblem, brute_force, energy
from isingflow.solver import SolverConfig, resolve_schedule, solve, solve_many


def test_r2_seed_42(s2):
    res = solve(s2, SolverConfig(seed=42))
    assert tuple(res.spins) in {(1, 1), (-1, -1)}
    assert res.captured and res.report.status == "captured"
    assert res.energy == -1


def test_s3_majority(s3):
    cfg = SolverConfig(beta=10.0)
    res = solve_many(s3, cfg, range(20))
    oracle = brute_force(s3)
    assert sum(oracle.contains(r.spins) for r in res) > 10


def test_zero_matrix_any_answer_is_optimal(zero3):
    res = solve(zero3, SolverConfig(seed=3))
    assert energy(zero3, res.spins) == 0.0
    assert set(np.abs(res.spins)) == {1}


def test_solve_is_deterministic(s3):
    cfg = SolverConfig(beta=10.0, seed=7, ramp_rate=1.0)
    a, b = solve(s3, cfg), solve(s3, cfg)
    assert np.array_equal(a.spins, b.spins)
    assert np.array_equal(a.trajectory.x, b.trajectory.x)
    assert a.report.to_dict() == b.report.to_dict()


def test_batch_equals_single(s3):
    cfg = SolverConfig(beta=10.0, ramp_rate=1.0)
    plan = resolve_schedule(s3, cfg)
    batch = solve_many(s3, cfg, [4, 9], plan=plan)
    single = solve_many(s3, cfg, [9], plan=plan)
    assert np.array_equal(batch[1].trajectory.x, single[0].trajectory.x)


def test_plan_defaults(s2):
    plan = resolve_schedule(s2, SolverConfig())
    assert plan.verified
    assert plan.schedule.alpha_inf == pytest.approx(8.5 * plan.alpha_star)
    assert plan.rule.preconditions_met


def test_uncaptured_above_capture_cap():
    rng = np.random.default_rng(0)
    S = np.triu(rng.choice([-1.0, 1.0], size=(4, 4)), 1)
    res = solve(IsingProblem(S + S.T), SolverConfig(capture_max_n=3, calibrate_max_n=3))
    assert not res.captured
    assert not res.report.capture_available
    assert set(np.abs(res.spins)) == {1}


@pytest.mark.parametrize(
    "kw",
    [dict(beta=0.0), dict(ramp_rate=-1.0), dict(dt=0.0), dict(integrator="euler"), dict(seed=-1),
     dict(capture_check_stride=0)],
)
def test_config_validation(kw):
    with pytest.raises((ValueError, TypeError)):
        SolverConfig(**kw)


def test_config_round_trip():
    cfg = SolverConfig(beta=3.0, seed=5)
    assert SolverConfig(**cfg.to_dict()) == cfg
    assert cfg.replace(seed=6).seed == 6
