import numpy as np
import pytest

from isingflow.bench import Distribution, InstanceSpec, canonical_seed_specs, random_instance, run_campaign
from isingflow.ising import IsingProblem, OracleCapError, brute_force
from isingflow.solver import SolverConfig


def test_density_zero_rejected():
    with pytest.raises(ValueError):
        InstanceSpec(3, density=0.0)


def test_two_spin_uniform():
    p = random_instance(InstanceSpec(2, Distribution.UNIFORM_PM1, 1.0, 5))
    assert -1.0 <= p.coupling[0, 1] <= 1.0
    assert p.coupling[0, 1] == p.coupling[1, 0]


@pytest.mark.parametrize("dist", list(Distribution))
def test_instances_are_deterministic_and_valid(dist):
    spec = InstanceSpec(8, dist, 0.6, 11)
    a, b = random_instance(spec), random_instance(spec)
    assert np.array_equal(a.coupling, b.coupling)
    assert np.array_equal(a.coupling, a.coupling.T)
    assert np.all(np.diag(a.coupling) == 0)


def test_spin_glass_entries():
    p = random_instance(InstanceSpec(6, Distribution.SPIN_GLASS_PM1, 1.0, 0))
    off = p.coupling[~np.eye(6, dtype=bool)]
    assert set(off) == {-1.0, 1.0}


def test_gaussian_n10_even_minimizer_count():
    r = brute_force(random_instance(InstanceSpec(10, Distribution.GAUSSIAN, 1.0, 7)))
    assert len(r.minimizers) >= 2 and len(r.minimizers) % 2 == 0


def test_r2_campaign(s2):
    res = run_campaign([s2], runs_per_instance=100)
    assert res.success_rate == 1.0, [r for r, _ in res.failures]
    assert res.energy_violations() == 0


def test_zero_matrix_campaign(zero3):
    assert run_campaign([zero3], runs_per_instance=5).success_rate == 1.0


def test_s3_campaign_reports_rate(s3):
    res = run_campaign([s3], SolverConfig(beta=10.0, ramp_rate=0.5), runs_per_instance=10)
    assert 0.0 <= res.success_rate <= 1.0
    assert res.energy_violations() == 0
    summary = res.summary()
    assert summary["runs"] == 10 and summary["instances"] == 1


def test_campaign_is_reproducible():
    specs = canonical_seed_specs(4, 3)
    cfg = SolverConfig(ramp_rate=1.0)
    a = run_campaign(specs, cfg, runs_per_instance=2, master_seed=9)
    b = run_campaign(specs, cfg, runs_per_instance=2, master_seed=9)
    assert a.rows() == b.rows()
    assert a.summary() == b.summary()


def test_oracle_cap_enforced():
    with pytest.raises(OracleCapError):
        run_campaign([InstanceSpec(6)], oracle_cap=5)


@pytest.mark.parametrize("solver", ["cim", "dopo", "kpo"])
def test_other_solvers_run(s3, solver):
    res = run_campaign([s3], runs_per_instance=2, solver=solver, other_t_max=20.0)
    assert len(res.per_instance) == 2
    assert res.energy_violations() == 0
    assert not any(r.captured for r in res.per_instance)


def test_unknown_solver(s3):
    with pytest.raises(ValueError):
        run_campaign([s3], solver="anneal")
