"""Exit criteria. Each test prints one ``CRITERION k: PASS|FAIL`` line with its measurements."""
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from isingflow.bench import Distribution, InstanceSpec, canonical_seed_specs, random_instance, run_campaign
from isingflow.capture import (
    NeckOrbit,
    TransitKind,
    classify_neck_orbit,
    classify_trajectory,
    default_nbhd_radius,
    linear_periodic_orbit,
    neck_linearize,
    periodic_orbit_ellipse,
    Orientation,
)
from isingflow.closed_form import cubic_roots, r2_closed_form
from isingflow.dynamics import (
    Schedule,
    State,
    Trajectory,
    dopo_critical_points,
    hamiltonian_sb,
    integrate_dopo,
    integrate_gradient_cim,
    integrate_sb,
    integrate_sb_batch,
)
from isingflow.ising import IsingProblem, brute_force, sign_vector
from isingflow.potential import (
    PotentialParams,
    calibrate,
    eval_U,
    find_critical_points,
    global_minima,
    grad_U,
    hess_U,
    minima_ordering_violations,
)
from isingflow.solver import SolverConfig, resolve_schedule, solve_many
from conftest import random_pm1

pytestmark = pytest.mark.acceptance


def verdict(capsys, number, checks):
    """``checks`` is a list of ``(name, ok, measured)``; prints one line and asserts."""
    ok = all(c[1] for c in checks)
    detail = "; ".join(f"{name}: {'ok' if good else 'FAILED'} [{info}]" for name, good, info in checks)
    with capsys.disabled():
        print(f"\nCRITERION {number}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


# ------------------------------------------------------------------------- 1


def test_criterion_01_table_rows(capsys, s2):
    t0 = time.perf_counter()
    expect = {0.9: 1, math.sqrt(2): 3, math.sqrt(3.5): 5, 5.0: 9}
    counts, worst, class_ok = {}, 0.0, True
    for alpha, count in expect.items():
        summary = find_critical_points(PotentialParams(alpha, 2.0, s2))
        cf = r2_closed_form(alpha, 2.0)
        counts[round(alpha, 4)] = len(summary.critical_points)
        found = summary.points_array()
        for p in cf.points:
            d = np.max(np.abs(found - np.array(p.x)), axis=1)
            k = int(np.argmin(d))
            worst = max(worst, float(d[k]))
            class_ok &= summary.critical_points[k].kind is p.kind
        class_ok &= len(cf.points) == count
    elapsed = time.perf_counter() - t0
    verdict(capsys, 1, [
        ("counts {1,3,5,9}", list(counts.values()) == [1, 3, 5, 9], f"{counts}"),
        ("classes match", class_ok, ""),
        ("componentwise <= 1e-8", worst <= 1e-8, f"max {worst:.1e}"),
        ("runtime < 1 s", elapsed < 1.0, f"{elapsed:.2f} s"),
    ])


# ------------------------------------------------------------------------- 2


def test_criterion_02_three_spin_example(capsys, s3):
    t0 = time.perf_counter()
    summary = find_critical_points(PotentialParams(5.0, 10.0, s3))
    elapsed = time.perf_counter() - t0
    minima = summary.minima
    signs = {tuple(int(v) for v in p.sign) for p in minima}
    gm = global_minima(summary)
    target = np.array([-3.5, 3.7, 4.0])
    loc = max(min(np.max(np.abs(p.x - target)), np.max(np.abs(p.x + target))) for p in gm)
    gm_signs = {tuple(int(v) for v in p.sign) for p in gm}
    oracle = {tuple(int(v) for v in m) for m in brute_force(s3).minimizers}
    verdict(capsys, 2, [
        ("27 points", len(summary.critical_points) == 27, f"{len(summary.critical_points)}"),
        ("8 minima covering signs", len(minima) == 8 and len(signs) == 8 and all(0 not in s for s in signs),
         f"{len(minima)} minima, {len(signs)} sign vectors"),
        ("global minima within 0.05 of +-(-3.5, 3.7, 4.0)", loc <= 0.05,
         f"found {[np.round(p.x, 3).tolist() for p in gm]}, max deviation {loc:.3f}"),
        ("global-minimum signs equal oracle minimizers", gm_signs == oracle, f"{sorted(gm_signs)}"),
        ("runtime < 1 s", elapsed < 1.0, f"{elapsed:.2f} s"),
    ])


# ------------------------------------------------------------------------- 3


def test_criterion_03_landscape_encodes_ground_states(capsys):
    rng = np.random.default_rng(2024)
    dists = list(Distribution)
    t0 = time.perf_counter()
    bad_sign = bad_order = 0
    sizes = []
    for k in range(50):
        n = int(rng.integers(3, 11))
        sizes.append(n)
        problem = random_instance(InstanceSpec(n, dists[k % 3], 1.0, 1000 + k))
        cal = calibrate(problem, 1.0)
        oracle = brute_force(problem)
        bad_sign += sum(not oracle.contains(p.sign) for p in global_minima(cal.summary))
        bad_order += minima_ordering_violations(problem, cal.summary)
    elapsed = time.perf_counter() - t0
    verdict(capsys, 3, [
        ("global-minimum signs are oracle minimizers", bad_sign == 0, f"{bad_sign} violations"),
        ("U-order gives non-decreasing E", bad_order == 0, f"{bad_order} violations"),
        ("runtime < 2 min", elapsed < 120, f"{elapsed:.1f} s for n in {min(sizes)}..{max(sizes)}"),
    ])


# ------------------------------------------------------------------------- 4


def test_criterion_04_derivatives(capsys):
    worst_g = worst_h = 0.0
    for k in range(10):
        n = 2 + k % 6
        problem = random_instance(InstanceSpec(n, Distribution.GAUSSIAN, 1.0, 50 + k))
        params = PotentialParams(3.0 + k, 1.0 + 0.5 * k, problem)
        X = np.random.default_rng(k).normal(scale=params.alpha, size=(100, n))
        G, Hs = grad_U(params, X), hess_U(params, X)
        for x, g, H in zip(X, G, Hs):
            h = 1e-5 * (1 + np.abs(x))
            E = np.diag(h)
            fd_g = np.array([(eval_U(params, x + e) - eval_U(params, x - e)) / (2 * hi) for e, hi in zip(E, h)])
            fd_H = np.array([(grad_U(params, x + e) - grad_U(params, x - e)) / (2 * hi) for e, hi in zip(E, h)])
            worst_g = max(worst_g, np.linalg.norm(g - fd_g) / max(np.linalg.norm(g), 1e-300))
            worst_h = max(worst_h, np.linalg.norm(H - fd_H) / max(np.linalg.norm(H), 1e-300))
    verdict(capsys, 4, [
        ("gradient rel. error < 1e-6", worst_g < 1e-6, f"max {worst_g:.1e} over 1000 points"),
        ("Hessian rel. error < 1e-5", worst_h < 1e-5, f"max {worst_h:.1e}"),
    ])


# ------------------------------------------------------------------------- 5


def _drift(problem, beta, alpha, init, dt):
    tr = integrate_sb(problem, beta, Schedule.constant(alpha), init, dt=dt, t_max=10)
    return float(np.max(np.abs(tr.H - tr.H[0]))), float(tr.H[0])


def _descent_violations(H):
    return int(np.sum(np.diff(H) > 1e-9 * (1 + np.abs(H[:-1]))))


def test_criterion_05_conservation_and_descent(capsys, s2, s3):
    checks = []
    rng = np.random.default_rng(5)
    # constant alpha, states in the wells where the solver operates
    cases = []
    for alpha in (2.5, 4.0):
        l1 = r2_closed_form(alpha, 2.0).lambda1
        for off in (0.05, 0.2):
            cases.append((s2, 2.0, alpha, State(np.array([l1, l1]) + off * rng.normal(size=2), off * rng.normal(size=2))))
    m3 = global_minima(find_critical_points(PotentialParams(5.0, 10.0, s3)))[0].x
    cases.append((s3, 10.0, 5.0, State(m3 + 0.05 * rng.normal(size=3), 0.05 * rng.normal(size=3))))
    within, ratios = True, []
    for problem, beta, alpha, init in cases:
        d1, H0 = _drift(problem, beta, alpha, init, 1e-3)
        d2, _ = _drift(problem, beta, alpha, init, 5e-4)
        within &= d1 <= 1e-4 * (1 + abs(H0))
        ratios.append(d1 / d2)
    checks.append(("constant-alpha drift <= 1e-4 (1+|H0|)", within, f"{len(cases)} near-minimum starts"))
    checks.append(("drift halves with dt", all(1.7 < r < 2.3 for r in ratios), f"ratios {np.round(ratios, 2).tolist()}"))

    viol = 0
    for problem, beta, a_inf in ((s2, 2.0, 5.0), (s3, 10.0, 20.0)):
        for seed in range(3):
            x0 = np.random.default_rng(seed).uniform(-0.1, 0.1, problem.n)
            tr = integrate_sb(problem, beta, Schedule("linear", a_inf, 0.0, 50.0), State(x0), dt=1e-2, t_max=80,
                              method="discrete_gradient")
            viol += _descent_violations(tr.H)
    checks.append(("ramped SB non-increasing H (discrete gradient)", viol == 0, f"{viol} violations in 6 runs"))

    viol = 0
    for seed in range(5):
        problem = random_pm1(6, seed)
        x0 = np.random.default_rng(seed).uniform(-0.1, 0.1, 6)
        tr = integrate_gradient_cim(problem, 3.0, 0.5 / problem.spectral_radius(), State(x0), dt=1e-2, t_max=40)
        viol += _descent_violations(tr.H)
        xi = IsingProblem(problem.coupling / problem.spectral_radius())
        tr = integrate_dopo(xi, 2.0, x0, np.random.default_rng(seed + 9).uniform(-0.1, 0.1, 6), dt=1e-2, t_max=40)
        viol += _descent_violations(tr.H)
    checks.append(("CIM U_c and DOPO U_d non-increasing", viol == 0, f"{viol} violations in 10 runs"))
    verdict(capsys, 5, checks)


# ------------------------------------------------------------------------- 6


def test_criterion_06_quadrature_vanishes(capsys):
    worst_s, worst_newton, converged = 0.0, 0.0, 0
    for k in range(20):
        problem = random_instance(InstanceSpec(3 + k % 6, Distribution.GAUSSIAN, 1.0, 300 + k))
        xi = IsingProblem(problem.coupling / problem.spectral_radius())
        p = float(np.max(np.linalg.eigvalsh(xi.coupling))) + 1.5
        rng = np.random.default_rng(k)
        n = problem.n
        tr = integrate_dopo(xi, p, rng.uniform(-0.1, 0.1, n), rng.uniform(-0.1, 0.1, n), dt=1e-2, t_max=40)
        worst_s = max(worst_s, float(np.max(np.abs(tr.y[-1]))))
        Z, _, ok = dopo_critical_points(xi, p, rng.normal(scale=2.0, size=(50, 2 * n)))
        converged += int(ok.sum())
        if ok.any():
            worst_newton = max(worst_newton, float(np.max(np.abs(Z[ok][:, n:]))))
    verdict(capsys, 6, [
        ("terminal |s|_inf <= 1e-6", worst_s <= 1e-6, f"max {worst_s:.1e} over 20 instances"),
        ("Newton limits have |s| <= 1e-8", worst_newton <= 1e-8 and converged > 0,
         f"max {worst_newton:.1e} over {converged} converged of 1000 seeds"),
    ])


# ------------------------------------------------------------------------- 7


def _capture_violations(results):
    persist = signs = fired = 0
    for r in results:
        ic = r.trajectory.in_capture
        if not ic.any():
            continue
        fired += 1
        k = int(np.argmax(ic))
        persist += int(not ic[k:].all())
        sg = sign_vector(r.trajectory.x[k:])
        signs += int(not (sg == sg[0]).all())
    return fired, persist, signs


def test_criterion_07_capture_is_final(capsys, s2, s3):
    t0 = time.perf_counter()
    checks = []
    for label, problem, beta, m in (("n=2", s2, 1.0, 200), ("S3", s3, 10.0, 100)):
        cfg = SolverConfig(beta=beta, ramp_rate=0.5, stop_on_capture=False)
        res = solve_many(problem, cfg, range(m), plan=resolve_schedule(problem, cfg))
        fired, persist, signs = _capture_violations(res)
        checks.append((f"{label} capture persists", persist == 0, f"{persist} of {fired} fired runs"))
        checks.append((f"{label} signs frozen after capture", signs == 0, f"{signs} of {fired}"))
    elapsed = time.perf_counter() - t0
    checks.append(("runtime < 1 min", elapsed < 60, f"{elapsed:.1f} s"))
    verdict(capsys, 7, checks)


# ------------------------------------------------------------------------- 8


def _neck_runs(problem, beta, alpha, count, rng, T=8.0, dt=1e-3):
    """States on the saddle's transit side, integrated backward and forward into one trajectory each."""
    na = neck_linearize(beta, alpha)
    U_s = float(eval_U(PotentialParams(alpha, beta, problem), na.saddle))
    Z, H0 = [], []
    while len(Z) < count:
        r = rng.uniform(1e-3, 1e-2)
        k = rng.uniform(0.2, 5.0)
        xi1, xi2 = r, -r * k
        z = na.linear_state(xi1, xi2)
        h = float(hamiltonian_sb(problem, beta, alpha, (z[2:], z[:2])))
        if h > U_s and classify_neck_orbit(xi1, xi2) is NeckOrbit.SADDLE_TRANSIT:
            Z.append(z)
            H0.append(h)
    Z = np.array(Z)
    sched = Schedule.constant(alpha)
    fwd = integrate_sb_batch(problem, beta, sched, Z[:, 2:], Z[:, :2], dt=dt, t_max=T, record_stride=10)
    bwd = integrate_sb_batch(problem, beta, sched, Z[:, 2:], -Z[:, :2], dt=dt, t_max=T, record_stride=10)
    trajs = []
    for i in range(count):
        x = np.vstack([bwd["x"][i][::-1], fwd["x"][i][1:]])
        t = np.concatenate([-bwd["t"][::-1], fwd["t"][1:]])
        trajs.append(Trajectory(t, x, None, np.zeros(len(t)), np.full(len(t), alpha), dt, "leapfrog"))
    return trajs, H0, U_s


def test_criterion_08_transit_threshold(capsys, s2):
    alpha, beta = 4.0, 2.0
    summary = find_critical_points(PotentialParams(alpha, beta, s2))
    U_s = summary.U_s
    radius = default_nbhd_radius(summary)
    minima = [p.x for p in summary.minima]
    rng = np.random.default_rng(8)
    X0, Y0 = [], []
    while len(X0) < 100:
        m = minima[rng.integers(len(minima))]
        d = rng.normal(size=2)
        x = m + d / np.linalg.norm(d) * radius * rng.uniform(0, 0.9)
        y = rng.normal(scale=3.0, size=2)
        if hamiltonian_sb(s2, beta, alpha, (x, y)) < U_s:
            X0.append(x)
            Y0.append(y)
    out = integrate_sb_batch(s2, beta, Schedule.constant(alpha), np.array(X0), np.array(Y0), dt=1e-3, t_max=50,
                             record_stride=5)
    transits = 0
    for i in range(100):
        tr = Trajectory(out["t"], out["x"][i], out["y"][i], out["H"][i], out["alpha"], 1e-3, "symplectic_euler")
        transits += classify_trajectory(tr, summary).kind is TransitKind.TRANSIT

    trajs, H0, U_neck = _neck_runs(s2, beta, alpha, 10, rng)
    crossed = sum(classify_trajectory(tr, summary).kind is TransitKind.TRANSIT for tr in trajs)
    verdict(capsys, 8, [
        ("H(0) < U_s never transits", transits == 0, f"{transits} of 100, U_s = {U_s:.4f}"),
        ("neck runs with H(0) > U_s, xi1 xi2 < 0 all transit", crossed == 10 and min(H0) > U_neck,
         f"{crossed} of 10"),
    ])


# ------------------------------------------------------------------------- 9


def test_criterion_09_neck_linearization(capsys, s2):
    beta, alpha = 2.0, math.sqrt(6.0)
    na = neck_linearize(beta, alpha)
    resid = max(max(na.eigvec_residuals()), max(abs(na.charpoly(m)) for m in na.eigenvalues))

    # cross versus bounce: side of the neck along the hyperbolic direction (u, 1),
    # which is orthogonal to the elliptic direction (-v, 1) since u v = 1
    rng = np.random.default_rng(9)
    rows = []
    while len(rows) < 200:
        p = rng.normal(size=4)
        p *= rng.uniform(0, 1e-3) / np.linalg.norm(p)
        if abs(p[0] * p[1]) >= 1e-6 * (p @ p):
            rows.append(p)
    Z = np.array([na.linear_state(p[0], p[1], complex(p[2], p[3])) for p in rows])
    T, dt = 3.0, 1e-3
    sched = Schedule.constant(alpha)
    fwd = integrate_sb_batch(s2, beta, sched, Z[:, 2:], Z[:, :2], dt=dt, t_max=T, record_stride=3000)
    bwd = integrate_sb_batch(s2, beta, sched, Z[:, 2:], -Z[:, :2], dt=dt, t_max=T, record_stride=3000)
    axis = np.array([na.u, 1.0])
    crossed = np.sign((fwd["x"][:, -1] - na.saddle) @ axis) != np.sign((bwd["x"][:, -1] - na.saddle) @ axis)
    predicted = np.array([classify_neck_orbit(p[0], p[1]) is NeckOrbit.SADDLE_TRANSIT for p in rows])
    agree = float(np.mean(crossed == predicted))

    # periodic orbit against the predicted ellipse (axes 2 v |eta| and 2 |eta|, ratio v)
    eta = 1e-4
    major, minor, orient = periodic_orbit_ellipse(na, eta)
    period = 2 * math.pi / na.mu2_im
    z0 = linear_periodic_orbit(na, eta, 0.0)
    per = integrate_sb_batch(s2, beta, sched, z0[None, 2:], z0[None, :2], dt=1e-4, t_max=period, method="leapfrog")
    X = per["x"][0] - na.saddle
    theta = np.linspace(0, 2 * np.pi, 20001)
    ellipse = np.stack([major * np.cos(theta), minor * np.sin(theta)], axis=1)
    dist = max(float(np.min(np.linalg.norm(ellipse - x, axis=1))) for x in X[::25])
    verdict(capsys, 9, [
        ("eigen residuals <= 1e-10", resid <= 1e-10, f"{resid:.1e}"),
        ("cross/bounce agreement >= 95%", agree >= 0.95, f"{100 * agree:.1f}% of 200"),
        ("periodic orbit within 1e-6 of ellipse", dist <= 1e-6, f"max distance {dist:.2e}"),
        ("ratio v and clockwise", math.isclose(major / minor, na.v) and orient is Orientation.CLOCKWISE,
         f"ratio {major / minor:.4f}"),
    ])


def test_criterion_09_supporting_periodic_orbit_follows_linear_solution(s2):
    """What the nonlinear orbit does satisfy: it tracks the linear solution up to O(|eta|**2)."""
    beta, alpha = 2.0, math.sqrt(6.0)
    na = neck_linearize(beta, alpha)
    period = 2 * math.pi / na.mu2_im
    devs, off_line = [], []
    normal = np.array([1.0, na.v]) / math.hypot(1.0, na.v)
    for eta in (1e-4, 5e-5):
        z0 = linear_periodic_orbit(na, eta, 0.0)
        out = integrate_sb_batch(s2, beta, Schedule.constant(alpha), z0[None, 2:], z0[None, :2], dt=1e-4,
                                 t_max=period, method="leapfrog")
        lin = linear_periodic_orbit(na, eta, out["t"])
        devs.append(float(np.max(np.abs(out["x"][0] - lin[:, 2:]))))
        # distance of the x-projection from the line through the saddle along (-v, 1)
        off_line.append(float(np.max(np.abs((out["x"][0] - na.saddle) @ normal))))
    assert devs[0] < 2e-5
    assert 3.0 < devs[0] / devs[1] < 5.0
    assert off_line[0] < 0.2 * 1e-4
    assert 3.0 < off_line[0] / off_line[1] < 5.0


# ------------------------------------------------------------------------ 10


def test_criterion_10_appendix_asymptotics(capsys):
    alpha, eps = 1e3, 0.1
    checks = []
    for sign in (1, -1):
        r = cubic_roots(alpha, eps, sign)
        resid = max(abs(x**3 / alpha**2 - x + sign * eps) for x in r)
        checks.append((f"sign {sign:+d} residuals <= 1e-12", resid <= 1e-12, f"{resid:.1e}"))
        checks.append((f"sign {sign:+d} outer roots", abs(abs(r[0] + alpha) - eps / 2) <= 1e-3
                       and abs(abs(r[2] - alpha) - eps / 2) <= 1e-3,
                       f"|x1+a| = {abs(r[0] + alpha):.8f}, |x3-a| = {abs(r[2] - alpha):.8f}"))
        checks.append((f"sign {sign:+d} middle root", abs(abs(r[1]) - eps) <= 1e-3, f"|x2| = {abs(r[1]):.9f}"))
    verdict(capsys, 10, checks)


# ------------------------------------------------------------------------ 11


def test_criterion_11_cli_determinism(capsys, tmp_path):
    s2 = tmp_path / "s2.json"
    s2.write_text('{"n": 2, "coupling": [[0, 1], [1, 0]]}')
    s3 = tmp_path / "s3.json"
    s3.write_text('{"n": 3, "coupling": [[0, 1, -2], [1, 0, 3], [-2, 3, 0]]}')
    commands = [
        ["solve", "--problem", s3, "--beta", "10", "--seed", "11", "--ramp-rate", "1", "--trace", "{o}/a.csv",
         "--report", "{o}/b.json"],
        ["solve", "--problem", s2, "--seed", "42", "--runs", "3"],
        ["landscape", "--problem", s2, "--beta", "2", "--alpha", "5", "--points", "{o}/a.csv", "--grid", "{o}/b.csv",
         "--grid-num", "31", "--hill", "{o}/c.csv", "--hill-level", "-60", "--hill-num", "31"],
        ["trace", "--problem", s3, "--beta", "10", "--schedule", "linear", "--alpha-inf", "20", "--seed", "4",
         "--t-max", "20", "--out", "{o}/a.csv"],
        ["capture", "--problem", s2, "--alpha-inf", "10", "--t", "90", "--x", "9.9,9.9"],
        ["neck"],
        ["bifurcate", "--beta", "2", "--alpha", "5"],
        ["bench", "--n", "4", "--count", "3", "--runs", "2", "--ramp-rate", "1", "--csv", "{o}/a.csv"],
        ["bench", "--n", "4", "--count", "2", "--solver", "dopo", "--csv", "{o}/a.csv"],
        ["oracle", "--problem", s3],
    ]
    mismatched = []
    for argv in commands:
        outs = []
        for k in range(2):
            d = tmp_path / f"run{k}"
            d.mkdir(exist_ok=True)
            args = [str(a).format(o=d) for a in argv]
            proc = subprocess.run([sys.executable, "-m", "isingflow.cli", *args], capture_output=True)
            files = {p.name: p.read_bytes() for p in sorted(d.iterdir())}
            outs.append((proc.returncode, proc.stdout, files))
            for p in d.iterdir():
                p.unlink()
        if outs[0] != outs[1] or outs[0][0] not in (0, 3):
            mismatched.append(argv[0])
    verdict(capsys, 11, [
        ("repeat invocations byte-identical", not mismatched, f"{len(commands)} invocations, mismatched: {mismatched}"),
    ])


# ------------------------------------------------------------------------ 12


@pytest.mark.slow
def test_criterion_12_benchmark_report(capsys):
    specs = canonical_seed_specs(12, 100, "spin_glass_pm1")
    cfg = SolverConfig(ramp_rate=0.5)
    t0 = time.perf_counter()
    res = run_campaign(specs, cfg, runs_per_instance=1, master_seed=12)
    elapsed = time.perf_counter() - t0
    again = run_campaign(specs[:5], cfg, runs_per_instance=1, master_seed=12)
    same = again.rows() == res.rows()[:5]
    s = res.summary()
    ct = s["capture_time"]
    ct_txt = "none" if ct is None else f"median {ct['p50']:.1f}, range {ct['p0']:.1f}..{ct['p100']:.1f}"
    verdict(capsys, 12, [
        ("reproducible", same, "first 5 instances rerun"),
        ("solver E >= oracle E", res.energy_violations() == 0, f"{res.energy_violations()} violations"),
        ("report", True, f"success rate {res.success_rate:.2f}, capture rate {res.capture_rate:.2f}, "
                         f"capture time {ct_txt}, {elapsed:.0f} s"),
    ])
