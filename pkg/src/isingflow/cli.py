"""``isingflow`` command line.

Exit codes: 0 success, 2 usage or input error, 3 solver finished without a
certified capture, 4 numeric blow-up, 1 anything else. Results go to stdout
as JSON (or CSV where noted); logs go to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import RECORD_HEADER, SOLVERS, Distribution, InstanceSpec, run_campaign
from .capture import CaptureRule, neck_linearize, periodic_orbit_ellipse
from .closed_form import BifurcationError, r2_closed_form
from .dynamics import BlowUpError, Schedule, ScheduleKind, State, integrate_sb
from .fileio import (
    ProblemFormatError,
    load_problem,
    read_rows,
    write_critical_points_csv,
    write_grid_csv,
    write_hill_mask_csv,
    write_rows,
    write_trace_csv,
)
from .ising import OracleCapError, brute_force
from .potential import PotentialParams, calibrate, find_critical_points
from .solver import SolverConfig, solve_many

log = logging.getLogger("isingflow")

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_UNCAPTURED, EXIT_BLOWUP = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


# Defaults per subcommand. Flags default to None so a config file can fill
# whatever the command line leaves unset.
DEFAULTS = {
    "solve": {
        "problem": None, "beta": 1.0, "seed": 0, "runs": 1, "alpha_inf": None, "alpha_factor": 8.5,
        "ramp_rate": 0.1, "dt": None, "t_max": None, "integrator": "symplectic_euler",
        "trace": None, "report": None,
    },
    "landscape": {
        "problem": None, "beta": 1.0, "alpha": None, "points": None, "grid": None, "grid_num": 101,
        "hill": None, "hill_level": None, "hill_num": 201,
    },
    "trace": {
        "problem": None, "beta": 1.0, "schedule": "constant", "alpha": None, "alpha_inf": None,
        "ramp_time": 10.0, "x0": None, "y0": None, "seed": 0, "dt": 1e-2, "t_max": 10.0,
        "record_stride": 1, "integrator": "symplectic_euler", "out": None,
    },
    "capture": {
        "problem": None, "beta": 1.0, "alpha_star": None, "alpha_inf": None, "ramp_time": None,
        "ramp_rate": 0.1, "t": None, "x": None, "y": None, "trace": None, "out": None,
    },
    "neck": {"beta": 2.0, "alpha": math.sqrt(6.0), "eta": 1e-4},
    "bifurcate": {"beta": None, "alpha": None},
    "bench": {
        "n": 8, "count": 10, "dist": "spin_glass_pm1", "density": 1.0, "seed": 0, "runs": 1, "solver": "sb",
        "ramp_rate": 0.1, "alpha_factor": 8.5, "csv": None, "dump_failures": None, "timing": False,
    },
    "oracle": {"problem": None, "cap": 24},
}


def _floats(text):
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a list of numbers, got {text!r}") from None


def _add(p, cmd, flag, **kw):
    dest = flag.lstrip("-").replace("-", "_")
    default = DEFAULTS[cmd][dest]
    kw["help"] = (kw.get("help", "") + f" (default: {default})").strip()
    p.add_argument(flag, dest=dest, default=None, **kw)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="isingflow", description="Ising minimization by quartic-potential dynamics.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0, help="log more to stderr (repeatable)")
    ap.add_argument("--config", help="JSON file of option values; command-line flags take precedence")
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("solve", help="run SB with the capture stopping rule; prints the spins")
    _add(p, "solve", "--problem", help="problem JSON")
    _add(p, "solve", "--beta", type=float)
    _add(p, "solve", "--seed", type=int)
    _add(p, "solve", "--runs", type=int, help="independent runs from seed, seed+1, ...; the best is printed")
    _add(p, "solve", "--alpha-inf", type=float, help="pump plateau; derived from the calibrated alpha when unset")
    _add(p, "solve", "--alpha-factor", type=float, help="alpha_inf = factor * calibrated alpha")
    _add(p, "solve", "--ramp-rate", type=float, help="pump increase per unit time")
    _add(p, "solve", "--dt", type=float, help="time step; derived from the fastest linear frequency when unset")
    _add(p, "solve", "--t-max", type=float, help="final time; 1.5 * ramp time when unset")
    _add(p, "solve", "--integrator", choices=["symplectic_euler", "leapfrog", "discrete_gradient"])
    _add(p, "solve", "--trace", help="write the trajectory CSV here")
    _add(p, "solve", "--report", help="write the JSON run report here")

    p = sub.add_parser("landscape", help="enumerate critical points of U; optional plot data for n=2")
    _add(p, "landscape", "--problem", help="problem JSON")
    _add(p, "landscape", "--beta", type=float)
    _add(p, "landscape", "--alpha", type=float, help="calibrated when unset")
    _add(p, "landscape", "--points", help="critical-point CSV with class labels")
    _add(p, "landscape", "--grid", help="x1,x2,U grid CSV (n=2)")
    _add(p, "landscape", "--grid-num", type=int, help="grid points per axis")
    _add(p, "landscape", "--hill", help="Hill-region mask CSV (n=2); needs --hill-level")
    _add(p, "landscape", "--hill-level", type=float, help="energy level c of the region U < c")
    _add(p, "landscape", "--hill-num", type=int, help="mask points per axis")

    p = sub.add_parser("trace", help="integrate SB and write the trajectory CSV")
    _add(p, "trace", "--problem", help="problem JSON")
    _add(p, "trace", "--beta", type=float)
    _add(p, "trace", "--schedule", choices=[k.value for k in ScheduleKind])
    _add(p, "trace", "--alpha", type=float, help="constant alpha (schedule=constant)")
    _add(p, "trace", "--alpha-inf", type=float, help="ramp plateau")
    _add(p, "trace", "--ramp-time", type=float)
    _add(p, "trace", "--x0", type=_floats, help="initial position, e.g. '0.01,-0.01'; random from --seed when unset")
    _add(p, "trace", "--y0", type=_floats, help="initial momentum (zeros when unset)")
    _add(p, "trace", "--seed", type=int)
    _add(p, "trace", "--dt", type=float)
    _add(p, "trace", "--t-max", type=float)
    _add(p, "trace", "--record-stride", type=int)
    _add(p, "trace", "--integrator", choices=["symplectic_euler", "leapfrog", "discrete_gradient"])
    _add(p, "trace", "--out", help="CSV path (stdout when unset)")

    p = sub.add_parser("capture", help="evaluate the capture test at one state")
    _add(p, "capture", "--problem", help="problem JSON")
    _add(p, "capture", "--beta", type=float)
    _add(p, "capture", "--alpha-star", type=float, help="calibrated when unset")
    _add(p, "capture", "--alpha-inf", type=float, help="8.5 * alpha_star when unset")
    _add(p, "capture", "--ramp-time", type=float, help="alpha_inf / ramp_rate when unset")
    _add(p, "capture", "--ramp-rate", type=float)
    _add(p, "capture", "--t", type=float, help="time of the state")
    _add(p, "capture", "--x", type=_floats, help="position")
    _add(p, "capture", "--y", type=_floats, help="momentum (zeros when unset)")
    _add(p, "capture", "--trace", help="replay a trajectory CSV; one report row per sample instead of --t/--x/--y")
    _add(p, "capture", "--out", help="report CSV path for --trace (stdout when unset)")

    p = sub.add_parser("neck", help="linearization at the 2-spin saddle")
    _add(p, "neck", "--beta", type=float)
    _add(p, "neck", "--alpha", type=float)
    _add(p, "neck", "--eta", type=float, help="|eta| for the periodic-orbit extents")

    p = sub.add_parser("bifurcate", help="closed-form critical points of the 2-spin instance")
    _add(p, "bifurcate", "--beta", type=float)
    _add(p, "bifurcate", "--alpha", type=float)

    p = sub.add_parser("bench", help="random instances, solver vs brute-force oracle")
    _add(p, "bench", "--n", type=int)
    _add(p, "bench", "--count", type=int, help="number of instances")
    _add(p, "bench", "--dist", choices=[d.value for d in Distribution])
    _add(p, "bench", "--density", type=float)
    _add(p, "bench", "--seed", type=int, help="master seed; instance k uses seed + k")
    _add(p, "bench", "--runs", type=int, help="runs per instance")
    _add(p, "bench", "--solver", choices=list(SOLVERS))
    _add(p, "bench", "--ramp-rate", type=float, help="SB only")
    _add(p, "bench", "--alpha-factor", type=float, help="SB only")
    _add(p, "bench", "--csv", help="per-run CSV")
    _add(p, "bench", "--dump-failures", help="directory for trajectories of runs that missed the optimum")
    p.add_argument("--timing", action="store_const", const=True, default=None,
                   help="record wall times (makes output non-reproducible)")

    p = sub.add_parser("oracle", help="exhaustive Ising minimum")
    _add(p, "oracle", "--problem", help="problem JSON")
    _add(p, "oracle", "--cap", type=int, help="largest n enumerated")
    return ap


def _merge(cmd: str, args: argparse.Namespace) -> dict:
    opts = dict(DEFAULTS[cmd])
    if args.config:
        path = Path(args.config)
        try:
            doc = json.loads(path.read_text())
        except OSError as exc:
            raise UsageError(f"{path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: line {exc.lineno} column {exc.colno} (char {exc.pos}): {exc.msg}") from None
        if not isinstance(doc, dict):
            raise UsageError(f"{path}: config must be a JSON object")
        unknown = sorted(set(doc) - set(opts))
        if unknown:
            raise UsageError(f"{path}: unknown option(s) for {cmd}: {', '.join(unknown)}")
        opts.update(doc)
    for key in DEFAULTS[cmd]:
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = val
    return opts


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(_jsonable(obj), indent=1, sort_keys=True) + "\n")


def _need(opts, *keys):
    for k in keys:
        if opts[k] is None:
            raise UsageError(f"--{k.replace('_', '-')} is required")


def cmd_solve(o) -> int:
    _need(o, "problem")
    problem = load_problem(o["problem"])
    config = SolverConfig(
        beta=o["beta"], seed=o["seed"], alpha_inf=o["alpha_inf"], alpha_factor=o["alpha_factor"],
        ramp_rate=o["ramp_rate"], dt=o["dt"], t_max=o["t_max"], integrator=o["integrator"],
    )
    if o["runs"] < 1:
        raise UsageError("--runs must be >= 1")
    results = solve_many(problem, config, range(o["seed"], o["seed"] + o["runs"]))
    best = min(results, key=lambda r: r.energy)
    log.info("energy %s, %s (alpha_star=%.6g)", best.energy, best.report.status, best.report.alpha_star)
    for note in best.report.notes:
        log.info("note: %s", note)
    if o["trace"]:
        write_trace_csv(best.trajectory, o["trace"])
    if o["report"]:
        doc = best.report.to_dict()
        doc.update(spins=best.spins, energy=best.energy, seed=best.trajectory.seed)
        Path(o["report"]).write_text(json.dumps(_jsonable(doc), indent=1, sort_keys=True) + "\n")
    sys.stdout.write(json.dumps([int(s) for s in best.spins]) + "\n")
    return EXIT_OK if best.captured else EXIT_UNCAPTURED


def cmd_landscape(o) -> int:
    _need(o, "problem")
    problem = load_problem(o["problem"])
    alpha = o["alpha"]
    if alpha is None:
        alpha = calibrate(problem, o["beta"]).alpha
    params = PotentialParams(alpha, o["beta"], problem)
    summary = find_critical_points(params)
    if o["points"]:
        write_critical_points_csv(summary, o["points"])
    if o["grid"]:
        write_grid_csv(params, o["grid"], num=o["grid_num"])
    if o["hill"]:
        _need(o, "hill_level")
        write_hill_mask_csv(params, o["hill_level"], o["hill"], num=o["hill_num"])
    doc = summary.to_dict()
    doc.pop("failed_seeds")
    doc.pop("collided_seeds")
    _emit(doc)
    return EXIT_OK


def _schedule(o) -> Schedule:
    kind = ScheduleKind(o["schedule"])
    if kind is ScheduleKind.CONSTANT:
        _need(o, "alpha")
        return Schedule.constant(o["alpha"])
    _need(o, "alpha_inf")
    return Schedule(kind, o["alpha_inf"], 0.0, o["ramp_time"])


def cmd_trace(o) -> int:
    _need(o, "problem")
    problem = load_problem(o["problem"])
    n = problem.n
    x0 = o["x0"]
    if x0 is None:
        x0 = np.random.default_rng(o["seed"]).uniform(-0.1, 0.1, n)
    y0 = o["y0"] if o["y0"] is not None else np.zeros(n)
    if len(x0) != n or len(y0) != n:
        raise UsageError(f"--x0/--y0 need {n} values")
    traj = integrate_sb(
        problem, o["beta"], _schedule(o), State(np.asarray(x0, float), np.asarray(y0, float)),
        dt=o["dt"], t_max=o["t_max"], record_stride=o["record_stride"], method=o["integrator"], seed=o["seed"],
    )
    write_trace_csv(traj, o["out"] or sys.stdout)
    return EXIT_OK


def _read_trace(path, n):
    header, rows = read_rows(path)
    want = ["t", "alpha", "H"] + [f"x{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(n)]
    if header[: len(want)] != want:
        raise UsageError(f"{path}: expected a trace CSV with columns {','.join(want)},...")
    try:
        data = np.array([[float(v) for v in r[: len(want)]] for r in rows]).reshape(-1, len(want))
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None
    return data[:, 0], data[:, 3 : 3 + n], data[:, 3 + n : 3 + 2 * n]


REPORT_HEADER = ["t", "alpha", "H", "norm_sq", "r0", "U_R0", "U_B", "premature", "in_capture"]


def cmd_capture(o) -> int:
    _need(o, "problem")
    if o["trace"] is None:
        _need(o, "t", "x")
    problem = load_problem(o["problem"])
    a_star = o["alpha_star"] if o["alpha_star"] is not None else calibrate(problem, o["beta"]).alpha
    a_inf = o["alpha_inf"] if o["alpha_inf"] is not None else 8.5 * a_star
    ramp = o["ramp_time"] if o["ramp_time"] is not None else a_inf / o["ramp_rate"]
    rule = CaptureRule.build(problem, o["beta"], Schedule(ScheduleKind.LINEAR, a_inf, 0.0, ramp), a_star)
    if o["trace"] is not None:
        ts, X, Y = _read_trace(o["trace"], problem.n)
        rows = []
        for t, x, y in zip(ts, X, Y):
            r = rule.report(t, State(x, y, t))
            rows.append([r.t, r.alpha, r.H, r.norm_sq, r.r0, r.U_R0, r.U_B, r.premature, r.in_capture])
        write_rows(o["out"] or sys.stdout, REPORT_HEADER, rows)
        return EXIT_OK
    x = np.asarray(o["x"], float)
    y = np.asarray(o["y"], float) if o["y"] is not None else np.zeros_like(x)
    if len(x) != problem.n or len(y) != problem.n:
        raise UsageError(f"--x/--y need {problem.n} values")
    rep = rule.report(o["t"], State(x, y, o["t"]))
    doc = rep.to_dict()
    doc.update(alpha_star=a_star, alpha_inf=a_inf, ramp_time=ramp, b6_estimate=rule.b6, notes=rule.notes)
    _emit(doc)
    return EXIT_OK


def cmd_neck(o) -> int:
    na = neck_linearize(o["beta"], o["alpha"])
    major, minor, orient = periodic_orbit_ellipse(na, o["eta"])
    ev = na.eigenvalues
    _emit({
        "alpha": na.alpha,
        "beta": na.beta,
        "saddle": na.saddle,
        "mu1": na.mu1,
        "mu2": na.mu2_im,
        "u": na.u,
        "v": na.v,
        "eigenvalues": [[float(e.real), float(e.imag)] for e in ev],
        "eigvec_residuals": na.eigvec_residuals(),
        "periodic_orbit": {"eta": o["eta"], "extent_major": major, "extent_minor": minor,
                           "orientation": orient.value},
    })
    return EXIT_OK


def cmd_bifurcate(o) -> int:
    _need(o, "beta", "alpha")
    try:
        cf = r2_closed_form(o["alpha"], o["beta"])
    except BifurcationError as exc:
        raise UsageError(str(exc)) from None
    _emit(cf.to_dict())
    return EXIT_OK


def cmd_bench(o) -> int:
    if o["count"] < 1:
        raise UsageError("--count must be >= 1")
    specs = [InstanceSpec(o["n"], Distribution(o["dist"]), o["density"], o["seed"] + k) for k in range(o["count"])]
    config = SolverConfig(ramp_rate=o["ramp_rate"], alpha_factor=o["alpha_factor"])
    res = run_campaign(specs, config, runs_per_instance=o["runs"], master_seed=o["seed"], solver=o["solver"],
                       timing=bool(o["timing"]))
    if o["csv"]:
        write_rows(o["csv"], RECORD_HEADER, res.rows())
    if o["dump_failures"]:
        d = Path(o["dump_failures"])
        d.mkdir(parents=True, exist_ok=True)
        for rec, traj in res.failures:
            write_trace_csv(traj, d / f"fail_i{rec.instance_seed}_r{rec.run_seed}.csv")
    _emit(res.summary())
    return EXIT_OK


def cmd_oracle(o) -> int:
    _need(o, "problem")
    problem = load_problem(o["problem"])
    _emit(brute_force(problem, cap=o["cap"]).to_dict())
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve, "landscape": cmd_landscape, "trace": cmd_trace, "capture": cmd_capture,
    "neck": cmd_neck, "bifurcate": cmd_bifurcate, "bench": cmd_bench, "oracle": cmd_oracle,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        opts = _merge(args.command, args)
        return COMMANDS[args.command](opts)
    except (UsageError, ProblemFormatError, OracleCapError) as exc:
        print(f"isingflow {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BlowUpError as exc:
        print(f"isingflow {args.command}: blow-up: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except (ValueError, TypeError) as exc:
        print(f"isingflow {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        print(f"isingflow {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
