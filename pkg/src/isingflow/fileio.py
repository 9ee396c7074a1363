"""Problem files and plot-data CSVs.

Floats are written with ``repr`` (shortest round-trip form), so every CSV
parses back to the identical doubles. Problem JSON takes one of two shapes::

    {"n": 3, "coupling": [[0, 1, -2], [1, 0, 3], [-2, 3, 0]]}
    {"n": 3, "edges": [[0, 1, 1], [0, 2, -2], [1, 2, 3]]}

with an optional ``"name"``. Edges may also be objects
``{"i": 0, "j": 1, "s": 1}``.
"""
from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

from .dynamics import Trajectory
from .ising import IsingProblem
from .potential import LandscapeSummary, PotentialParams, eval_U

__all__ = [
    "ProblemFormatError",
    "problem_from_json",
    "problem_to_json",
    "load_problem",
    "save_problem",
    "fmt",
    "write_rows",
    "read_rows",
    "trace_rows",
    "write_trace_csv",
    "grid_rows",
    "write_grid_csv",
    "critical_point_rows",
    "write_critical_points_csv",
    "hill_mask",
    "write_hill_mask_csv",
]


class ProblemFormatError(ValueError):
    """Malformed problem file; the message carries line and column when the JSON itself is broken."""


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def problem_from_json(text: str, source: str = "<string>") -> IsingProblem:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(f"{source}: line {exc.lineno} column {exc.colno} (char {exc.pos}): {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ProblemFormatError(f"{source}: top level must be an object")
    name = str(doc.get("name", ""))
    try:
        if "coupling" in doc:
            S = np.array(doc["coupling"], dtype=float)
            if "n" in doc and S.shape != (doc["n"], doc["n"]):
                raise ProblemFormatError(f"{source}: coupling shape {S.shape} does not match n={doc['n']}")
            return IsingProblem(S, name=name)
        if "edges" in doc:
            if "n" not in doc:
                raise ProblemFormatError(f"{source}: edge form needs \"n\"")
            n = doc["n"]
            if not isinstance(n, int) or n < 1:
                raise ProblemFormatError(f"{source}: n must be a positive integer")
            edges = []
            for e in doc["edges"]:
                if isinstance(e, dict) and set(e) == {"i", "j", "s"}:
                    e = [e["i"], e["j"], e["s"]]
                if not isinstance(e, list) or len(e) != 3:
                    raise ProblemFormatError(f"{source}: each edge must be [i, j, s] or {{\"i\", \"j\", \"s\"}}")
                edges.append(e)
            return IsingProblem.from_edges(n, edges, name=name)
    except ProblemFormatError:
        raise
    except (TypeError, ValueError) as exc:
        raise ProblemFormatError(f"{source}: {exc}") from None
    raise ProblemFormatError(f"{source}: expected a \"coupling\" or \"edges\" key")


def problem_to_json(problem: IsingProblem, form: str = "dense") -> str:
    doc: dict = {"n": problem.n}
    if problem.name:
        doc["name"] = problem.name
    if form == "dense":
        doc["coupling"] = problem.coupling.tolist()
    elif form == "edges":
        doc["edges"] = [[i, j, w] for i, j, w in problem.edges()]
    else:
        raise ValueError("form must be 'dense' or 'edges'")
    return json.dumps(doc, indent=1) + "\n"


def load_problem(path) -> IsingProblem:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ProblemFormatError(f"{path}: {exc.strerror}") from None
    return problem_from_json(text, source=str(path))


def save_problem(problem: IsingProblem, path, form: str = "dense") -> None:
    Path(path).write_text(problem_to_json(problem, form))


def write_rows(target, header, rows) -> None:
    """Write a CSV to a path or a text stream, formatting numbers losslessly."""
    if isinstance(target, (str, os.PathLike)):
        with open(target, "w", newline="") as fh:
            write_rows(fh, header, rows)
        return
    w = csv.writer(target, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])


def read_rows(source) -> tuple[list[str], list[list[str]]]:
    """Header and string rows from a CSV path or text stream."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="") as fh:
            return read_rows(fh)
    r = csv.reader(source)
    header = next(r, [])
    return header, [row for row in r]


def trace_rows(traj: Trajectory):
    n = traj.x.shape[1] if traj.x.ndim == 2 else 0
    header = ["t", "alpha", "H"] + [f"x{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(n)] + ["in_capture"]
    rows = []
    ys = traj.y if traj.y is not None else np.full_like(traj.x, np.nan)
    for k in range(len(traj.t)):
        flag = "" if traj.in_capture is None else int(bool(traj.in_capture[k]))
        rows.append([traj.t[k], traj.alpha[k], traj.H[k], *traj.x[k], *ys[k], flag])
    return header, rows


def write_trace_csv(traj: Trajectory, target) -> None:
    """``t,alpha,H,x1..xn,y1..yn,in_capture``; an empty trajectory gives the header alone."""
    write_rows(target, *trace_rows(traj))


def _grid(bounds, num):
    lo, hi = bounds
    g = np.linspace(lo, hi, num)
    X1, X2 = np.meshgrid(g, g, indexing="ij")
    return X1, X2


def grid_rows(params: PotentialParams, bounds=None, num: int = 101):
    if params.n != 2:
        raise ValueError("grid data needs a 2-spin problem")
    if bounds is None:
        r = 1.5 * np.sqrt(params.alpha**2 + params.problem.spectral_radius())
        bounds = (-r, r)
    X1, X2 = _grid(bounds, num)
    P = np.stack([X1.ravel(), X2.ravel()], axis=1)
    U = eval_U(params, P)
    return ["x1", "x2", "U"], [[a, b, u] for (a, b), u in zip(P, U)]


def write_grid_csv(params: PotentialParams, target, bounds=None, num: int = 101) -> None:
    """``x1,x2,U`` on a square grid for contour plots."""
    write_rows(target, *grid_rows(params, bounds, num))


def critical_point_rows(summary: LandscapeSummary):
    n = summary.n
    header = [f"x{i + 1}" for i in range(n)] + ["U", "class", "morse_index"]
    rows = [[*p.x, p.value, p.kind.value, p.morse_index] for p in summary.critical_points]
    return header, rows


def write_critical_points_csv(summary: LandscapeSummary, target) -> None:
    write_rows(target, *critical_point_rows(summary))


def hill_mask(params: PotentialParams, level: float, bounds=None, num: int = 201):
    """Grid axes and the boolean mask ``U < level`` for a 2-spin problem."""
    if params.n != 2:
        raise ValueError("Hill masks need a 2-spin problem")
    if bounds is None:
        r = 1.5 * np.sqrt(params.alpha**2 + params.problem.spectral_radius())
        bounds = (-r, r)
    X1, X2 = _grid(bounds, num)
    U = eval_U(params, np.stack([X1.ravel(), X2.ravel()], axis=1)).reshape(X1.shape)
    return X1, X2, U < level


def write_hill_mask_csv(params: PotentialParams, level: float, target, bounds=None, num: int = 201) -> None:
    X1, X2, mask = hill_mask(params, level, bounds, num)
    rows = zip(X1.ravel(), X2.ravel(), mask.ravel())
    write_rows(target, ["x1", "x2", "inside"], rows)
