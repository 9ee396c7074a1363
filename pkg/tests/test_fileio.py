import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from isingflow.closed_form import r2_closed_form
from isingflow.dynamics import Schedule, State, integrate_sb
from isingflow.fileio import (
    ProblemFormatError,
    critical_point_rows,
    hill_mask,
    load_problem,
    problem_from_json,
    problem_to_json,
    read_rows,
    save_problem,
    trace_rows,
    write_critical_points_csv,
    write_grid_csv,
    write_rows,
    write_trace_csv,
)
from isingflow.ising import IsingProblem
from isingflow.potential import PotentialParams, find_critical_points


@pytest.mark.parametrize("form", ["dense", "edges"])
def test_problem_round_trip(tmp_path, s3, form):
    path = tmp_path / "p.json"
    save_problem(s3, path, form=form)
    a = load_problem(path)
    save_problem(a, path, form=form)
    b = load_problem(path)
    assert np.array_equal(a.coupling, s3.coupling)
    assert np.array_equal(b.coupling, s3.coupling)


def test_edge_objects_accepted():
    p = problem_from_json('{"n": 3, "edges": [{"i": 0, "j": 2, "s": -2.5}, {"i": 1, "j": 2, "s": 1}]}')
    assert p.coupling[0, 2] == p.coupling[2, 0] == -2.5
    assert p.coupling[1, 2] == 1.0


@pytest.mark.parametrize(
    "text, msg",
    [
        ('{"n": 2, "coupling": [[0, 1], [1, 0]]', "line 1 column"),
        ("[1, 2]", "top level"),
        ('{"n": 2}', "coupling"),
        ('{"n": 3, "coupling": [[0, 1], [1, 0]]}', "shape"),
        ('{"edges": [[0, 1, 1]]}', "needs"),
        ('{"n": 2, "edges": [[0, 1]]}', "each edge"),
        ('{"n": 2, "edges": [[0, 5, 1]]}', "out of range"),
        ('{"n": 2, "coupling": [[0, 1], [2, 0]]}', "symmetric"),
    ],
)
def test_malformed_problems(text, msg):
    with pytest.raises(ProblemFormatError, match=msg):
        problem_from_json(text)


def test_missing_file(tmp_path):
    with pytest.raises(ProblemFormatError):
        load_problem(tmp_path / "nope.json")


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=6))
def test_csv_round_trip_is_exact(vals):
    buf = io.StringIO()
    write_rows(buf, [f"c{i}" for i in range(len(vals))], [vals])
    header, rows = read_rows(io.StringIO(buf.getvalue()))
    assert [float(v) for v in rows[0]] == vals


def test_trace_csv(tmp_path, s2):
    tr = integrate_sb(s2, 2.0, Schedule.constant(4.0), State([0.1, -0.2], [0.0, 0.1]), dt=1e-2, t_max=1)
    path = tmp_path / "t.csv"
    write_trace_csv(tr, path)
    header, rows = read_rows(path)
    assert header == ["t", "alpha", "H", "x1", "x2", "y1", "y2", "in_capture"]
    assert len(rows) == len(tr.t)
    back = np.array([[float(v) for v in r[3:5]] for r in rows])
    assert np.array_equal(back, tr.x)


def test_empty_trace_is_header_only(s2):
    tr = integrate_sb(s2, 2.0, Schedule.constant(4.0), State([0.1, -0.2]), dt=1e-2, t_max=0.1)
    empty = type(tr)(tr.t[:0], tr.x[:0], tr.y[:0], tr.H[:0], tr.alpha[:0], tr.dt, tr.integrator)
    buf = io.StringIO()
    write_trace_csv(empty, buf)
    assert buf.getvalue() == "t,alpha,H,x1,x2,y1,y2,in_capture\n"
    assert trace_rows(empty)[1] == []


def test_grid_and_overlay(tmp_path, s2):
    params = PotentialParams(5.0, 2.0, s2)
    write_grid_csv(params, tmp_path / "g.csv", num=21)
    header, rows = read_rows(tmp_path / "g.csv")
    assert header == ["x1", "x2", "U"] and len(rows) == 441
    summary = find_critical_points(params)
    write_critical_points_csv(summary, tmp_path / "c.csv")
    header, rows = read_rows(tmp_path / "c.csv")
    assert header == ["x1", "x2", "U", "class", "morse_index"]
    classes = [r[3] for r in rows]
    assert len(rows) == 9
    assert (classes.count("min"), classes.count("saddle"), classes.count("max")) == (4, 4, 1)


def test_hill_region_has_four_components_below_c1(s2):
    cf = r2_closed_form(4.0, 2.0)
    _, _, mask = hill_mask(PotentialParams(4.0, 2.0, s2), cf.c1 - 1.0, num=301)
    _, count = ndimage.label(mask)
    assert count == 4
    _, _, mask = hill_mask(PotentialParams(4.0, 2.0, s2), cf.c1 + 1.0, num=301)
    assert ndimage.label(mask)[1] == 1
