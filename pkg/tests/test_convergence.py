from __future__ import annotations

import math

import pytest

from vdofrac.convergence import (
    REFINEMENT_PRESETS,
    ConvergenceRow,
    ConvergenceTable,
    convergence_orders,
    coupled_steps,
    run_plan,
)


def test_orders_formula():
    orders = convergence_orders([0.1, 0.05, 0.025], [4e-3, 1e-3, 2.5e-4])
    assert orders[0] is None
    assert orders[1] == pytest.approx(2.0) and orders[2] == pytest.approx(2.0)


def test_identical_errors_give_order_zero():
    assert convergence_orders([0.2, 0.1], [1e-3, 1e-3])[1] == 0.0


def test_failed_rows_have_no_order():
    assert convergence_orders([0.2, 0.1, 0.05], [1e-3, math.nan, 1e-4]) == [None, None, None]


@pytest.mark.parametrize(("N", "exponent", "steps"), [
    (10, 2 / (2 - 0.5), 22),
    (20, 2 / (2 - 0.5), 54),
    (10, 2 / (2 - 0.856), 56),
])
def test_coupled_steps(N, exponent, steps):
    assert coupled_steps(N, exponent, 0.99) == steps


def test_csv_orders_recompute():
    table = run_plan("test1", {"axis": "coupled", "N": [4, 8, 16]})
    lines = table.to_csv().splitlines()
    assert lines[0] == "h,tau,max_error,order"
    assert lines[1].endswith(",")
    rows = [line.split(",") for line in lines[1:]]
    h = [float(r[0]) for r in rows]
    e = [float(r[2]) for r in rows]
    for i in (1, 2):
        assert float(rows[i][3]) == pytest.approx(math.log(e[i - 1] / e[i]) / math.log(h[i - 1] / h[i]), abs=1e-9)
    assert all(row.status == "ok" for row in table.rows)


def test_space_axis_and_parallel_agree():
    plan = {"axis": "space", "N": [4, 8], "steps": 5}
    serial = run_plan("test2", plan, eval_time=0.5)
    parallel = run_plan("test2", plan, eval_time=0.5, parallel=2)
    assert serial.errors == parallel.errors
    assert serial.to_csv() == parallel.to_csv()


def test_failed_case_is_marked():
    source = {"theta": "0.5", "omega": "1", "k": "1", "q": "0", "f": "ln(t-0.5)",
              "u0": "0", "exact": "0", "c1": 1,
              "bc": {"type": "dirichlet", "mu1": "0", "mu2": "0"}}
    table = run_plan(source, {"axis": "time", "N": 4, "steps": [2, 4]}, eval_time=1.0)
    assert all(row.status.startswith("failed") for row in table.rows)
    assert all(math.isnan(e) for e in table.errors)


def test_bad_plans():
    with pytest.raises(ValueError):
        run_plan("test1", {"axis": "diagonal"})
    source = {"theta": "0.5", "omega": "1", "k": "1", "q": "0", "f": "0", "u0": "0",
              "exact": "0", "c1": 1, "bc": {"type": "dirichlet", "mu1": "0", "mu2": "0"}}
    with pytest.raises(ValueError, match="theta_max"):
        run_plan(source, {"axis": "coupled", "N": [4]})


def test_presets_cover_refinement_tables():
    assert sorted(REFINEMENT_PRESETS) == [2, 3, 5, 6]
    assert REFINEMENT_PRESETS[5][1]["steps"][-1] == 80
    assert REFINEMENT_PRESETS[5][1]["N"] == 500


def test_table_accessors():
    table = ConvergenceTable(axis="time", rows=[
        ConvergenceRow(N=4, steps=2, h=0.25, tau=0.5, max_error=1e-2),
        ConvergenceRow(N=4, steps=4, h=0.25, tau=0.25, max_error=5e-3, order=1.0),
    ])
    assert table.orders == [None, 1.0]
    assert table.to_csv().splitlines()[2] == "0.25,0.25,0.005,1.0"
