"""Refinement studies: maximum errors and observed convergence orders."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Sequence

from vdofrac.config import load_problem, make_grid
from vdofrac.mesh import max_error
from vdofrac.scheme import MarchOptions, march

__all__ = [
    "ConvergenceRow",
    "ConvergenceTable",
    "REFINEMENT_PRESETS",
    "convergence_orders",
    "coupled_steps",
    "run_case",
    "run_plan",
]

Axis = Literal["time", "space", "coupled"]


@dataclass(frozen=True)
class ConvergenceRow:
    N: int
    steps: int
    h: float
    tau: float
    max_error: float
    order: float | None = None
    status: str = "ok"


@dataclass
class ConvergenceTable:
    axis: Axis
    rows: list[ConvergenceRow] = field(default_factory=list)

    @property
    def errors(self) -> list[float]:
        return [row.max_error for row in self.rows]

    @property
    def orders(self) -> list[float | None]:
        return [row.order for row in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["h", "tau", "max_error", "order"])
        for row in self.rows:
            order = "" if row.order is None else repr(row.order)
            writer.writerow([repr(row.h), repr(row.tau), repr(row.max_error), order])
        return buf.getvalue()


def convergence_orders(steps: Sequence[float], errors: Sequence[float]) -> list[float | None]:
    """Observed orders :math:`\\log(e_1 / e_2) / \\log(s_1 / s_2)` between successive rows.

    The first row has no order; rows next to a failed case get ``None``.
    """
    orders: list[float | None] = [None]
    for (s1, e1), (s2, e2) in zip(zip(steps, errors), zip(steps[1:], errors[1:])):
        if not (e1 > 0 and e2 > 0 and math.isfinite(e1) and math.isfinite(e2)):
            orders.append(None)
        else:
            orders.append(math.log(e1 / e2) / math.log(s1 / s2))
    return orders


def coupled_steps(N: int, exponent: float, eval_time: float) -> int:
    """Number of steps for :math:`\\tau \\approx h^{exponent}`, rounded up so that
    *eval_time* is a grid level."""
    target = (1.0 / N) ** exponent
    return max(1, math.ceil(eval_time / target - 1.0e-9))


def run_case(source: str | dict, N: int, steps: int, eval_time: float,
             quad_nodes: int = 64) -> float:
    """Maximum nodal error at *eval_time* for one grid."""
    problem = load_problem(source)
    if problem.exact is None:
        raise ValueError("refinement studies need an exact solution")
    grid = make_grid(problem, N, eval_time, steps=steps)
    result = march(problem, grid, MarchOptions(quad_nodes=quad_nodes))
    return max_error(result.field.levels[-1], problem.exact, grid.x, eval_time)


def _safe_case(args) -> tuple[float, str]:
    try:
        return run_case(*args), "ok"
    except Exception as exc:
        return math.nan, f"failed: {type(exc).__name__}: {exc}"


def run_plan(source: str | dict, plan: dict, eval_time: float = 0.99,
             quad_nodes: int = 64, parallel: int = 1) -> ConvergenceTable:
    """Run a refinement plan.

    Plans are dictionaries with an ``axis`` key:

    * ``{"axis": "time", "N": 1000, "steps": [10, 20, 40]}``,
    * ``{"axis": "space", "N": [10, 20], "steps": 1000}``,
    * ``{"axis": "coupled", "N": [10, 20, 40], "exponent": 1.333}``; the
      exponent defaults to ``2 / (2 - theta_max)`` with the declared
      ``theta_max`` of the problem.
    """
    axis = plan.get("axis")
    if axis == "time":
        N = int(plan["N"])
        cases = [(N, int(s)) for s in plan["steps"]]
    elif axis == "space":
        steps = int(plan["steps"])
        cases = [(int(n), steps) for n in plan["N"]]
    elif axis == "coupled":
        exponent = plan.get("exponent")
        if exponent is None:
            theta_max = load_problem(source).theta_max
            if theta_max is None:
                raise ValueError("coupled plans need an exponent or a declared theta_max")
            exponent = 2.0 / (2.0 - theta_max)
        cases = [(int(n), coupled_steps(int(n), float(exponent), eval_time))
                 for n in plan["N"]]
    else:
        raise ValueError(f"unknown refinement axis: {axis!r}")

    args = [(source, N, steps, eval_time, quad_nodes) for N, steps in cases]
    if parallel > 1:
        with ProcessPoolExecutor(parallel) as pool:
            outcomes = list(pool.map(_safe_case, args))
    else:
        outcomes = [_safe_case(a) for a in args]

    l = load_problem(source).l
    hs = [l / N for N, _ in cases]
    taus = [eval_time / steps for _, steps in cases]
    errors = [e for e, _ in outcomes]
    orders = convergence_orders(taus if axis == "time" else hs, errors)

    table = ConvergenceTable(axis=axis)
    for (N, steps), h, tau, (err, status), order in zip(cases, hs, taus, outcomes, orders):
        table.rows.append(ConvergenceRow(N=N, steps=steps, h=h, tau=tau,
                                         max_error=err, order=order, status=status))
    return table


#: refinement studies of the two built-in problems, keyed by table number
REFINEMENT_PRESETS = {
    2: ("test1", {"axis": "time", "N": 1000, "steps": [10, 20, 40]}),
    3: ("test1", {"axis": "coupled", "N": [10, 20, 40, 80]}),
    5: ("test2", {"axis": "time", "N": 500, "steps": [10, 20, 40, 80]}),
    6: ("test2", {"axis": "coupled", "N": [10, 20, 40]}),
}
