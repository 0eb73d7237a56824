"""JSON run configurations and expression-based problem definitions.

A configuration looks like::

    {
      "problem": "test1",
      "grid": {"N": 10, "tau": 0.01},
      "eval_time": 0.99
    }

where ``problem`` is either a built-in name or an object with expression
strings (see ``load_problem``). ``grid`` takes ``N`` and one of ``tau`` or
``steps``; the march runs from ``t = 0`` to ``eval_time``, which must be a
multiple of ``tau``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from vdofrac.expr import Expression, ExprSyntaxError
from vdofrac.fracops import OrderDistribution
from vdofrac.mesh import Grid, GridError
from vdofrac.problems import (
    Dirichlet,
    ExactSolution,
    ProblemSpec,
    Robin,
    builtin_problem,
)

__all__ = ["ConfigError", "RunConfig", "load_config", "load_problem", "make_grid"]


class ConfigError(ValueError):
    """Configuration error tagged with the JSON path of the offending field."""

    def __init__(self, path: str, message: str) -> None:
        self.path = path
        super().__init__(f"{path}: {message}")


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _expr(obj: dict, key: str, path: str, params: tuple[str, ...]):
    if key not in obj:
        raise ConfigError(_join(path, key), "missing expression")
    text = obj[key]
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        text = repr(float(text))
    if not isinstance(text, str):
        raise ConfigError(_join(path, key), f"expected an expression string, got {text!r}")
    try:
        return Expression(text).as_function(*params)
    except ExprSyntaxError as exc:
        raise ConfigError(_join(path, key), str(exc)) from None
    except ValueError as exc:
        raise ConfigError(_join(path, key), str(exc)) from None


def _number(obj: dict, key: str, path: str, default: Any = ...) -> float:
    if key not in obj:
        if default is ...:
            raise ConfigError(_join(path, key), "missing number")
        return default
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(_join(path, key), f"expected a finite number, got {value!r}")
    return float(value)


def _per_term(obj: dict, key: str, m: int, path: str):
    value = obj.get(key)
    if isinstance(value, list):
        if len(value) != m:
            raise ConfigError(_join(path, key), f"expected {m} expressions, got {len(value)}")
        funcs = [_expr({key: v}, key, f"{path}[{i}]", ("r", "x", "g"))
                 for i, v in enumerate(value)]

        def per_term(r, x, g):
            return funcs[r - 1](r, x, g)

        return per_term

    func = _expr(obj, key, path, ("r", "x", "g"))

    def by_index(r, x, g):
        return func(float(r), x, g)

    return by_index


def _time_function(func):
    def wrapped(t):
        return float(func(t))

    return wrapped


def load_problem(source: str | dict) -> ProblemSpec:
    """Build a problem from a built-in name or an expression object.

    Expression objects use ``theta``/``omega`` in ``(r, x, g)`` (``g`` is the
    distribution variable; a list of ``m`` strings is also accepted),
    ``k``, ``q``, ``f`` and ``exact`` in ``(x, t)``, ``u0`` in ``x`` and
    boundary data in ``t``. Missing ``c1``/``beta0`` are left as NaN and
    inferred from the grid by the caller.
    """
    if isinstance(source, str):
        try:
            return builtin_problem(source)
        except KeyError:
            raise ConfigError("problem", f"unknown built-in problem {source!r}") from None
    if not isinstance(source, dict):
        raise ConfigError("problem", "expected a built-in name or an object")

    path = "problem"
    l = _number(source, "l", path, 1.0)
    T = _number(source, "T", path, 1.0)
    m = int(_number(source, "m", path, 1.0))
    alpha = _number(source, "alpha", path, 0.0)
    beta = _number(source, "beta", path, 1.0)
    if m < 1:
        raise ConfigError(f"{path}.m", "term count must be positive")
    if not alpha < beta:
        raise ConfigError(f"{path}.alpha", "alpha must be smaller than beta")

    dist = OrderDistribution(m=m, alpha=alpha, beta=beta,
                             theta=_per_term(source, "theta", m, path),
                             omega=_per_term(source, "omega", m, path))

    xt = ("x", "t")
    bc_obj = source.get("bc")
    if not isinstance(bc_obj, dict):
        raise ConfigError(f"{path}.bc", "missing boundary condition object")
    kind = bc_obj.get("type")
    bpath = f"{path}.bc"
    if kind == "dirichlet":
        bc = Dirichlet(mu1=_time_function(_expr(bc_obj, "mu1", bpath, ("t",))),
                       mu2=_time_function(_expr(bc_obj, "mu2", bpath, ("t",))))
    elif kind == "robin":
        bc = Robin(beta1=_time_function(_expr(bc_obj, "beta1", bpath, ("t",))),
                   beta2=_time_function(_expr(bc_obj, "beta2", bpath, ("t",))),
                   mu1=_time_function(_expr(bc_obj, "mu1", bpath, ("t",))),
                   mu2=_time_function(_expr(bc_obj, "mu2", bpath, ("t",))))
    else:
        raise ConfigError(f"{bpath}.type", f"expected 'dirichlet' or 'robin', got {kind!r}")

    exact = None
    if "exact" in source:
        exact = ExactSolution(u=_expr(source, "exact", path, xt), note=str(source["exact"]))

    theta_max = _number(source, "theta_max", path, None)
    return ProblemSpec(
        l=l, T=T, dist=dist,
        k=_expr(source, "k", path, xt),
        q=_expr(source, "q", path, xt),
        f=_expr(source, "f", path, xt),
        u0=_expr(source, "u0", path, ("x",)),
        bc=bc,
        c1=_number(source, "c1", path, math.nan),
        beta0=_number(source, "beta0", path, math.nan if kind == "robin" else None),
        exact=exact,
        theta_max=theta_max,
        name=str(source.get("name", "custom")),
    )


@dataclass
class RunConfig:
    problem_source: str | dict
    problem: ProblemSpec
    N: int
    tau: float | None = None
    steps: int | None = None
    eval_time: float = 1.0
    quad_nodes: int = 64
    parallel: int = 1
    ledger: bool = False
    plan: dict | None = None
    extra: dict = field(default_factory=dict)


def make_grid(problem: ProblemSpec, N: int, eval_time: float,
              tau: float | None = None, steps: int | None = None) -> Grid:
    """Grid on ``[0, l] x [0, eval_time]``; *tau* must divide *eval_time*."""
    if N < 2:
        raise ConfigError("grid.N", f"at least two space intervals required, got {N}")
    if not 0.0 < eval_time <= problem.T * (1.0 + 1.0e-12):
        raise ConfigError("eval_time", f"must lie in (0, {problem.T}], got {eval_time}")

    if steps is not None:
        if steps < 1:
            raise ConfigError("grid.steps", f"must be positive, got {steps}")
        return Grid(l=problem.l, T=eval_time, N=N, j0=int(steps))
    if tau is None or tau <= 0.0:
        raise ConfigError("grid", "either a positive 'tau' or 'steps' is required")

    try:
        return Grid.from_tau(problem.l, eval_time, N, tau)
    except GridError:
        raise ConfigError(
            "eval_time", f"{eval_time} is not a level of a grid with tau = {tau}") from None


def load_config(obj: dict | str | Path) -> RunConfig:
    if not isinstance(obj, dict):
        try:
            obj = json.loads(Path(obj).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("<file>", str(exc)) from None
    if not isinstance(obj, dict):
        raise ConfigError("<root>", "expected a JSON object")

    if "problem" not in obj:
        raise ConfigError("problem", "missing")
    source = obj["problem"]
    problem = load_problem(source)

    grid = obj.get("grid", {})
    if not isinstance(grid, dict):
        raise ConfigError("grid", "expected an object")
    N = grid.get("N")
    if isinstance(N, bool) or not isinstance(N, int):
        raise ConfigError("grid.N", f"expected an integer, got {N!r}")

    tau = _number(grid, "tau", "grid", None)
    steps = grid.get("steps")
    if steps is not None and (isinstance(steps, bool) or not isinstance(steps, int)):
        raise ConfigError("grid.steps", f"expected an integer, got {steps!r}")

    eval_time = _number(obj, "eval_time", "", problem.T)
    quad_nodes = obj.get("quad_nodes", 64)
    if isinstance(quad_nodes, bool) or not isinstance(quad_nodes, int) or quad_nodes < 2:
        raise ConfigError("quad_nodes", f"expected an integer >= 2, got {quad_nodes!r}")

    plan = obj.get("plan")
    if plan is not None and not isinstance(plan, dict):
        raise ConfigError("plan", "expected an object")

    return RunConfig(problem_source=source, problem=problem, N=N, tau=tau, steps=steps,
                     eval_time=eval_time, quad_nodes=quad_nodes,
                     ledger=bool(obj.get("ledger", False)), plan=plan)

