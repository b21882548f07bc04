"""Problem files (JSON) and trajectory CSV files.

A Lagrange problem file::

    {
      "kind": "lagrange",
      "timescale": {"type": "uniform", "a": 0, "b": 1, "n": 10},
      "lagrangian": "v^2 + alpha*z^2 + beta*(s-1)^2",
      "params": {"alpha": 2, "beta": 2},
      "x_a": "free",
      "x_b": {"fixed": 1.0},
      "solver": {"tol": 1e-11, "max_iters": 50}
    }

Control problems use ``"kind": "control"`` with ``"integrand"`` and
``"dynamics"`` instead of ``"lagrangian"``. ``x_a``/``x_b`` default to free.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Union

import numpy as np

from ._newton import SolverOptions
from .errors import ExprError, NablavarError
from .expr import parse
from .octrl import ControlExtremal, ControlProblem
from .timescale import TimeScale, from_descriptor
from .varsolve import ExtremalSolution, Fixed, Free, LagrangeProblem

Problem = Union[LagrangeProblem, ControlProblem]


class ProblemFileError(NablavarError, ValueError):
    """A problem or trajectory file is malformed; the message names the field."""


@dataclass
class ProblemFile:
    kind: str
    problem: Problem
    options: SolverOptions


def _endpoint(value: Any, field: str):
    if value is None or value == "free":
        return Free()
    if isinstance(value, Mapping) and set(value) == {"fixed"}:
        v = value["fixed"]
        if isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v):
            return Fixed(float(v))
    raise ProblemFileError(f"field {field!r} must be \"free\" or {{\"fixed\": <number>}}, got {value!r}")


def _expression(data: Mapping[str, Any], field: str):
    src = data.get(field)
    if not isinstance(src, str):
        raise ProblemFileError(f"field {field!r} must be an expression string")
    try:
        return parse(src)
    except ExprError as exc:
        raise ProblemFileError(f"field {field!r}: {exc}") from None


def _params(data: Mapping[str, Any]) -> dict[str, float]:
    raw = data.get("params", {})
    if not isinstance(raw, Mapping):
        raise ProblemFileError("field 'params' must be an object of name -> number")
    out = {}
    for name, value in raw.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ProblemFileError(f"field 'params.{name}' must be a finite number")
        out[str(name)] = float(value)
    return out


def _options(data: Mapping[str, Any]) -> SolverOptions:
    raw = data.get("solver", {})
    if not isinstance(raw, Mapping):
        raise ProblemFileError("field 'solver' must be an object")
    unknown = set(raw) - {"tol", "max_iters"}
    if unknown:
        raise ProblemFileError(f"field 'solver' has unknown key(s) {sorted(unknown)}")
    try:
        return SolverOptions(**raw)
    except (TypeError, ValueError) as exc:
        raise ProblemFileError(f"field 'solver': {exc}") from None


def problem_from_dict(data: Mapping[str, Any]) -> ProblemFile:
    """Validate a decoded problem file.

    Raises:
        ProblemFileError: malformed fields (the message names the field).
        TimeScaleError: the time scale descriptor is invalid.
    """
    if not isinstance(data, Mapping):
        raise ProblemFileError("problem file must contain a JSON object")
    kind = data.get("kind")
    if kind not in ("lagrange", "control"):
        raise ProblemFileError(f"field 'kind' must be \"lagrange\" or \"control\", got {kind!r}")
    if "timescale" not in data:
        raise ProblemFileError("field 'timescale' is required")
    ts = from_descriptor(data["timescale"])
    if len(ts) < 3:
        raise ProblemFileError("field 'timescale' must have at least 3 points")
    at_a = _endpoint(data.get("x_a"), "x_a")
    at_b = _endpoint(data.get("x_b"), "x_b")
    params = _params(data)
    try:
        if kind == "lagrange":
            problem: Problem = LagrangeProblem(_expression(data, "lagrangian"), ts, at_a, at_b, params)
        else:
            problem = ControlProblem(
                _expression(data, "integrand"), _expression(data, "dynamics"), ts, at_a, at_b, params
            )
    except ExprError as exc:
        raise ProblemFileError(str(exc)) from None
    return ProblemFile(kind, problem, _options(data))


def load_problem(path: str | Path) -> ProblemFile:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ProblemFileError(f"cannot read problem file: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return problem_from_dict(data)


# -- trajectories -----------------------------------------------------------------


def _fmt(value) -> str:
    return "" if value is None else repr(float(value))


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def lagrange_csv(sol: ExtremalSolution) -> str:
    """Columns ``t, x, xnabla, el_residual``; undefined cells are empty."""
    ts = sol.x.ts
    xv = sol.x.values
    xn = np.diff(xv) / ts.graininess[1:]
    el = sol.report.el_residuals
    rows = []
    for i, t in enumerate(ts.points):
        rows.append((t, xv[i], xn[i - 1] if i >= 1 else None, el[i - 2] if i >= 2 else None))
    return _csv(["t", "x", "xnabla", "el_residual"], rows)


def control_csv(sol: ControlExtremal) -> str:
    """Columns ``t, x, u_rho, p, r1, r2, r3``; kappa-only cells are empty at ``t_0``."""
    ts = sol.x.ts
    rep = sol.report
    rows = []
    for i, t in enumerate(ts.points):
        k = i - 1
        kappa = (sol.w[k], sol.p.values[i], rep.state_residuals[k], rep.costate_residuals[k],
                 rep.stationarity_residuals[k]) if i else (None, sol.p.values[0], None, None, None)
        rows.append((t, sol.x.values[i], *kappa))
    return _csv(["t", "x", "u_rho", "p", "r1", "r2", "r3"], rows)


def read_trajectory(path: str | Path, ts: TimeScale, columns: tuple[str, ...]) -> dict[str, np.ndarray]:
    """Read trajectory columns aligned with ``ts``.

    Columns named ``u_rho`` are read at the kappa-points only (the row for
    ``t_0`` is ignored); others at every point.

    Raises:
        ProblemFileError: unreadable or malformed CSV, missing columns, or
            ``t`` values that do not match the time scale.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ProblemFileError(f"cannot read trajectory: {exc}") from None
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    needed = ("t", *columns)
    missing = [c for c in needed if c not in header]
    if missing:
        raise ProblemFileError(f"trajectory is missing column(s) {missing}")
    data: dict[str, list[float]] = {c: [] for c in needed}
    for lineno, row in enumerate(reader, start=2):
        for c in needed:
            cell = row.get(c)
            if c == "u_rho" and lineno == 2 and not cell:
                data[c].append(math.nan)
                continue
            try:
                value = float(cell)
            except (TypeError, ValueError):
                raise ProblemFileError(f"trajectory line {lineno}, column {c!r}: not a number: {cell!r}") from None
            if not math.isfinite(value):
                raise ProblemFileError(f"trajectory line {lineno}, column {c!r}: not finite")
            data[c].append(value)
    t = np.array(data["t"])
    if t.size != len(ts):
        raise ProblemFileError(f"trajectory has {t.size} rows but the time scale has {len(ts)} points")
    if np.any(np.abs(t - ts.points) > 1e-12 * np.maximum(1.0, np.abs(ts.points))):
        raise ProblemFileError("trajectory 't' column does not match the problem's time scale")
    out = {c: np.array(v) for c, v in data.items()}
    if "u_rho" in out:
        out["u_rho"] = out["u_rho"][1:]
    return out
