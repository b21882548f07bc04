"""Variational problems whose action depends on the free endpoints.

The discrete action on a finite scale ``t_0 < ... < t_N`` is::

    L[x] = sum_{i=1..N} nu_i f(t_i, x_{i-1}, (x_i - x_{i-1})/nu_i, x_0, x_N)

Its Euler-Lagrange equation lives on ``t_2..t_N``; each free endpoint adds
a transversality condition that involves the integral of ``f_z`` (left) or
``f_s`` (right). The left condition is imposed in ghost-eliminated form,
``f_v(t_1) - nu_1 f_x(t_1) = int f_z``, which is exactly the stationarity of
the discrete action with respect to ``x_0`` and needs no value left of ``a``.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from ._newton import NewtonResult, SolverOptions, newton_solve
from .errors import ExprError, UnboundParameterError
from .expr import LAGRANGE_VARIABLES, Expression, eval_with_sens, parse
from .nabla import GridFunction, exact_sum
from .timescale import TimeScale

__all__ = [
    "Fixed",
    "Free",
    "EndpointCondition",
    "LagrangeProblem",
    "ResidualReport",
    "ExtremalSolution",
    "SolverOptions",
    "evaluate_action",
    "el_residual",
    "transversality_residuals",
    "residual_report",
    "solve_lagrange",
    "stationarity_defect",
]


@dataclass(frozen=True)
class Fixed:
    value: float


@dataclass(frozen=True)
class Free:
    pass


EndpointCondition = Union[Fixed, Free]


def _check_params(exprs: Mapping[str, Expression], params: Mapping[str, float]) -> None:
    for what, e in exprs.items():
        missing = e.parameters - set(params)
        if missing:
            raise UnboundParameterError(f"{what} uses unbound parameter(s) {sorted(missing)}")


@dataclass(frozen=True)
class LagrangeProblem:
    """Extremize ``int_a^b f(t, x^rho, x^nabla, x(a), x(b)) nabla t``.

    ``a`` and ``b`` are the first and last points of ``ts``.
    """

    integrand: Expression
    ts: TimeScale
    at_a: EndpointCondition = field(default_factory=Free)
    at_b: EndpointCondition = field(default_factory=Free)
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if isinstance(self.integrand, str):
            object.__setattr__(self, "integrand", parse(self.integrand))
        self.integrand.check_variables(LAGRANGE_VARIABLES, "lagrangian")
        _check_params({"lagrangian": self.integrand}, self.params)
        for cond in (self.at_a, self.at_b):
            if not isinstance(cond, (Fixed, Free)):
                raise ExprError(f"endpoint condition must be Fixed or Free, got {cond!r}")


@dataclass
class ResidualReport:
    """First-order residuals of a candidate extremal.

    Only the families relevant to the problem kind are filled; absent
    entries are ``None``. ``bc_a``/``bc_b`` are the mismatches with fixed
    endpoint values.
    """

    el_residuals: np.ndarray | None = None
    state_residuals: np.ndarray | None = None
    costate_residuals: np.ndarray | None = None
    stationarity_residuals: np.ndarray | None = None
    trans_a: float | None = None
    trans_b: float | None = None
    bc_a: float | None = None
    bc_b: float | None = None
    newton_iters: int = 0
    degenerate: bool = False

    def _arrays(self):
        return (self.el_residuals, self.state_residuals, self.costate_residuals, self.stationarity_residuals)

    @property
    def max_abs(self) -> float:
        vals = [0.0]
        for arr in self._arrays():
            if arr is not None and arr.size:
                vals.append(float(np.max(np.abs(arr))))
        for s in (self.trans_a, self.trans_b, self.bc_a, self.bc_b):
            if s is not None:
                vals.append(abs(s))
        return max(vals)

    def summary(self) -> dict:
        out = {"max_abs": self.max_abs, "newton_iters": self.newton_iters, "degenerate": self.degenerate}
        names = ("el", "state", "costate", "stationarity")
        for name, arr in zip(names, self._arrays()):
            if arr is not None:
                out[f"max_abs_{name}"] = float(np.max(np.abs(arr))) if arr.size else 0.0
        for name in ("trans_a", "trans_b", "bc_a", "bc_b"):
            out[name] = getattr(self, name)
        return out


@dataclass
class ExtremalSolution:
    x: GridFunction
    objective: float
    report: ResidualReport


# -- residual evaluation ------------------------------------------------------


def _values(p: LagrangeProblem, x) -> np.ndarray:
    vals = x.values if isinstance(x, GridFunction) else np.asarray(x, dtype=float)
    if isinstance(x, GridFunction) and x.ts != p.ts:
        raise ValueError("trajectory is defined on a different time scale")
    if vals.shape != (len(p.ts),):
        raise ValueError(f"trajectory needs {len(p.ts)} values, got shape {vals.shape}")
    return vals


def _sens(p: LagrangeProblem, xv: np.ndarray):
    """f and its partials at every kappa-point."""
    nu = p.ts.graininess[1:]
    at = {
        "t": p.ts.points[1:],
        "x": xv[:-1],
        "v": np.diff(xv) / nu,
        "z": xv[0],
        "s": xv[-1],
    }
    return eval_with_sens(p.integrand, at, p.params)


def evaluate_action(p: LagrangeProblem, x) -> float:
    """The exact discrete action ``sum nu(t) f(t, x(rho t), x^nabla(t), x(a), x(b))``."""
    xv = _values(p, x)
    sv = _sens(p, xv)
    return exact_sum((p.ts.graininess[1:] * sv.value).tolist())


def _el(nu, fx, fv) -> np.ndarray:
    return (fv[1:] - fv[:-1]) / nu[1:] - fx[1:]


def el_residual(p: LagrangeProblem, x) -> np.ndarray:
    """Euler-Lagrange residual ``f_v^nabla - f_x`` at ``t_2..t_N``."""
    xv = _values(p, x)
    if xv.size < 3:
        raise ValueError("Euler-Lagrange residuals need at least 3 points")
    sv = _sens(p, xv)
    return _el(p.ts.graininess[1:], sv.dx, sv.dv)


def _trans(p: LagrangeProblem, nu, sv):
    ta = tb = None
    if isinstance(p.at_a, Free):
        ta = sv.dv[0] - nu[0] * sv.dx[0] - exact_sum((nu * sv.dz).tolist())
    if isinstance(p.at_b, Free):
        tb = sv.dv[-1] + exact_sum((nu * sv.ds).tolist())
    return (None if ta is None else float(ta)), (None if tb is None else float(tb))


def transversality_residuals(p: LagrangeProblem, x) -> tuple[float | None, float | None]:
    """Residuals of the free-endpoint conditions; ``None`` for fixed endpoints.

    Right end: ``f_v(b) + int_a^b f_s``. Left end, ghost-eliminated:
    ``f_v(t_1) - nu(t_1) f_x(t_1) - int_a^b f_z``.
    """
    xv = _values(p, x)
    return _trans(p, p.ts.graininess[1:], _sens(p, xv))


def ghost_derivative_at_a(p: LagrangeProblem, x) -> float:
    """The value ``f_v(a)`` implied by the Euler-Lagrange equation at ``t_1``.

    Extending the equation to ``t_1`` with a ghost point left of ``a`` and
    eliminating the ghost gives ``f_v(a) = f_v(t_1) - nu(t_1) f_x(t_1)``.
    """
    xv = _values(p, x)
    sv = _sens(p, xv)
    return float(sv.dv[0] - p.ts.graininess[1] * sv.dx[0])


def residual_report(p: LagrangeProblem, x, newton_iters: int = 0, degenerate: bool = False) -> ResidualReport:
    xv = _values(p, x)
    nu = p.ts.graininess[1:]
    sv = _sens(p, xv)
    ta, tb = _trans(p, nu, sv)
    return ResidualReport(
        el_residuals=_el(nu, sv.dx, sv.dv),
        trans_a=ta,
        trans_b=tb,
        bc_a=float(xv[0] - p.at_a.value) if isinstance(p.at_a, Fixed) else None,
        bc_b=float(xv[-1] - p.at_b.value) if isinstance(p.at_b, Fixed) else None,
        newton_iters=newton_iters,
        degenerate=degenerate,
    )


# -- solver ----------------------------------------------------------------------


def _endpoint_guess(cond: EndpointCondition, default: float) -> float:
    return cond.value if isinstance(cond, Fixed) else default


def initial_guess(ts: TimeScale, at_a: EndpointCondition, at_b: EndpointCondition) -> np.ndarray:
    """Affine interpolation between endpoint guesses (fixed values, else 0 and 1)."""
    xa = _endpoint_guess(at_a, 0.0)
    xb = _endpoint_guess(at_b, 1.0)
    t = ts.points
    return xa + (xb - xa) * (t - ts.a) / (ts.b - ts.a)


def _free_mask(n: int, at_a: EndpointCondition, at_b: EndpointCondition) -> np.ndarray:
    mask = np.ones(n, dtype=bool)
    mask[0] = isinstance(at_a, Free)
    mask[-1] = isinstance(at_b, Free)
    return mask


def solve_lagrange(p: LagrangeProblem, opts: SolverOptions | None = None) -> ExtremalSolution:
    """Find a stationary trajectory of the discrete action.

    Unknowns are the non-fixed grid values; equations are the
    Euler-Lagrange residuals at ``t_2..t_N`` plus one transversality
    condition per free endpoint. The result is a stationary point only;
    it is not classified as minimizer or maximizer.

    Raises:
        SolverFailure: Newton did not converge within ``opts.max_iters``.
        SingularSystemError: the Newton system is singular and inconsistent.
    """
    opts = opts or SolverOptions()
    n = len(p.ts)
    if n < 3:
        raise ValueError("solve_lagrange needs a time scale with at least 3 points")
    nu = p.ts.graininess[1:]
    mask = _free_mask(n, p.at_a, p.at_b)
    x0 = initial_guess(p.ts, p.at_a, p.at_b)

    def residual(y: np.ndarray) -> np.ndarray:
        xv = x0.copy()
        xv[mask] = y
        sv = _sens(p, xv)
        parts = [_el(nu, sv.dx, sv.dv)]
        ta, tb = _trans(p, nu, sv)
        if ta is not None:
            parts.append([ta])
        if tb is not None:
            parts.append([tb])
        return np.concatenate(parts)

    res: NewtonResult = newton_solve(residual, x0[mask], opts)
    xv = x0.copy()
    xv[mask] = res.y
    x = GridFunction(p.ts, xv)
    return ExtremalSolution(
        x=x,
        objective=evaluate_action(p, xv),
        report=residual_report(p, xv, res.iterations, res.degenerate),
    )


def stationarity_defect(p: LagrangeProblem, x, n_dirs: int = 200, seed: int = 0, eps: float = 1e-6) -> float:
    """Largest ``|dL(x; h)| / ||h||`` over random admissible directions.

    Directions vanish at fixed endpoints; the directional derivative is a
    central difference with step ``eps`` along the unit direction.
    """
    xv = _values(p, x)
    rng = np.random.default_rng(seed)
    mask = _free_mask(xv.size, p.at_a, p.at_b)
    worst = 0.0
    for _ in range(n_dirs):
        h = rng.standard_normal(xv.size) * mask
        h /= np.linalg.norm(h)
        d = (evaluate_action(p, xv + eps * h) - evaluate_action(p, xv - eps * h)) / (2 * eps)
        worst = max(worst, abs(d))
    return worst
