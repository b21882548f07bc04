"""Optimal control with endpoint-dependent cost and dynamics.

Problem::

    extremize  sum_i nu_i f(t_i, x_{i-1}, w_i, x_0, x_N)
    subject to (x_i - x_{i-1}) / nu_i = g(t_i, x_{i-1}, w_i, x_0, x_N)

where ``w_i`` is the control sampled at ``rho(t_i)``. With the Hamiltonian
``H = f + p g`` the normal extremals satisfy, at every kappa-point,

* state:        ``x^nabla - g = 0``
* costate:      ``p^nabla + f_x + p g_x = 0``
* stationarity: ``f_u + p g_u = 0``

plus ``p(a) = -int H_z`` when ``x(a)`` is free and ``p(b) = int H_s`` when
``x(b)`` is free. Only normal extremals (cost multiplier 1) are computed.
"""

from __future__ import annotations

import warnings
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space

from ._newton import SolverOptions, newton_solve
from .errors import RegressivityWarning
from .expr import CONTROL_VARIABLES, Expression, eval_with_sens, parse, sample_hessian
from .nabla import GridFunction, exact_sum
from .timescale import TimeScale
from .varsolve import (
    EndpointCondition,
    Fixed,
    Free,
    ResidualReport,
    _check_params,
    _free_mask,
    initial_guess,
)

REGRESSIVITY_TOL = 1e-10
EIG_TOL = 1e-8


@dataclass(frozen=True)
class ControlProblem:
    """Cost integrand ``f`` and dynamics ``g``, both over ``t, x, u, z, s``."""

    integrand: Expression
    dynamics: Expression
    ts: TimeScale
    at_a: EndpointCondition = field(default_factory=Free)
    at_b: EndpointCondition = field(default_factory=Free)
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("integrand", "dynamics"):
            if isinstance(getattr(self, name), str):
                object.__setattr__(self, name, parse(getattr(self, name)))
        self.integrand.check_variables(CONTROL_VARIABLES, "integrand")
        self.dynamics.check_variables(CONTROL_VARIABLES, "dynamics")
        _check_params({"integrand": self.integrand, "dynamics": self.dynamics}, self.params)


@dataclass
class ControlExtremal:
    """Solved triple. ``w[i-1]`` is the control at ``rho(t_i)``."""

    x: GridFunction
    w: np.ndarray
    p: GridFunction
    objective: float
    report: ResidualReport
    regressivity_ok: bool
    regressivity_margins: np.ndarray


@dataclass(frozen=True)
class Certificate:
    """Outcome of the sampled convexity test.

    ``verdict`` is ``"certified-minimum"``, ``"certified-maximum"`` or
    ``"inconclusive"``. This is evidence from samples, not a proof.
    """

    verdict: str
    samples: int
    half_widths: tuple[float, float, float, float]
    min_eig_f: float
    max_eig_f: float
    min_eig_g: float
    max_eig_g: float
    min_eig_pg: float
    max_eig_pg: float
    min_costate: float

    @property
    def min_eigenvalue(self) -> float:
        """Smallest eigenvalue over all sampled Hessians of f and g."""
        return min(self.min_eig_f, self.min_eig_g)

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "samples": self.samples,
            "half_widths": list(self.half_widths),
            "min_eig_f": self.min_eig_f,
            "max_eig_f": self.max_eig_f,
            "min_eig_g": self.min_eig_g,
            "max_eig_g": self.max_eig_g,
            "min_eig_pg": self.min_eig_pg,
            "max_eig_pg": self.max_eig_pg,
            "min_costate": self.min_costate,
        }


# -- evaluation ---------------------------------------------------------------


def _arrays(cp: ControlProblem, x, w, p):
    n = len(cp.ts)
    xv = np.asarray(x.values if isinstance(x, GridFunction) else x, dtype=float)
    pv = np.asarray(p.values if isinstance(p, GridFunction) else p, dtype=float)
    wv = np.asarray(w, dtype=float)
    if xv.shape != (n,) or pv.shape != (n,) or wv.shape != (n - 1,):
        raise ValueError(
            f"need x and p with {n} values and w with {n - 1}, got "
            f"{xv.shape}, {pv.shape}, {wv.shape}"
        )
    return xv, wv, pv


def _sens(cp: ControlProblem, xv, wv):
    at = {"t": cp.ts.points[1:], "x": xv[:-1], "u": wv, "z": xv[0], "s": xv[-1]}
    return eval_with_sens(cp.integrand, at, cp.params), eval_with_sens(cp.dynamics, at, cp.params)


def _residual_parts(cp: ControlProblem, xv, wv, pv):
    nu = cp.ts.graininess[1:]
    fs, gs = _sens(cp, xv, wv)
    pk = pv[1:]
    r1 = np.diff(xv) / nu - gs.value
    r2 = np.diff(pv) / nu + fs.dx + pk * gs.dx
    r3 = fs.du + pk * gs.du
    ta = tb = None
    if isinstance(cp.at_a, Free):
        ta = float(pv[0] + exact_sum((nu * (fs.dz + pk * gs.dz)).tolist()))
    if isinstance(cp.at_b, Free):
        tb = float(pv[-1] - exact_sum((nu * (fs.ds + pk * gs.ds)).tolist()))
    return r1, r2, r3, ta, tb


def objective(cp: ControlProblem, x, w) -> float:
    xv = np.asarray(x.values if isinstance(x, GridFunction) else x, dtype=float)
    at = {"t": cp.ts.points[1:], "x": xv[:-1], "u": np.asarray(w, dtype=float), "z": xv[0], "s": xv[-1]}
    f = eval_with_sens(cp.integrand, at, cp.params).value
    return exact_sum((cp.ts.graininess[1:] * f).tolist())


def transversality_costate(cp: ControlProblem, x, w, p) -> tuple[float | None, float | None]:
    """``p(a) + int H_z`` (free left end) and ``p(b) - int H_s`` (free right end)."""
    *_, ta, tb = _residual_parts(cp, *_arrays(cp, x, w, p))
    return ta, tb


def hamiltonian_residuals(cp: ControlProblem, x, w, p, newton_iters: int = 0, degenerate: bool = False) -> ResidualReport:
    """State, costate and stationarity residuals at the kappa-points.

    The report also carries the costate transversality residuals and the
    fixed-endpoint mismatches, so ``max_abs`` covers every condition.
    """
    xv, wv, pv = _arrays(cp, x, w, p)
    r1, r2, r3, ta, tb = _residual_parts(cp, xv, wv, pv)
    return ResidualReport(
        state_residuals=r1,
        costate_residuals=r2,
        stationarity_residuals=r3,
        trans_a=ta,
        trans_b=tb,
        bc_a=float(xv[0] - cp.at_a.value) if isinstance(cp.at_a, Fixed) else None,
        bc_b=float(xv[-1] - cp.at_b.value) if isinstance(cp.at_b, Fixed) else None,
        newton_iters=newton_iters,
        degenerate=degenerate,
    )


def check_regressivity(cp: ControlProblem, x, w, p=None) -> tuple[bool, np.ndarray]:
    """nu-regressivity of ``g_x`` along a trajectory.

    Returns ``(ok, margins)`` with ``margins = |1 - nu(t) g_x(t, ...)|`` at
    the kappa-points; ``ok`` iff every margin exceeds 1e-10. ``p`` is
    accepted for signature symmetry and unused.
    """
    xv = np.asarray(x.values if isinstance(x, GridFunction) else x, dtype=float)
    _, gs = _sens(cp, xv, np.asarray(w, dtype=float))
    margins = np.abs(1.0 - cp.ts.graininess[1:] * gs.dx)
    return bool(np.all(margins > REGRESSIVITY_TOL)), margins


# -- solver ---------------------------------------------------------------------


def solve_control(cp: ControlProblem, opts: SolverOptions | None = None) -> ControlExtremal:
    """Solve the Hamiltonian system for a normal extremal.

    Unknowns: the non-fixed states, the ``N`` controls and the ``N + 1``
    costates. Equations: the three residual families at all kappa-points
    plus one transversality condition per free endpoint. The initial
    guess is an affine state with zero control and costate.

    One-parameter families of extremals make the Jacobian rank deficient;
    Newton then takes minimum-norm steps and ``report.degenerate`` is set.
    A warning of class :class:`RegressivityWarning` is issued when ``g_x``
    is not nu-regressive along the result.
    """
    opts = opts or SolverOptions()
    n = len(cp.ts)
    if n < 3:
        raise ValueError("solve_control needs a time scale with at least 3 points")
    mask = _free_mask(n, cp.at_a, cp.at_b)
    x0 = initial_guess(cp.ts, cp.at_a, cp.at_b)
    nx = int(mask.sum())

    def unpack(y):
        xv = x0.copy()
        xv[mask] = y[:nx]
        return xv, y[nx : nx + n - 1], y[nx + n - 1 :]

    def residual(y):
        r1, r2, r3, ta, tb = _residual_parts(cp, *unpack(y))
        extra = [v for v in (ta, tb) if v is not None]
        return np.concatenate((r1, r2, r3, extra))

    y0 = np.concatenate((x0[mask], np.zeros(n - 1), np.zeros(n)))
    res = newton_solve(residual, y0, opts)
    xv, wv, pv = unpack(res.y)
    ok, margins = check_regressivity(cp, xv, wv)
    if not ok:
        warnings.warn(
            "g_x is not nu-regressive along the computed extremal; the costate "
            "equation may not be uniquely solvable",
            RegressivityWarning,
            stacklevel=2,
        )
    return ControlExtremal(
        x=GridFunction(cp.ts, xv),
        w=wv.copy(),
        p=GridFunction(cp.ts, pv),
        objective=objective(cp, xv, wv),
        report=hamiltonian_residuals(cp, xv, wv, pv, res.iterations, res.degenerate),
        regressivity_ok=ok,
        regressivity_margins=margins,
    )


# -- sufficiency ------------------------------------------------------------------


def certify_convexity(cp: ControlProblem, sol: ControlExtremal, samples: int = 20, seed: int = 0) -> Certificate:
    """Sampled test of the joint-convexity sufficient condition.

    At each kappa-time the Hessians of ``f`` and ``g`` over ``(x, u, z, s)``
    are sampled in a box centred on the extremal's arguments, with half
    width ``1 + 0.1 * range`` of each coordinate along the trajectory.

    A minimum is certified when every sampled Hessian of ``f`` is PSD and
    every ``p(t) * Hess g`` is PSD; a maximum when the same matrices are
    NSD. Weighting the Hessian of ``g`` by the costate reduces to the usual
    "g convex and p >= 0" when ``p >= 0``, and also accepts affine ``g``
    with costates of either sign. Eigenvalue tolerance is 1e-8 (scaled by
    ``max(1, |p|)`` for the weighted term).
    """
    xv, wv, pv = sol.x.values, np.asarray(sol.w), sol.p.values
    t = cp.ts.points[1:]
    centers = np.stack(
        [xv[:-1], wv, np.full_like(wv, xv[0]), np.full_like(wv, xv[-1])], axis=-1
    )
    ranges = np.ptp(centers, axis=0)
    half = 1.0 + 0.1 * ranges
    rng = np.random.default_rng(seed)
    offsets = rng.uniform(-1.0, 1.0, size=(t.size, samples, 4)) * half
    pts = np.concatenate((centers[:, None, :], centers[:, None, :] + offsets), axis=1)
    at = {
        "t": np.broadcast_to(t[:, None], pts.shape[:2]),
        "x": pts[..., 0],
        "u": pts[..., 1],
        "z": pts[..., 2],
        "s": pts[..., 3],
    }
    eig_f = np.linalg.eigvalsh(sample_hessian(cp.integrand, at, cp.params))
    eig_g = np.linalg.eigvalsh(sample_hessian(cp.dynamics, at, cp.params))
    pk = pv[1:]
    # eigenvalues of p*H are p*eig(H), reordered when p < 0
    eig_pg = pk[:, None, None] * eig_g
    scale = np.maximum(1.0, np.abs(pk))[:, None, None]
    f_convex = eig_f.min() >= -EIG_TOL
    f_concave = eig_f.max() <= EIG_TOL
    pg_psd = bool(np.all(eig_pg >= -EIG_TOL * scale))
    pg_nsd = bool(np.all(eig_pg <= EIG_TOL * scale))
    if f_convex and pg_psd:
        verdict = "certified-minimum"
    elif f_concave and pg_nsd:
        verdict = "certified-maximum"
    else:
        verdict = "inconclusive"
    return Certificate(
        verdict=verdict,
        samples=samples,
        half_widths=tuple(float(h) for h in half),
        min_eig_f=float(eig_f.min()),
        max_eig_f=float(eig_f.max()),
        min_eig_g=float(eig_g.min()),
        max_eig_g=float(eig_g.max()),
        min_eig_pg=float(eig_pg.min()),
        max_eig_pg=float(eig_pg.max()),
        min_costate=float(pv.min()),
    )


# -- diagnostics -------------------------------------------------------------------


def _constraint_jacobian(cp: ControlProblem, xv, wv) -> np.ndarray:
    """Jacobian of the state residuals and fixed-endpoint rows w.r.t. (x, w)."""
    n = len(cp.ts)
    nu = cp.ts.graininess[1:]
    _, gs = _sens(cp, xv, wv)
    rows = []
    jac = np.zeros((n - 1, 2 * n - 1))
    for i in range(n - 1):
        jac[i, i + 1] += 1.0 / nu[i]
        jac[i, i] += -1.0 / nu[i] - gs.dx[i]
        jac[i, n + i] = -gs.du[i]
        jac[i, 0] -= gs.dz[i]
        jac[i, n - 1] -= gs.ds[i]
    rows.append(jac)
    for k, cond in ((0, cp.at_a), (n - 1, cp.at_b)):
        if isinstance(cond, Fixed):
            row = np.zeros((1, 2 * n - 1))
            row[0, k] = 1.0
            rows.append(row)
    return np.vstack(rows)


def stationarity_defect(cp: ControlProblem, sol: ControlExtremal, n_dirs: int = 200, seed: int = 0, eps: float = 1e-6) -> float:
    """Largest ``|dL| / ||h||`` over random directions tangent to the constraints.

    Directions ``h = (dx, dw)`` are drawn from the null space of the
    linearized dynamics and fixed-endpoint conditions, so they are
    admissible to first order; the objective's directional derivative is a
    central difference.
    """
    xv, wv = sol.x.values, np.asarray(sol.w)
    n = len(cp.ts)
    basis = null_space(_constraint_jacobian(cp, xv, wv))
    if basis.shape[1] == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    y = np.concatenate((xv, wv))
    worst = 0.0
    for _ in range(n_dirs):
        h = basis @ rng.standard_normal(basis.shape[1])
        h /= np.linalg.norm(h)
        yp, ym = y + eps * h, y - eps * h
        d = (objective(cp, yp[:n], yp[n:]) - objective(cp, ym[:n], ym[n:])) / (2 * eps)
        worst = max(worst, abs(d))
    return worst
