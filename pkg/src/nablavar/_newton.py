"""Damped Newton iteration with a finite-difference Jacobian.

Shared by the Lagrange and optimal-control solvers. Rank-deficient but
consistent systems (one-parameter families of extremals) are handled by a
minimum-norm step and reported as degenerate.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from .errors import SingularSystemError, SolverFailure

log = logging.getLogger(__name__)

FD_REL_STEP = 1e-7
MAX_HALVINGS = 30
#: smallest/largest singular value ratio below which the Jacobian is rank deficient
DEGENERACY_RATIO = 1e-8


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-11
    max_iters: int = 50

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol!r}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 0:
            raise ValueError(f"max_iters must be a non-negative integer, got {self.max_iters!r}")


@dataclass
class NewtonResult:
    y: np.ndarray
    residual: np.ndarray
    iterations: int
    degenerate: bool


def fd_jacobian(residual: Callable[[np.ndarray], np.ndarray], y: np.ndarray, r0: np.ndarray) -> np.ndarray:
    """Forward-difference Jacobian, step ``1e-7 * max(1, |y_i|)`` per column."""
    jac = np.empty((r0.size, y.size))
    for i in range(y.size):
        h = FD_REL_STEP * max(1.0, abs(y[i]))
        yp = y.copy()
        yp[i] += h
        # use the representable step actually taken
        jac[:, i] = (residual(yp) - r0) / (yp[i] - y[i])
    return jac


def is_rank_deficient(jac: np.ndarray) -> bool:
    if jac.size == 0:
        return False
    sv = np.linalg.svd(jac, compute_uv=False)
    return bool(sv[0] == 0 or sv[-1] < DEGENERACY_RATIO * sv[0])


def _max_abs(r: np.ndarray) -> float:
    if r.size == 0:
        return 0.0
    if not np.all(np.isfinite(r)):
        return float("inf")
    return float(np.max(np.abs(r)))


def _norm2(r: np.ndarray) -> float:
    if not np.all(np.isfinite(r)):
        return float("inf")
    return float(np.linalg.norm(r))


def newton_solve(
    residual: Callable[[np.ndarray], np.ndarray],
    y0: np.ndarray,
    opts: SolverOptions,
) -> NewtonResult:
    """Solve ``residual(y) = 0`` to ``max|residual| <= opts.tol``.

    Each step halves (up to 30 times) until the Euclidean residual norm
    strictly decreases. When the Jacobian is rank deficient the
    minimum-norm least-squares step is used instead of a direct solve.

    Raises:
        SolverFailure: iteration budget exhausted, or no decrease along a
            full-rank Newton direction.
        SingularSystemError: no decrease along a rank-deficient direction
            (an inconsistent singular system).
    """
    y = np.array(y0, dtype=float)
    r = residual(y)
    iters = 0
    degenerate = False
    jac = None
    while _max_abs(r) > opts.tol:
        if iters >= opts.max_iters:
            raise SolverFailure("Newton iteration did not converge", _max_abs(r), iters)
        jac = fd_jacobian(residual, y, r)
        rank_def = is_rank_deficient(jac)
        if rank_def:
            degenerate = True
            step = np.linalg.lstsq(jac, -r, rcond=DEGENERACY_RATIO)[0]
        else:
            step = np.linalg.solve(jac, -r)
        norm = _norm2(r)
        lam = 1.0
        for _ in range(MAX_HALVINGS + 1):
            y_try = y + lam * step
            r_try = residual(y_try)
            if _norm2(r_try) < norm:
                break
            lam *= 0.5
        else:
            if rank_def:
                raise SingularSystemError(
                    "singular Newton system with no decreasing direction; the problem may "
                    "have no normal extremal (abnormal case) or be inconsistent",
                    _max_abs(r),
                )
            raise SolverFailure("line search could not decrease the residual", _max_abs(r), iters)
        y, r = y_try, r_try
        iters += 1
        log.debug("newton iter %d: step scale %g, max|r| = %.3e", iters, lam, _max_abs(r))
    if jac is None:
        # converged without iterating; still classify the system
        degenerate = is_rank_deficient(fd_jacobian(residual, y, r))
    return NewtonResult(y, r, iters, degenerate)
