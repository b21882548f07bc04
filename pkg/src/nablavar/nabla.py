"""Nabla derivative and nabla integral of grid functions on finite time scales.

On a finite scale every point but the minimum is left-scattered, so the
nabla derivative is the backward difference quotient and the nabla
integral is the exact sum ``sum_{t in (a, b]} nu(t) f(t)``. No quadrature
is involved anywhere.
"""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Callable, Iterable
from dataclasses import dataclass

import numpy as np

from .errors import NotAMemberError
from .timescale import TimeScale


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real values attached to the points of a time scale.

    If ``kappa`` is true the values are aligned with ``ts.kappa_points()``
    (every point but the minimum), which is where nabla derivatives live.
    """

    ts: TimeScale
    values: np.ndarray
    kappa: bool = False

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        expected = len(self.ts) - 1 if self.kappa else len(self.ts)
        if vals.shape != (expected,):
            raise ValueError(
                f"grid function needs {expected} values for this time scale, got shape {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_callable(cls, ts: TimeScale, fn: Callable[[np.ndarray], np.ndarray]) -> GridFunction:
        return cls(ts, np.broadcast_to(fn(ts.points), (len(ts),)))

    @property
    def points(self) -> np.ndarray:
        return self.ts.kappa_points() if self.kappa else self.ts.points

    def __call__(self, t: float) -> float:
        i = self.ts.index(t)
        if self.kappa:
            if i == 0:
                raise NotAMemberError(f"{t!r} is not a kappa-point of {self.ts!r}")
            i -= 1
        return float(self.values[i])

    def on_kappa(self) -> np.ndarray:
        """Values at the kappa-points."""
        return self.values if self.kappa else self.values[1:]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "value"])
        for t, v in zip(self.points.tolist(), self.values.tolist()):
            writer.writerow([repr(t), repr(v)])
        return buf.getvalue()


def nabla_derivative(f: GridFunction) -> GridFunction:
    """``f^nabla(t) = (f(t) - f(rho(t))) / nu(t)`` at every kappa-point."""
    if f.kappa:
        raise ValueError("nabla_derivative needs a function defined on all points")
    nu = f.ts.graininess[1:]
    return GridFunction(f.ts, np.diff(f.values) / nu, kappa=True)


def rho_compose(f: GridFunction) -> GridFunction:
    """``f o rho``; at the minimum this is ``f(min)``."""
    if f.kappa:
        raise ValueError("rho_compose needs a function defined on all points")
    vals = np.concatenate((f.values[:1], f.values[:-1]))
    return GridFunction(f.ts, vals)


def exact_sum(terms: Iterable[float]) -> float:
    """Correctly rounded sum (compensated, order independent)."""
    return math.fsum(terms)


def nabla_integral(f: GridFunction, a: float, b: float) -> float:
    """Oriented nabla integral ``int_a^b f(t) nabla t``.

    Equals ``sum_{t in (a, b]} nu(t) f(t)`` for ``a < b``, zero for
    ``a == b`` and the negated integral from ``b`` to ``a`` for ``a > b``.
    Only values at kappa-points are used, so ``f`` may be either full or
    kappa-aligned.
    """
    i, j = f.ts.index(a), f.ts.index(b)
    if i == j:
        return 0.0
    sign = 1.0
    if i > j:
        i, j, sign = j, i, -1.0
    nu = f.ts.graininess
    kv = f.on_kappa()
    # kappa index of point k is k - 1
    terms = nu[i + 1 : j + 1] * kv[i:j]
    return sign * exact_sum(terms.tolist())


def integrate_values(ts: TimeScale, kappa_values: np.ndarray) -> float:
    """Integral over the whole scale of values given at the kappa-points."""
    return exact_sum((ts.graininess[1:] * np.asarray(kappa_values, dtype=float)).tolist())


def antiderivative(f: GridFunction, a: float) -> GridFunction:
    """``F(t) = int_a^t f nabla tau`` at every point of the scale."""
    i0 = f.ts.index(a)
    vals = [nabla_integral(f, a, t) if k != i0 else 0.0 for k, t in enumerate(f.ts.points.tolist())]
    return GridFunction(f.ts, vals)
