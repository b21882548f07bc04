"""Finite time scales and their backward-calculus jump operators.

A time scale here is a finite, strictly increasing set of reals. The
continuum and exotic scales are approximated by fine uniform grids; the
integer and quantum scales are represented exactly on bounded windows.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from typing import Any

import numpy as np

from .errors import NotAMemberError, TimeScaleError

#: gaps at or below this are treated as degenerate graininess
MIN_GAP = 1e-12


class TimeScale:
    """Immutable finite time scale.

    Args:
        points: strictly increasing finite reals, at least two of them.

    Use :func:`from_points` for unsorted or duplicated user input.
    """

    __slots__ = ("_points", "_index", "_nu")

    def __init__(self, points: Iterable[float]):
        pts = np.array([float(p) for p in points], dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise TimeScaleError("a time scale needs at least two points")
        if not np.all(np.isfinite(pts)):
            raise TimeScaleError("time scale points must be finite")
        gaps = np.diff(pts)
        if np.any(gaps <= 0):
            raise TimeScaleError("time scale points must be strictly increasing")
        if np.any(gaps <= MIN_GAP):
            raise TimeScaleError(f"degenerate graininess: gap below {MIN_GAP:g}")
        pts.setflags(write=False)
        nu = np.concatenate(([0.0], gaps))
        nu.setflags(write=False)
        self._points = pts
        self._nu = nu
        self._index = {p: i for i, p in enumerate(pts.tolist())}

    # -- basic accessors -------------------------------------------------

    @property
    def points(self) -> np.ndarray:
        """Read-only array of the points."""
        return self._points

    @property
    def graininess(self) -> np.ndarray:
        """nu at every point, with nu(min) = 0."""
        return self._nu

    @property
    def a(self) -> float:
        return float(self._points[0])

    @property
    def b(self) -> float:
        return float(self._points[-1])

    def __len__(self) -> int:
        return self._points.size

    def __iter__(self):
        return iter(self._points.tolist())

    def __contains__(self, t: object) -> bool:
        try:
            return float(t) in self._index  # type: ignore[arg-type]
        except (TypeError, ValueError):
            return False

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TimeScale):
            return NotImplemented
        return np.array_equal(self._points, other._points)

    def __hash__(self) -> int:
        return hash(self._points.tobytes())

    def __repr__(self) -> str:
        if len(self) <= 6:
            return f"TimeScale({self._points.tolist()})"
        return f"TimeScale([{self.a!r}, ..., {self.b!r}], n={len(self)})"

    def index(self, t: float) -> int:
        """Position of member point ``t``."""
        try:
            return self._index[float(t)]
        except KeyError:
            raise NotAMemberError(f"{t!r} is not a point of {self!r}") from None

    # -- jump operators --------------------------------------------------

    def rho(self, t: float) -> float:
        """Backward jump: the previous point, or ``t`` itself at the minimum."""
        i = self.index(t)
        return float(self._points[max(i - 1, 0)])

    def sigma(self, t: float) -> float:
        """Forward jump: the next point, or ``t`` itself at the maximum."""
        i = self.index(t)
        return float(self._points[min(i + 1, len(self) - 1)])

    def nu(self, t: float) -> float:
        """Backward graininess ``t - rho(t)``."""
        return float(self._nu[self.index(t)])

    def kappa_points(self) -> np.ndarray:
        """Points where the nabla derivative is defined (all but the minimum).

        The minimum of a finite scale is always right-scattered, so it is
        always removed.
        """
        return self._points[1:]

    def restrict(self, a: float, b: float) -> TimeScale:
        """Sub-time-scale on the closed interval ``[a, b]``."""
        i, j = self.index(a), self.index(b)
        if j - i < 1:
            raise TimeScaleError(f"restrict needs a < b, got a={a!r}, b={b!r}")
        return TimeScale(self._points[i : j + 1])

    def to_descriptor(self) -> dict[str, Any]:
        return {"type": "points", "values": self._points.tolist()}


# -- constructors ---------------------------------------------------------


def make_uniform(a: float, b: float, n: int) -> TimeScale:
    """The grid ``{a + i (b - a)/n : i = 0..n}``; approximates hZ and, for large ``n``, R."""
    if not (math.isfinite(a) and math.isfinite(b)) or a >= b:
        raise TimeScaleError(f"make_uniform needs finite a < b, got a={a!r}, b={b!r}")
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise TimeScaleError(f"make_uniform needs a positive integer n, got {n!r}")
    n = int(n)
    h = (b - a) / n
    pts = [a + i * h for i in range(n)]
    pts.append(b)
    return TimeScale(pts)


def make_qscale(q: float, kmin: int, kmax: int) -> TimeScale:
    """The window ``{q**k : k = kmin..kmax}`` of the quantum scale ``q^N0``."""
    if not math.isfinite(q) or q <= 1:
        raise TimeScaleError(f"make_qscale needs q > 1, got {q!r}")
    if int(kmin) != kmin or int(kmax) != kmax or kmin > kmax:
        raise TimeScaleError(f"make_qscale needs integers kmin <= kmax, got {kmin!r}, {kmax!r}")
    if kmin == kmax:
        raise TimeScaleError("make_qscale window must contain at least two points")
    return TimeScale([float(q) ** k for k in range(int(kmin), int(kmax) + 1)])


def from_points(values: Iterable[float]) -> TimeScale:
    """Build a time scale from arbitrary user points.

    Exact duplicates are dropped; distinct points closer than
    :data:`MIN_GAP` are rejected as degenerate.
    """
    try:
        pts = sorted(float(v) for v in values)
    except (TypeError, ValueError) as exc:
        raise TimeScaleError(f"time scale points must be real numbers: {exc}") from None
    deduped: list[float] = []
    for p in pts:
        if deduped and p == deduped[-1]:
            continue
        deduped.append(p)
    return TimeScale(deduped)


def union(pieces: Iterable[TimeScale | Sequence[float]]) -> TimeScale:
    """Concatenate several scales (or point lists) and re-sort."""
    allpts: list[float] = []
    for piece in pieces:
        allpts.extend(piece.points.tolist() if isinstance(piece, TimeScale) else piece)
    return from_points(allpts)


def from_descriptor(desc: Mapping[str, Any]) -> TimeScale:
    """Build a time scale from its JSON descriptor.

    Accepted shapes::

        {"type": "uniform", "a": 0, "b": 1, "n": 10}
        {"type": "qscale", "q": 2, "kmin": 0, "kmax": 3}
        {"type": "points", "values": [0, 0.5, 2]}
        {"type": "union", "pieces": [<descriptor>, ...]}
    """
    if not isinstance(desc, Mapping):
        raise TimeScaleError("time scale descriptor must be an object")
    kind = desc.get("type")
    try:
        if kind == "uniform":
            return make_uniform(_num(desc, "a"), _num(desc, "b"), desc["n"])
        if kind == "qscale":
            return make_qscale(_num(desc, "q"), desc["kmin"], desc["kmax"])
        if kind == "points":
            values = desc["values"]
            if not isinstance(values, list):
                raise TimeScaleError("'values' must be a list")
            return from_points(values)
        if kind == "union":
            return from_points(_piece_points(desc))
    except KeyError as exc:
        raise TimeScaleError(f"time scale descriptor of type {kind!r} is missing {exc}") from None
    raise TimeScaleError(f"unknown time scale type {kind!r}")


def _piece_points(desc: Mapping[str, Any]) -> list[float]:
    # single-point "points" pieces are fine inside a union
    if not isinstance(desc, Mapping):
        raise TimeScaleError("time scale descriptor must be an object")
    if desc.get("type") == "points" and isinstance(desc.get("values"), list):
        return list(desc["values"])
    if desc.get("type") == "union":
        pieces = desc.get("pieces")
        if not isinstance(pieces, list) or not pieces:
            raise TimeScaleError("'pieces' must be a non-empty list")
        return [t for piece in pieces for t in _piece_points(piece)]
    return from_descriptor(desc).points.tolist()


def _num(desc: Mapping[str, Any], key: str) -> float:
    value = desc[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TimeScaleError(f"time scale field {key!r} must be a number")
    return float(value)
