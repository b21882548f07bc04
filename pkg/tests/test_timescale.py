import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nablavar.errors import NotAMemberError, TimeScaleError
from nablavar.timescale import (
    TimeScale,
    from_descriptor,
    from_points,
    make_qscale,
    make_uniform,
    union,
)


@pytest.mark.parametrize(
    "a, b, n, expected",
    [
        (0, 1, 2, [0, 0.5, 1]),
        (0, 3, 3, [0, 1, 2, 3]),
        (-1, 1, 4, [-1, -0.5, 0, 0.5, 1]),
    ],
)
def test_make_uniform(a, b, n, expected):
    assert make_uniform(a, b, n).points.tolist() == expected


@pytest.mark.parametrize("a, b, n", [(1, 1, 3), (2, 1, 3), (0, 1, 0), (0, 1, 1.5)])
def test_make_uniform_rejects(a, b, n):
    with pytest.raises(TimeScaleError):
        make_uniform(a, b, n)


@pytest.mark.parametrize(
    "q, kmin, kmax, expected",
    [(2, 0, 3, [1, 2, 4, 8]), (2, -2, 0, [0.25, 0.5, 1])],
)
def test_make_qscale(q, kmin, kmax, expected):
    assert make_qscale(q, kmin, kmax).points.tolist() == expected


@pytest.mark.parametrize("q", [1.0, 0.5, -2])
def test_make_qscale_rejects_q_not_above_one(q):
    with pytest.raises(TimeScaleError):
        make_qscale(q, 0, 3)


def test_rho_sigma_nu():
    z = TimeScale([0, 1, 2, 3])
    assert z.rho(2) == 1
    assert z.rho(0) == 0
    assert z.sigma(1) == 2
    assert z.sigma(3) == 3
    assert z.nu(2) == 1
    assert z.nu(0) == 0

    q = make_qscale(2, 0, 3)
    assert q.rho(8) == 4
    assert q.nu(8) == 4
    assert make_qscale(2, -2, 0).sigma(0.25) == 0.5


def test_not_a_member():
    z = TimeScale([0, 1, 2, 3])
    for op in (z.rho, z.sigma, z.nu):
        with pytest.raises(NotAMemberError):
            op(1.5)


@pytest.mark.parametrize(
    "points, expected",
    [([0, 1, 2, 3], [1, 2, 3]), ([-1, 1], [1]), ([0.25, 0.5, 1], [0.5, 1])],
)
def test_kappa_points(points, expected):
    assert TimeScale(points).kappa_points().tolist() == expected


def test_restrict():
    assert TimeScale([0, 1, 2, 3]).restrict(1, 3).points.tolist() == [1, 2, 3]
    half = make_uniform(0, 1, 2)
    assert half.restrict(0, 1) == half
    with pytest.raises(TimeScaleError):
        TimeScale([0, 1, 2]).restrict(2, 1)
    with pytest.raises(NotAMemberError):
        TimeScale([0, 1, 2]).restrict(0.5, 2)


def test_invalid_point_sets():
    with pytest.raises(TimeScaleError):
        TimeScale([0])
    with pytest.raises(TimeScaleError):
        TimeScale([0, 1, 1])
    with pytest.raises(TimeScaleError):
        TimeScale([0, math.nan])
    with pytest.raises(TimeScaleError):
        from_points([0, 1e-13, 1])


def test_from_points_sorts_and_dedupes():
    assert from_points([3, 1, 2, 1]).points.tolist() == [1, 2, 3]


def test_union_of_interval_grid_and_integers():
    # a desk-scale stand-in for [-1, 4] U N
    ts = union([make_uniform(-1, 4, 10), [4, 5, 6, 7]])
    assert ts.points[0] == -1 and ts.points[-1] == 7
    assert ts.nu(5) == 1
    assert ts.nu(4) == 0.5


def test_descriptors():
    assert from_descriptor({"type": "uniform", "a": 0, "b": 1, "n": 2}).points.tolist() == [0, 0.5, 1]
    assert from_descriptor({"type": "qscale", "q": 2, "kmin": 0, "kmax": 3}).points.tolist() == [1, 2, 4, 8]
    ts = from_descriptor(
        {"type": "union", "pieces": [{"type": "points", "values": [0]}, {"type": "qscale", "q": 2, "kmin": -2, "kmax": 0}]}
    )
    assert ts.points.tolist() == [0, 0.25, 0.5, 1]
    for bad in ({"type": "cantor"}, {"type": "uniform", "a": 0, "b": 1}, {"type": "points", "values": 3}, [1, 2]):
        with pytest.raises(TimeScaleError):
            from_descriptor(bad)


scales = st.lists(
    st.floats(min_value=-100, max_value=100, allow_nan=False), min_size=2, max_size=40, unique=True
).filter(lambda v: np.min(np.diff(sorted(v))) > 1e-9)


@settings(max_examples=200, deadline=None)
@given(scales)
def test_jump_operator_properties(values):
    ts = from_points(values)
    pts = ts.points.tolist()
    for t in pts[1:-1]:
        assert ts.rho(ts.sigma(t)) == t
        assert ts.sigma(ts.rho(t)) == t
    for t in pts[1:]:
        assert ts.nu(t) > 0
    assert ts.nu(pts[0]) == 0
    assert math.isclose(math.fsum(ts.graininess[1:]), ts.b - ts.a, rel_tol=1e-12, abs_tol=1e-12)


@pytest.mark.parametrize("n", [1, 7, 100])
def test_uniform_has_constant_graininess(n):
    ts = make_uniform(-2, 3, n)
    np.testing.assert_allclose(ts.graininess[1:], 5 / n, rtol=1e-12)


def test_qscale_graininess_matches_quantum_factor():
    q = 1.5
    ts = make_qscale(q, -3, 5)
    t = ts.kappa_points()
    np.testing.assert_allclose(ts.graininess[1:], t * (1 - 1 / q), rtol=1e-14)
