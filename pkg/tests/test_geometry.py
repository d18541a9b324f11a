import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from czbmo.geometry import (
    Cube,
    FamilySpec,
    cube_family,
    decade_range,
    dilate,
    enclosing_with_reference,
    family_extent,
    log_distance,
    reference_cube,
)

centres = st.floats(-1e6, 1e6, allow_nan=False)
sides = st.floats(1e-6, 1e6, allow_nan=False)


def test_cube_validation():
    with pytest.raises(ValueError):
        Cube((0.0,), 0.0)
    with pytest.raises(ValueError):
        Cube((math.inf,), 1.0)
    with pytest.raises(ValueError):
        Cube((), 1.0)


def test_cube_bounds_and_roundtrip():
    q = Cube.interval(2.0, 3.0)
    assert q.lower[0] == 0.5 and q.upper[0] == 3.5
    assert q.volume == 3.0
    assert Cube.from_dict(q.to_dict()) == q
    with pytest.raises(ValueError):
        Cube.from_dict({"side": 1.0})


def test_reference_cube_has_unit_log_distance():
    assert reference_cube(1) == Cube((0.0,), 1.0)
    assert log_distance(reference_cube(1)) == 1.0
    assert log_distance(reference_cube(3)) == 1.0


@pytest.mark.parametrize("side", [1e-3, 0.1, 0.5])
def test_small_cube_inside_reference(side):
    assert log_distance(Cube.interval(0.0, side)) == pytest.approx(math.log(1 / side) + 1)


@pytest.mark.parametrize("side", [2.0, 10.0, 1e4])
def test_large_cube_around_reference(side):
    assert log_distance(Cube.interval(0.0, side)) == pytest.approx(math.log(side) + 1)


def test_far_unit_cube():
    # hull of Q(c, 1) and Q0 is [-1/2, c + 1/2]
    for c in (3.0, 100.0, 1e5):
        enc = enclosing_with_reference(Cube.interval(c, 1.0))
        assert enc.tilde_side == pytest.approx(c + 1)
        assert log_distance(Cube.interval(c, 1.0)) == pytest.approx(math.log(c + 1) + 1)


def test_enclosing_in_two_dimensions():
    enc = enclosing_with_reference(Cube((3.0, 0.0), 1.0))
    assert enc.tilde_side == pytest.approx(4.0)
    assert enc.cube.contains(Cube((3.0, 0.0), 1.0), 1e-12)
    assert enc.cube.contains(reference_cube(2), 1e-12)


@given(centres, sides)
def test_log_distance_at_least_one(c, side):
    assert log_distance(Cube.interval(c, side)) >= 1.0


@given(centres, sides)
def test_enclosing_contains_both(c, side):
    q = Cube.interval(c, side)
    enc = enclosing_with_reference(q).cube
    assert enc.contains(q, 1e-9) and enc.contains(reference_cube(1), 1e-9)


@given(st.floats(1.0, 1e6), st.floats(1e-6, 1.0))
def test_far_regime_ratio(c, side):
    # |c| >= 1 >= l: l~ lies in [|c|, 2|c|], so L(Q) - log(|c|/l) - 1 is in [0, log 2]
    for centre in (c, -c):
        ratio = log_distance(Cube.interval(centre, side)) / (math.log(c / side) + 1)
        assert 1.0 - 1e-12 <= ratio <= 1.0 + math.log(2) + 1e-12


def test_far_regime_ratio_fails_for_large_sides():
    # with l >= 1, L(Q) = log l~ + 1 grows while log(|c|/l) + 1 stays 1
    ratios = [log_distance(Cube.interval(c, c)) / 1.0 for c in (10.0, 1e3, 1e6)]
    assert ratios == pytest.approx([math.log(c + (c + 1) / 2) + 1 for c in (10.0, 1e3, 1e6)])
    assert ratios[-1] > 3


@given(centres, st.floats(1e-3, 1e3), st.floats(1.0, 64.0))
def test_dilation_keeps_centre(c, side, alpha):
    q = dilate(Cube.interval(c, side), alpha)
    assert q.c == c and q.side == pytest.approx(alpha * side)


def test_dilate_rejects_nonpositive():
    with pytest.raises(ValueError):
        dilate(reference_cube(), 0.0)


def test_family_is_cartesian_and_deduplicated():
    spec = FamilySpec(sides=(0.1, 1.0, 1.0), distances=(0.0, 5.0), directions=((1.0,), (-1.0,)))
    cubes = cube_family(spec)
    # the zero distance coincides for both directions
    assert len(cubes) == 6
    assert cubes[0] == Cube.interval(0.0, 0.1)
    assert Cube.interval(-5.0, 1.0) in cubes


def test_family_from_decades_descriptor():
    cubes = cube_family({"sides": {"decades": [-1, 1]}, "distances": {"decades": [0, 2], "include_zero": True}})
    assert len(cubes) == 3 * 4
    assert sorted({q.side for q in cubes}) == pytest.approx([0.1, 1.0, 10.0])
    assert family_extent(cubes) == pytest.approx((2.0, 2.0))


def test_family_explicit_cubes_and_errors():
    cubes = cube_family({"cubes": [{"center": [1.0], "side": 2.0}]})
    assert cubes == [Cube.interval(1.0, 2.0)]
    with pytest.raises(ValueError):
        cube_family({"cubes": []})
    with pytest.raises(ValueError):
        FamilySpec(sides=(-1.0,))
    with pytest.raises(ValueError):
        cube_family({"sides": {"decades": [2, 1]}})


def test_family_spec_roundtrip():
    spec = FamilySpec(sides=(1.0, 2.0), distances=(0.0, 3.0))
    assert FamilySpec.from_dict(spec.to_dict()) == spec


def test_decade_range():
    assert decade_range(-1, 1) == pytest.approx([0.1, 1.0, 10.0])
    assert len(decade_range(0, 2, per_decade=3)) == 7
    assert np.allclose(np.diff(np.log10(decade_range(0, 2, 3))), 1 / 3)


@given(centres, sides)
def test_enclosing_is_minimal(c, side):
    q = Cube.interval(c, side)
    hull = enclosing_with_reference(q)
    shrunk = hull.tilde_side * (1 - 1e-9)
    lo = min(q.lower[0], -0.5)
    hi = max(q.upper[0], 0.5)
    # no interval of the shrunk side covers [lo, hi]
    assert shrunk < hi - lo
