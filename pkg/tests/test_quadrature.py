import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from czbmo.geometry import Cube
from czbmo.quadrature import (
    NEAR_FRACTION,
    batched_rule,
    cube_rule,
    gauss_legendre01,
    interval_rule,
    masked_sum,
    panel_rule,
    richardson,
    weighted_median,
)


def _log_integral(a, b, p):
    """int_a^b log|y - p| dy in closed form."""
    def prim(t):
        return t * math.log(abs(t)) - t if t != 0 else 0.0
    return prim(b - p) - prim(a - p)


@pytest.mark.parametrize("order", [1, 4, 8, 16])
def test_gauss_legendre_exact_for_polynomials(order):
    x, w = gauss_legendre01(order)
    assert w.sum() == pytest.approx(1.0)
    for k in range(2 * order):
        assert np.dot(w, x ** k) == pytest.approx(1 / (k + 1), rel=1e-12)


def test_batched_rule_row_lengths_and_smooth_integrand():
    lo = np.array([0.0, -1.0, 2.0])
    hi = np.array([1.0, 3.0, 2.5])
    y, w = batched_rule(lo, hi)
    assert y.shape == w.shape and y.shape[0] == 3
    assert np.allclose(w.sum(axis=1), hi - lo)
    vals = masked_sum(np.cos(y), w)
    assert np.allclose(vals, np.sin(hi) - np.sin(lo), atol=1e-13)


@pytest.mark.parametrize("p", [0.0, 0.3, 1.0, 1.2])
def test_graded_rule_integrates_log_singularity(p):
    a, b = 0.0, 1.0
    y, w = batched_rule(np.array([a]), np.array([b]), np.array([[p]]), [True])
    with np.errstate(divide="ignore"):
        got = masked_sum(np.log(np.abs(y - p)), w)[0]
    assert got == pytest.approx(_log_integral(a, b, p), abs=1e-10)


def test_coincident_knots_keep_singular_flag():
    # a kink and a singular point at the same place must still grade
    knots = np.array([[0.5, 0.5]])
    y1, w1 = batched_rule(np.array([0.0]), np.array([1.0]), knots, [False, True])
    y2, w2 = batched_rule(np.array([0.0]), np.array([1.0]), knots, [True, False])
    plain, _ = batched_rule(np.array([0.0]), np.array([1.0]), knots, [False, False])
    exact = _log_integral(0.0, 1.0, 0.5)
    for y, w in ((y1, w1), (y2, w2)):
        assert y.size > plain.size
        with np.errstate(divide="ignore"):
            # cells below the float resolution at 0.5 are dropped: about 1e-10 of mass
            assert masked_sum(np.log(np.abs(y - 0.5)), w)[0] == pytest.approx(exact, abs=1e-9)


def test_padding_nodes_are_masked():
    y, w = batched_rule(np.array([0.0, 0.0]), np.array([1.0, 0.0]))
    vals = np.where(w == 0, np.inf, 1.0)
    assert np.allclose(masked_sum(vals, w), [1.0, 0.0])


def test_panel_rule_ignores_distant_singular_knots():
    near = 1.0 + 0.5 * NEAR_FRACTION
    far = 1.0 + 2.0 * NEAR_FRACTION
    y0, _ = panel_rule(0.0, 1.0)
    y_far, _ = panel_rule(0.0, 1.0, [far], [True])
    y_near, _ = panel_rule(0.0, 1.0, [near], [True])
    assert y_far.size == y0.size
    assert y_near.size > y0.size
    # an outside kink does not refine either
    y_kink, _ = panel_rule(0.0, 1.0, [near], [False])
    assert y_kink.size == y0.size


def test_cells_below_float_resolution_are_dropped():
    # t-offsets around x = 1e8: cells finer than the spacing at 1e8 carry no weight
    y, w = batched_rule(np.array([0.0]), np.array([1.0]), np.array([[0.0]]), [True], scale=1e8)
    resolve = 1e4 * np.finfo(float).eps * 1e8
    assert 0.0 < 1.0 - w.sum() <= 2 * resolve


@pytest.mark.parametrize("resolution", [9, 65, 257])
def test_interval_rule_weights_sum_to_length(resolution):
    x, w = interval_rule(-1.0, 2.0, resolution, [0.0, 0.5], [True, False])
    assert w.sum() == pytest.approx(3.0, rel=1e-12)
    assert np.all((x > -1.0) & (x < 2.0))


def test_interval_rule_log_average_and_midpoint_order():
    x, w = interval_rule(-0.5, 0.5, 65, [0.0], [True])
    assert np.dot(w, np.log(np.abs(x))) == pytest.approx(-1 - math.log(2), abs=1e-12)
    errs = []
    for n in (16, 32, 64):
        x, w = interval_rule(0.0, 1.0, n)
        errs.append(abs(np.dot(w, np.exp(x)) - (math.e - 1)))
    assert errs[1] / errs[0] == pytest.approx(0.25, rel=0.01)
    assert errs[2] / errs[1] == pytest.approx(0.25, rel=0.01)


def test_interval_rule_rejects_coarse_resolution():
    with pytest.raises(ValueError):
        interval_rule(0.0, 1.0, 2)


def test_cube_rule_two_dimensions():
    cube = Cube((1.0, -1.0), 2.0)
    nodes, w = cube_rule(cube, 65)
    assert nodes.shape == (65 * 65, 2)
    assert w.sum() == pytest.approx(4.0)
    exact, _ = integrate.dblquad(lambda y, x: x * x + y, 0.0, 2.0, -2.0, 0.0)
    assert np.dot(w, nodes[:, 0] ** 2 + nodes[:, 1]) == pytest.approx(exact, rel=1e-3)


def test_weighted_median_matches_numpy_for_equal_weights():
    v = np.array([5.0, 1.0, 4.0, 2.0, 3.0])
    assert weighted_median(v, np.ones(5)) == 3.0
    with pytest.raises(ValueError):
        weighted_median(np.array([]), np.array([]))


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=30),
       st.lists(st.floats(0.01, 10.0), min_size=30, max_size=30))
def test_weighted_median_minimises_absolute_deviation(values, weights):
    v = np.array(values)
    w = np.array(weights[: len(values)])
    m = weighted_median(v, w)
    best = np.sum(w * np.abs(v - m))
    for c in v:
        assert best <= np.sum(w * np.abs(v - c)) * (1 + 1e-12) + 1e-9


def test_richardson_removes_odd_powers():
    eps = np.array([1 / 64, 1 / 128, 1 / 256, 1 / 512])
    vals = 2.0 + 3.0 * eps - 5.0 * eps ** 3 + 7.0 * eps ** 5
    full, fewer = richardson(eps, vals)
    assert full == pytest.approx(2.0, abs=1e-14)
    # three levels remove the eps and eps^3 terms
    assert fewer == pytest.approx(2.0, abs=1e-9)
    one, same = richardson(eps[:1], vals[:1])
    assert one == same == vals[0]


def test_richardson_vectorised_over_points():
    eps = np.array([0.1, 0.05, 0.025])
    base = np.array([1.0, -2.0])
    vals = base[None, :] + np.outer(eps, [1.0, 4.0])
    full, _ = richardson(eps, vals)
    assert np.allclose(full, base)
