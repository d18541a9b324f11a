import math

import numpy as np
import pytest
from scipy import integrate

from czbmo.errors import ConfigError, NumericalError, SingularPointError
from czbmo.funcspace import Constant, LogAbs, LogShiftDiff, Tabulated, abs_profile, resolve_function
from czbmo.geometry import Cube, reference_cube
from czbmo.kernels import commutator, hilbert, resolve_kernel
from czbmo.operator import (
    QuadratureConfig,
    apply_truncated,
    apply_truncated_bmo,
    evaluation_grid,
    operator_bmo_seminorm,
    operator_oscillation,
    perturbation_term,
    tilde_apply,
    tilde_value,
    truncated_at,
)

CFG = QuadratureConfig()
ABS = commutator(abs_profile())
SHARPNESS_ORACLE = 3 * math.log(1.5) - math.log(2)


# -- configuration ------------------------------------------------------------------------

def test_quadrature_config_validation():
    for bad in ({"pv_epsilons": (0.01, 0.02)}, {"pv_epsilons": ()}, {"pv_epsilons": (0.6,)},
                {"tail_tolerance": 0.0}, {"shell_count": 0}, {"near_nodes": 0}):
        with pytest.raises(ConfigError):
            QuadratureConfig(**bad)
    with pytest.raises(ConfigError):
        QuadratureConfig.from_dict({"nosuch": 1})
    cfg = QuadratureConfig(pv_epsilons=(0.1, 0.05), shell_count=12)
    assert QuadratureConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.margin == 0.1


# -- closed forms --------------------------------------------------------------------------

@pytest.mark.parametrize("c,side", [(0.0, 1.0), (0.3, 1e-2), (-50.0, 3.0), (1e3, 1e2), (2.0, 40.0)])
def test_hilbert_annihilates_constants(c, side):
    q = Cube.interval(c, side)
    x, _ = evaluation_grid(q, 33)
    res = apply_truncated(hilbert(), Constant(1.0), q, x)
    assert np.max(np.abs(res.total_values)) <= 1e-6
    assert np.allclose(res.near_values + res.far_values, res.total_values)
    assert res.tail_bound < CFG.tail_tolerance


@pytest.mark.parametrize("c", [1.0, 10.0, 1e3])
def test_commutator_closed_form(c):
    q = Cube.interval(c, c)
    x, _ = evaluation_grid(q, 65)
    res = apply_truncated(ABS, Constant(1.0), q, x)
    assert np.max(np.abs(res.total_values - 2 * np.log(x / c))) <= 1e-4


def test_commutator_values_at_sample_points():
    assert apply_truncated(ABS, Constant(1.0), Cube.interval(1.0, 1.0), [1.0]).total_values[0] == \
        pytest.approx(0.0, abs=1e-8)
    val = apply_truncated(ABS, Constant(1.0), Cube.interval(10.0, 10.0), [12.0]).total_values[0]
    assert val == pytest.approx(2 * math.log(1.2), abs=1e-8)
    assert val == pytest.approx(0.3646, abs=1e-4)


def test_sharpness_oscillation_matches_oracle():
    oracle = 2 * integrate.quad(lambda t: abs(math.log(t)), 0.5, 1.5, points=[1.0])[0]
    assert oracle == pytest.approx(SHARPNESS_ORACLE, abs=1e-12)
    for c in (1.0, 100.0):
        osc = operator_oscillation(ABS, Constant(1.0), Cube.interval(c, c), resolution=65)
        assert osc.value == pytest.approx(oracle, abs=1e-3)


def test_hilbert_of_log_is_a_step():
    # H log|x| = -(pi^2 / 2) sign(x) + const
    q = reference_cube()
    x, _ = evaluation_grid(q, 32)
    res = apply_truncated_bmo(hilbert(), LogAbs(), q, x, on_guard="skip")
    pos = res.total_values[res.eval_points > 0]
    neg = res.total_values[res.eval_points < 0]
    assert np.std(pos) < 1e-7 and np.std(neg) < 1e-7
    assert np.mean(pos) - np.mean(neg) == pytest.approx(-math.pi ** 2, abs=1e-6)
    osc = operator_oscillation(hilbert(), LogAbs(), q, resolution=64)
    assert osc.value == pytest.approx(math.pi ** 2 / 2, abs=1e-6)


# -- BMO form -------------------------------------------------------------------------------

def test_bmo_form_for_constants():
    q = Cube.interval(3.0, 2.0)
    x, _ = evaluation_grid(q, 9)
    one = apply_truncated(ABS, Constant(1.0), q, x)
    five = apply_truncated_bmo(ABS, Constant(5.0), q, x)
    assert np.allclose(five.total_values, 5 * one.total_values, atol=1e-10)
    assert np.allclose(five.fluctuation_part, 0.0, atol=1e-12)
    assert five.mean_2q == pytest.approx(5.0)
    h = apply_truncated_bmo(hilbert(), Constant(-2.0), q, x)
    assert np.max(np.abs(h.total_values)) <= 1e-6


def test_bmo_form_splits_into_parts():
    q = Cube.interval(10.0, 1.0)
    x, _ = evaluation_grid(q, 9)
    res = apply_truncated_bmo(hilbert(), LogAbs(), q, x)
    assert np.all(np.isfinite(res.total_values))
    assert np.allclose(res.constant_part + res.fluctuation_part, res.total_values, atol=1e-12)
    assert res.mean_2q == pytest.approx(math.log(10.0), abs=1e-2)


# -- PV and tail certificates ----------------------------------------------------------------

def test_pv_levels_agree_on_smooth_input():
    f = resolve_function("atan-profile")
    for q in (reference_cube(), Cube.interval(5.0, 2.0), Cube.interval(-40.0, 0.1)):
        res = apply_truncated(hilbert(), f, q, evaluation_grid(q, 17)[0])
        assert res.pv_change < 1e-6


def test_tail_certificate():
    q = Cube.interval(2.0, 1.0)
    x, _ = evaluation_grid(q, 9)
    f = resolve_function("atan-profile")
    loose = apply_truncated(hilbert(), f, q, x, QuadratureConfig(tail_tolerance=1e-4))
    tight = apply_truncated(hilbert(), f, q, x, QuadratureConfig(tail_tolerance=5e-5))
    assert loose.tail_bound < 1e-4 and tight.tail_bound < 5e-5
    assert tight.shell_count >= loose.shell_count
    assert np.max(np.abs(tight.total_values - loose.total_values)) < loose.tail_bound


def test_insufficient_shell_count_is_reported():
    q = Cube.interval(0.0, 1.0)
    with pytest.raises(NumericalError, match="tail bound"):
        apply_truncated(hilbert(), LogAbs(), q, [0.3], QuadratureConfig(shell_count=2, tail_tolerance=1e-12))


# -- guards ---------------------------------------------------------------------------------

def test_points_at_singularity_are_guarded():
    q = reference_cube()
    with pytest.raises(SingularPointError):
        apply_truncated_bmo(hilbert(), LogAbs(), q, [0.0])
    res = apply_truncated_bmo(hilbert(), LogAbs(), q, [0.0, 0.001, 0.25], on_guard="skip")
    assert res.skipped_points == [0.0, 0.001]
    assert res.eval_points.tolist() == [0.25]
    with pytest.raises(SingularPointError):
        apply_truncated_bmo(hilbert(), LogAbs(), q, [0.0], on_guard="skip")


def test_points_outside_cube_are_rejected():
    with pytest.raises(ValueError):
        apply_truncated(hilbert(), Constant(1.0), reference_cube(), [0.7])


# -- T~ and base-cube independence ------------------------------------------------------------

def test_tilde_of_one():
    res = tilde_apply(hilbert(), Constant(1.0), [-30.0, -0.2, 0.1, 4.0, 3e5])
    assert np.max(np.abs(res.total_values)) < 1e-5
    assert abs(res.tilde_mean) < 1e-8
    # A = |x|: T_{Q0} 1(x) = 2 log|x| + 2 for |x| > 1
    for x in (2.0, -7.0, 150.0):
        assert tilde_value(ABS, Constant(1.0), x) == pytest.approx(2 * math.log(abs(x)) + 2, abs=1e-6)


@pytest.mark.parametrize("kernel", ["hilbert", "commutator:abs", "commutator:plateau"])
@pytest.mark.parametrize("f", ["const:1", "logabs"])
def test_base_cube_constancy(kernel, f):
    k, fn = resolve_kernel(kernel), resolve_function(f)
    q1, q2 = Cube.interval(0.9, 1.3), Cube.interval(1.2, 0.8)
    x, _ = evaluation_grid(Cube.interval(1.175, 0.45), 11)
    a = apply_truncated_bmo(k, fn, q1, x).total_values
    b = apply_truncated_bmo(k, fn, q2, x).total_values
    assert np.std(a - b) <= 1e-7


def test_direct_and_tilde_differ_by_a_constant_far_away():
    q = Cube.interval(40.0, 3.0)
    x, _ = evaluation_grid(q, 7)
    for k in (hilbert(), ABS):
        direct = apply_truncated_bmo(k, LogAbs(), q, x).total_values
        tilde = tilde_apply(k, LogAbs(), x).total_values
        assert np.std(direct - tilde) < 1e-7


def test_coincident_kink_and_singularity():
    # from x = 0.5 the plateau kink at 1 and the log singularity at 0 are both at distance 0.5
    k = resolve_kernel("commutator:plateau")
    x = np.array([0.3, 0.5, 0.7])
    a = apply_truncated_bmo(k, LogAbs(), Cube.interval(0.5, 1.0), x).total_values
    b = apply_truncated_bmo(k, LogAbs(), Cube.interval(0.4, 0.9), x).total_values
    assert np.std(a - b) <= 1e-7


def test_scalar_route_matches_vectorised_route():
    q = Cube.interval(3.0, 2.0)
    x, _ = evaluation_grid(q, 5)
    vec = apply_truncated(ABS, LogAbs(), q, x).total_values
    sca = [truncated_at(ABS, LogAbs(), q, float(v)) for v in x]
    assert np.allclose(vec, sca, atol=1e-8)


# -- perturbation identity against an independent global PV --------------------------------------

HAT = Tabulated((-1.5, 0.5, 2.5), (0.0, 1.0, 0.0))


def _hat(y):
    return float(np.interp(y, HAT.grid, HAT.values))


def _global_hilbert(x, half=0.05):
    """PV int hat(y) / (x - y) dy with scipy's Cauchy weight on a kink-free window."""
    pv = integrate.quad(_hat, x - half, x + half, weight="cauchy", wvar=x)[0]
    rest = 0.0
    for a, b in ((-1.5, x - half), (x + half, 2.5)):
        pts = [p for p in (0.5,) if a < p < b]
        rest += integrate.quad(lambda y: _hat(y) / (y - x), a, b, points=pts or None, limit=200)[0]
    return -(pv + rest)


def test_perturbation_identity_for_compact_hat():
    m = integrate.quad(_hat, -1.0, 1.0, points=[0.5])[0] / 2
    oracle = sum(integrate.quad(lambda y: -(_hat(y) - m) / y, a, b, points=pts)[0]
                 for a, b, pts in ((1.0, 2.5, None), (-2.5, -1.0, [-1.5])))
    assert perturbation_term(hilbert(), HAT) == pytest.approx(oracle, abs=1e-8)
    for x in (-0.3, 0.1, 0.37, 1.7, -4.0):
        diff = _global_hilbert(x) - tilde_value(hilbert(), HAT, x)
        assert diff == pytest.approx(oracle, abs=1e-7)


# -- seminorm estimates ----------------------------------------------------------------------------

def test_operator_seminorm_examples():
    fam = [Cube.interval(c, c) for c in (1.0, 10.0, 100.0)]
    est = operator_bmo_seminorm(ABS, Constant(1.0), fam, cross_check_every=1)
    assert est.value == pytest.approx(SHARPNESS_ORACLE, abs=1e-3)
    assert max(est.per_cube) - min(est.per_cube) < 1e-3
    assert est.extras["cross_check_max_difference"] < 1e-6
    zero = operator_bmo_seminorm(hilbert(), Constant(1.0), [reference_cube(), Cube.interval(5.0, 0.1)])
    assert zero.value < 1e-6
    with pytest.raises(ValueError):
        operator_bmo_seminorm(hilbert(), Constant(1.0), [])


def test_logshift_operator_seminorm_uniform_in_s():
    vals = []
    for s in (1.0, 10.0, 1e3):
        fam = [Cube.interval(c, l * s) for c in (0.0, s) for l in (0.1, 1.0, 10.0)]
        vals.append(operator_bmo_seminorm(hilbert(), LogShiftDiff((s,)), fam, resolution=33,
                                          cross_check_every=0).value)
    assert max(vals) <= 2 * vals[0] and min(vals) >= vals[0] / 2


def test_result_serialisation():
    res = apply_truncated_bmo(ABS, LogAbs(), Cube.interval(2.0, 1.0), [1.8, 2.2])
    d = res.to_dict()
    assert set(d) >= {"cube", "points", "total", "tail_bound", "mean_2q"}
    rows = res.csv_rows()
    assert [r["x"] for r in rows] == [1.8, 2.2]
    assert rows[0]["total"] == pytest.approx(rows[0]["near"] + rows[0]["far"])
