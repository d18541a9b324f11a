"""Acceptance criteria, each at its stated size and tolerance.

Every test prints one PASS/FAIL line; the lines are repeated in the pytest
terminal summary.
"""

import json
import math
import time

from scipy import integrate

from conftest import ACCEPTANCE_LINES
from czbmo.cli import main
from czbmo.funcspace import Constant, LogAbs, mean, oscillation, resolve_function
from czbmo.geometry import Cube, reference_cube
from czbmo.kernels import resolve_kernel
from czbmo.operator import apply_truncated, evaluation_grid
from czbmo.verify import (
    SHARPNESS_ORACLE,
    base_cube_constancy,
    lemma_bound,
    suite_dyadic_sum,
    suite_hilbert_constants,
    suite_log_mean,
    suite_logshift_norms,
    suite_sharpness,
)


def record(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number} ({title}): {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def test_criterion_1_hilbert_annihilation():
    start = time.perf_counter()
    rep = suite_hilbert_constants(n_cubes=50, points=33, tol=1e-6)
    elapsed = time.perf_counter() - start
    record(1, "H_Q 1 = 0", rep.passed and rep.global_constant <= 1e-6 and elapsed < 5,
           f"max |H_Q 1| = {rep.global_constant:.2e} over 50 cubes, {elapsed:.2f} s")


def test_criterion_2_sharpness():
    start = time.perf_counter()
    rep = suite_sharpness(c_values=(1.0, 10.0, 1e3), points=65, formula_tol=1e-4, oracle_tol=1e-3)
    elapsed = time.perf_counter() - start
    formula = max(c.value for c in rep.find("formula"))
    oracle_gap = max(abs(c.value - SHARPNESS_ORACLE) for c in rep.find("oscillation"))
    seq = rep.find("lmo_weighted_increasing")[0].measured["sequence"]
    ok = (rep.passed and formula <= 1e-4 and oracle_gap <= 1e-3 and elapsed < 10
          and all(b > a for a, b in zip(seq, seq[1:])))
    record(2, "commutator sharpness", ok,
           f"formula error {formula:.2e}, oracle gap {oracle_gap:.2e}, L*osc {[round(v, 4) for v in seq]}, "
           f"{elapsed:.2f} s")


def test_criterion_3_base_cube_constancy():
    worst = 0.0
    ok = True
    for tag in ("hilbert", "commutator:abs"):
        cases = base_cube_constancy(resolve_kernel(tag), (Constant(1.0), LogAbs()), pairs=20, tol=1e-5)
        assert len(cases) == 40
        ok &= all(c.verdict for c in cases)
        worst = max(worst, max(c.value for c in cases))
    record(3, "base-cube constancy", ok and worst <= 1e-5, f"max std of T_Q f - T_Q' f = {worst:.2e}")


def test_criterion_4_log_mean():
    rep = suite_log_mean(decades=(-3, 3), extend=1)
    band = rep.find("max_in_band")[0].value
    growth = rep.find("extension")[0].value
    ref_err = rep.find("reference_cube")[0].measured["error"]
    ok = rep.passed and 1.0 <= band <= 2.5 and growth < 0.2 and ref_err <= 1e-6
    record(4, "log mean", ok, f"max gap {band:.4f}, extension growth {growth:.3f}, Q(0,1) error {ref_err:.1e}")


def test_criterion_5_logshift_uniform():
    rep = suite_logshift_norms(s_values=(1.0, 10.0, 1e3, 1e6), factor=2.0)
    norms = {c.inputs["s"]: c.value for c in rep.find("norm")}
    ratio = max(norms.values()) / min(norms.values())
    ok = rep.passed and max(v / norms[1.0] for v in norms.values()) <= 2 and min(
        v / norms[1.0] for v in norms.values()) >= 0.5
    record(5, "logshift norms uniform in s", ok, f"norms {[round(v, 4) for v in norms.values()]}, "
                                                 f"spread {ratio:.3f}")


def test_criterion_6_dyadic_sum():
    rep = suite_dyadic_sum(delta_values=(0.5, 1.0), n_cubes=200, max_slope=0.1)
    slopes = [c.value for c in rep.find("no_trend")]
    regimes = rep.find("both_regimes")
    ok = rep.passed and all(s < 0.1 for s in slopes) and all(c.verdict for c in regimes)
    record(6, "dyadic sum", ok, f"max L*sum {rep.global_constant:.4f}, decade slopes "
                                f"{[round(s, 4) for s in slopes]}")


def test_criterion_7_lemma_bound():
    ratio, ext = lemma_bound(resolve_kernel("hilbert"), LogAbs(), decades=(-2, 2), extend=1)
    growth = ext.value
    record(7, "fluctuation bound", ext.verdict and growth < 0.2,
           f"max ratio {ratio.value:.4f}, growth under extension {growth:.3f}")


def test_criterion_8_tl_chain_desk_run(tmp_path):
    start = time.perf_counter()
    code = main(["verify", "--suite", "all", "--preset", "desk", "--out", str(tmp_path)])
    elapsed = time.perf_counter() - start
    summary = json.loads((tmp_path / "summary.json").read_text())
    chain = json.loads((tmp_path / "tl_chain.json").read_text())
    trends = {}
    for case in chain["cases"]:
        if case["label"] in ("t1_lmo", "t1_bmo"):
            trends[(case["inputs"]["kernel"], case["label"])] = case["measured"]
    hilbert = trends[("hilbert", "t1_lmo")]
    ok = (code == 0 and summary["pass"] and len(summary["suites"]) == 8 and elapsed < 60
          and hilbert["trend"] == "zero" and hilbert["value"] <= 1e-4 * hilbert["max_L"]
          and trends[("commutator:abs", "t1_lmo")]["trend"] == "unbounded"
          and trends[("commutator:abs", "t1_bmo")]["trend"] in ("zero", "bounded")
          and trends[("commutator:plateau", "t1_lmo")]["trend"] == "bounded")
    detail = ", ".join(f"{k} {lab[3:]} {m['trend']}" for (k, lab), m in sorted(trends.items()))
    record(8, "T(L) chain", ok, f"{detail}; 8 suites in {elapsed:.1f} s")


def _quad_mean(fn, q: Cube, breaks=()) -> float:
    lo, hi = q.lower[0], q.upper[0]
    val, _ = integrate.quad(fn, lo, hi, points=[b for b in breaks if lo < b < hi] or None,
                            epsabs=1e-13, epsrel=1e-13, limit=200)
    return val / q.side


def test_criterion_9_numerical_hygiene():
    f = resolve_function("atan-profile")
    q = Cube.interval(0.3, 2.0)
    osc_oracle = _quad_mean(lambda t: abs(math.atan(t) - math.atan(0.3)), q, [0.3])
    mean_oracle = _quad_mean(math.atan, q)
    grids = (33, 65, 129, 257)
    osc_err = [abs(oscillation(f, q, n).value - osc_oracle) for n in grids]
    mean_err = [abs(mean(f, q, n) - mean_oracle) for n in grids]
    ratio = max(b / a for errs in (osc_err, mean_err) for a, b in zip(errs, errs[1:]))
    pv = max(apply_truncated(resolve_kernel("hilbert"), f, c, evaluation_grid(c, 17)[0]).pv_change
             for c in (reference_cube(), Cube.interval(5.0, 2.0), Cube.interval(-40.0, 0.1)))
    record(9, "numerical hygiene", ratio <= 0.6 and pv <= 1e-6,
           f"worst refinement ratio {ratio:.3f}, PV level change {pv:.1e}")
