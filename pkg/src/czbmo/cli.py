"""Command-line entry point.

Subcommands: oscillation, seminorm, apply, verify, kernels-check. Each writes
a JSON report and a CSV table into ``--out``.

Exit codes: 0 success, 1 a check or suite failed, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .config import ALL_SUITES, PRESETS, RunConfig, build_config, read_family_file
from .errors import ConfigError, NumericalError
from .funcspace import DEFAULT_RESOLUTION, bmo_seminorm, lmo_seminorm, mean, oscillation, resolve_function
from .geometry import reference_cube
from .kernels import KernelSpec, check_regularity, check_size, resolve_kernel, sample_pairs, sample_triples
from .operator import apply_truncated_bmo, evaluation_grid, operator_bmo_seminorm, tilde_apply
from .verify import VerificationReport, jsonable, run_suite, write_report

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


# -- output -----------------------------------------------------------------------

def write_json(path: Path, payload: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(jsonable(payload), indent=2, sort_keys=True) + "\n")
    return path


def write_csv(path: Path, rows: Sequence[dict[str, Any]], columns: Sequence[str]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(columns))
        writer.writeheader()
        writer.writerows(jsonable(list(rows)))
    return path


def _kernel(cfg: RunConfig) -> KernelSpec:
    kernel = resolve_kernel(cfg.kernel)
    if cfg.delta is not None:
        kernel = dataclasses.replace(kernel, delta=float(cfg.delta))
    return kernel


# -- subcommands ------------------------------------------------------------------

def _resolution(cfg: RunConfig, default: int) -> int:
    return default if cfg.resolution is None else int(cfg.resolution)


def cmd_oscillation(cfg: RunConfig) -> int:
    f = resolve_function(cfg.function)
    cubes = cfg.cubes()
    n = _resolution(cfg, DEFAULT_RESOLUTION)
    reports = [oscillation(f, q, n) for q in cubes]
    payload = {"function": f.tag, "resolution": n, "cubes": [r.to_dict() for r in reports]}
    write_json(cfg.out / "oscillation.json", payload)
    rows = [{"center": r.cube.center[0], "side": r.cube.side, "best_constant": r.best_constant,
             "value": r.value} for r in reports]
    write_csv(cfg.out / "oscillation.csv", rows, ["center", "side", "best_constant", "value"])
    for r in reports:
        print(f"osc {f.tag} on {r.cube.to_dict()} = {r.value:.10g}")
    return EXIT_OK


def cmd_seminorm(cfg: RunConfig, norm: str) -> int:
    f = resolve_function(cfg.function)
    cubes = cfg.cubes()
    n = _resolution(cfg, DEFAULT_RESOLUTION)
    if norm == "operator":
        extra = {} if cfg.resolution is None else {"resolution": int(cfg.resolution)}
        est = operator_bmo_seminorm(_kernel(cfg), f, cubes, cfg.quadrature, **extra)
    elif norm == "lmo":
        est = lmo_seminorm(f, cubes, n)
    else:
        est = bmo_seminorm(f, cubes, n)
    payload = {"function": f.tag, "norm": norm, **est.to_dict()}
    if norm == "operator":
        payload["kernel"] = cfg.kernel
    if norm == "bmo":
        payload["normed_value"] = est.value + abs(mean(f, reference_cube(cubes[0].dim), n))
    write_json(cfg.out / "seminorm.json", payload)
    rows = [{"center": q.center[0], "side": q.side, "value": v} for q, v in zip(cubes, est.per_cube)]
    write_csv(cfg.out / "seminorm.csv", rows, ["center", "side", "value"])
    print(f"{norm} seminorm of {f.tag} over {len(cubes)} cubes = {est.value:.10g}")
    return EXIT_OK


def _points(cfg: RunConfig, cube) -> np.ndarray:
    if cfg.points is None:
        return evaluation_grid(cube, 17)[0]
    if isinstance(cfg.points, int):
        return evaluation_grid(cube, cfg.points)[0]
    return np.asarray(cfg.points, dtype=float)


def cmd_apply(cfg: RunConfig, tilde: bool) -> int:
    kernel = _kernel(cfg)
    f = resolve_function(cfg.function)
    if tilde:
        pts = _points(cfg, cfg.cube or reference_cube(1))
        results = [tilde_apply(kernel, f, pts, cfg.quadrature)]
    else:
        results = []
        for q in cfg.cubes():
            if q.dim != 1:
                raise ConfigError("the operator is implemented on the line only")
            results.append(apply_truncated_bmo(kernel, f, q, _points(cfg, q), cfg.quadrature))
    payload = {"kernel": kernel.name, "function": f.tag, "tilde": tilde,
               "quadrature": cfg.quadrature.to_dict(), "results": [r.to_dict() for r in results]}
    write_json(cfg.out / "apply.json", payload)
    rows = []
    for r in results:
        for row in r.csv_rows():
            rows.append({"center": r.cube.c, "side": r.cube.side, **row})
    write_csv(cfg.out / "apply.csv", rows, ["center", "side", "x", "near", "far", "total"])
    for r in results:
        print(f"T_Q f on {r.cube.to_dict()}: {r.total_values.size} points, "
              f"max |total| = {float(np.max(np.abs(r.total_values))):.6g}, tail bound {r.tail_bound:.2e}")
    return EXIT_OK


def _run_one(args: tuple[str, dict[str, Any], int, Any]) -> VerificationReport:
    name, settings, seed, quad = args
    return run_suite(name, settings, seed, quad)


def cmd_verify(cfg: RunConfig) -> int:
    names = cfg.selected_suites()
    tasks = [(n, cfg.suite_settings.get(n, {}), cfg.seed, cfg.quadrature) for n in names]
    start = time.perf_counter()
    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.jobs, len(tasks))) as pool:
            reports = list(pool.map(_run_one, tasks))
    else:
        reports = [_run_one(t) for t in tasks]
    elapsed = time.perf_counter() - start
    for report in reports:
        write_report(report, cfg.out)
        status = "PASS" if report.passed else "FAIL"
        print(f"{status} {report.suite_id}: constant {report.global_constant:.6g}, "
              f"{len(report.cases)} cases, {report.runtime_seconds:.2f} s")
        for case in report.failures():
            print(f"    failed {case.label}: measured {case.value} bound {case.bound}")
    overall = all(r.passed for r in reports)
    write_json(cfg.out / "summary.json", {"seed": cfg.seed, "pass": overall,
                                          "suites": {r.suite_id: r.passed for r in reports}})
    print(f"{'PASS' if overall else 'FAIL'} overall: {len(reports)} suites in {elapsed:.1f} s")
    return EXIT_OK if overall else EXIT_FAIL


def cmd_kernels_check(cfg: RunConfig) -> int:
    kernel = _kernel(cfg)
    x, y = sample_pairs(seed=cfg.seed)
    x1, x2, yt = sample_triples(seed=cfg.seed + 1)
    reports = [check_size(kernel, x, y), check_regularity(kernel, x1, x2, yt, delta=cfg.delta)]
    payload = {"kernel": kernel.name, "seed": cfg.seed, "checks": [r.to_dict() for r in reports]}
    write_json(cfg.out / "kernels-check.json", payload)
    rows = [{"condition": r.condition, "decade": d, "sup": v} for r in reports for d, v in r.per_decade.items()]
    write_csv(cfg.out / "kernels-check.csv", rows, ["condition", "decade", "sup"])
    ok = True
    for r in reports:
        ok &= r.passed
        print(f"{'PASS' if r.passed else 'FAIL'} {r.condition} for {kernel.name}: "
              f"sup {r.measured:.6g}, decade spread {r.growth:.3g}")
    return EXIT_OK if ok else EXIT_FAIL


# -- argument parsing ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML or JSON run config")
    common.add_argument("--preset", choices=sorted(PRESETS), help="built-in settings")
    common.add_argument("--kernel", help="hilbert | commutator:<profile> | commutator:table:<path> | custom:<name>")
    common.add_argument("--f", dest="function", help="const[:v] | logabs | logshiftdiff:s | <profile>-profile | table:<path>")
    common.add_argument("--cube", help="centre,side")
    common.add_argument("--family", help="TOML or JSON cube-family descriptor")
    common.add_argument("--delta", type=float, help="regularity exponent override")
    common.add_argument("--out", help="output directory (default: reports)")
    common.add_argument("--seed", type=int)
    common.add_argument("--resolution", type=int, help="grid points per cube")

    parser = argparse.ArgumentParser(prog="czbmo", description="BMO/LMO and Calderon-Zygmund operator toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("oscillation", parents=[common], help="oscillation of f on cubes")
    p = sub.add_parser("seminorm", parents=[common], help="BMO/LMO seminorm estimate over a family")
    p.add_argument("--norm", choices=["bmo", "lmo", "operator"], default="bmo",
                   help="'operator' estimates ||Tf||_BMO for --kernel")
    p = sub.add_parser("apply", parents=[common], help="evaluate T_Q f at points of Q")
    p.add_argument("--points", help="comma list, or n=<count> midpoints (default n=17)")
    p.add_argument("--tilde", action="store_true", help="evaluate T~ f = T_{Q0} f at arbitrary points")
    p = sub.add_parser("verify", parents=[common], help="run verification suites")
    p.add_argument("--suite", action="append",
                   help=f"suite name or 'all' (repeatable); known: {', '.join(ALL_SUITES)}")
    p.add_argument("--jobs", type=int, help="suites run in parallel processes")
    sub.add_parser("kernels-check", parents=[common], help="sampled size and regularity checks")
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    out: dict[str, Any] = {
        "kernel": args.kernel,
        "function": args.function,
        "cube": args.cube,
        "delta": args.delta,
        "out": args.out,
        "seed": args.seed,
        "resolution": args.resolution,
        "points": getattr(args, "points", None),
        "jobs": getattr(args, "jobs", None),
    }
    if args.family:
        out["family"] = read_family_file(args.family)
    suites = getattr(args, "suite", None)
    if suites:
        out["suites"] = [s for item in suites for s in item.split(",") if s]
    return out


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = build_config(args.preset, args.config, _overrides(args))
    except (ConfigError, TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    commands = {
        "oscillation": lambda: cmd_oscillation(cfg),
        "seminorm": lambda: cmd_seminorm(cfg, args.norm),
        "apply": lambda: cmd_apply(cfg, args.tilde),
        "verify": lambda: cmd_verify(cfg),
        "kernels-check": lambda: cmd_kernels_check(cfg),
    }
    try:
        return commands[args.command]()
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as exc:
        # ConfigError, bad cubes or points, unwritable output directory
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

if __name__ == "__main__":
    sys.exit(main())
