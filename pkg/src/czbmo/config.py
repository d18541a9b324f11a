"""Run configuration: presets, TOML/JSON files and command-line overrides.

Precedence, lowest first: built-in defaults, ``--preset``, ``--config`` file,
explicit flags.
"""

from __future__ import annotations

import copy
import inspect
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import tomli

from .errors import ConfigError
from .geometry import Cube, cube_family
from .operator import QuadratureConfig
from .verify import SUITES

ALL_SUITES = tuple(SUITES)

# acceptance-criteria family sizes
DESK: dict[str, Any] = {
    "suite": {
        "log_mean": {"decades": [-3, 3], "extend": 1, "resolution": 257},
        "logshift_norms": {"s_values": [1.0, 10.0, 1e3, 1e6], "factor": 2.0},
        "mean_growth": {"decades": [-3, 3], "extend": 1},
        "hilbert_constants": {"n_cubes": 50, "points": 33, "tol": 1e-6},
        "commutator_identity": {"points": 33},
        "dyadic_sum": {"delta_values": [0.5, 1.0], "n_cubes": 200, "max_slope": 0.1},
        "sharpness": {"c_values": [1.0, 10.0, 100.0, 1e3, 1e4], "points": 65},
        "tl_chain": {"levels": 4, "points": 33, "constancy_pairs": 5},
    },
}

# small sizes for quick end-to-end runs
SMOKE: dict[str, Any] = {
    "suite": {
        "log_mean": {"decades": [-1, 1], "resolution": 129},
        "logshift_norms": {"s_values": [1.0, 10.0], "rel_decades": [-1, 1], "resolution": 129},
        "mean_growth": {"functions": ["const:1", "logabs"], "decades": [-1, 1], "resolution": 65},
        "hilbert_constants": {"n_cubes": 5, "points": 9},
        "commutator_identity": {"profiles": ["abs", "linear"], "points": 9},
        "dyadic_sum": {"n_cubes": 20},
        "sharpness": {"c_values": [1.0, 10.0], "points": 33},
        "tl_chain": {"kernels": ["hilbert"], "levels": 2, "points": 17, "ratio_decades": [0, 1],
                     "s_values": [1.0, 10.0], "lemma_decades": [-1, 1], "constancy_pairs": 2},
    },
}

PRESETS: dict[str, dict[str, Any]] = {"desk": DESK, "smoke": SMOKE}

_TOP_KEYS = {"kernel", "function", "cube", "family", "points", "resolution", "delta", "quadrature",
             "suites", "suite", "out", "seed", "jobs"}


@dataclass
class RunConfig:
    kernel: str = "hilbert"
    function: str = "const:1"
    cube: Cube | None = None
    family: dict[str, Any] | None = None
    points: list[float] | int | None = None
    resolution: int | None = None
    delta: float | None = None
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    suites: list[str] = field(default_factory=lambda: ["all"])
    suite_settings: dict[str, dict[str, Any]] = field(default_factory=dict)
    out: Path = Path("reports")
    seed: int = 0
    jobs: int = 1

    def selected_suites(self) -> list[str]:
        names: list[str] = []
        for s in self.suites:
            for name in (ALL_SUITES if s == "all" else (s,)):
                if name not in SUITES:
                    raise ConfigError(f"unknown suite {name!r}; known: {', '.join(ALL_SUITES)}")
                if name not in names:
                    names.append(name)
        return names

    def cubes(self) -> list[Cube]:
        if self.family is not None:
            try:
                return cube_family(self.family)
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"bad family descriptor: {exc}") from None
        if self.cube is not None:
            return [self.cube]
        raise ConfigError("no cube or family given")

    def to_dict(self) -> dict[str, Any]:
        return {
            "kernel": self.kernel,
            "function": self.function,
            "cube": self.cube.to_dict() if self.cube else None,
            "family": self.family,
            "points": self.points,
            "resolution": self.resolution,
            "delta": self.delta,
            "quadrature": self.quadrature.to_dict(),
            "suites": list(self.suites),
            "suite": self.suite_settings,
            "seed": self.seed,
        }


def parse_cube(text: str) -> Cube:
    """'c,l' (one dimension) or 'c1,..,cd,l'."""
    try:
        parts = [float(p) for p in text.split(",")]
    except ValueError:
        raise ConfigError(f"bad cube {text!r}; expected c,side") from None
    if len(parts) < 2:
        raise ConfigError(f"bad cube {text!r}; expected c,side")
    try:
        return Cube(tuple(parts[:-1]), parts[-1])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def parse_points(text: str) -> list[float] | int:
    """Comma list of evaluation points, or 'n=<count>' for a midpoint grid."""
    try:
        if text.startswith("n="):
            return int(text[2:])
        return [float(p) for p in text.split(",")]
    except ValueError:
        raise ConfigError(f"bad points {text!r}") from None


def read_config_file(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        if path.suffix == ".json":
            return json.loads(path.read_text())
        with path.open("rb") as fh:
            return tomli.load(fh)
    except (json.JSONDecodeError, tomli.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None


def read_family_file(path: str | Path) -> dict[str, Any]:
    data = read_config_file(path)
    return data.get("family", data)


def _merge(base: dict[str, Any], extra: dict[str, Any]) -> dict[str, Any]:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _check_suite_settings(settings: dict[str, Any]) -> None:
    for name, kwargs in settings.items():
        if name not in SUITES:
            raise ConfigError(f"settings given for unknown suite {name!r}")
        if not isinstance(kwargs, dict):
            raise ConfigError(f"settings for suite {name!r} must be a table")
        params = inspect.signature(SUITES[name]).parameters
        unknown = set(kwargs) - set(params) | ({"seed", "cfg"} & set(kwargs))
        if unknown:
            raise ConfigError(f"unknown settings for suite {name!r}: {sorted(unknown)}")


def build_config(preset: str | None = None, path: str | Path | None = None,
                 overrides: dict[str, Any] | None = None) -> RunConfig:
    """Layer preset, file and overrides (None values are ignored)."""
    data: dict[str, Any] = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; known: {', '.join(PRESETS)}")
        data = _merge(data, PRESETS[preset])
    if path is not None:
        data = _merge(data, read_config_file(path))
    data = _merge(data, {k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    cfg = RunConfig()
    for key in ("kernel", "function", "delta", "seed", "resolution", "jobs"):
        if key in data:
            setattr(cfg, key, data[key])
    if "cube" in data:
        cube = data["cube"]
        cfg.cube = cube if isinstance(cube, Cube) else (parse_cube(cube) if isinstance(cube, str)
                                                       else _cube_from_dict(cube))
    if "family" in data:
        cfg.family = data["family"]
    if "points" in data:
        pts = data["points"]
        cfg.points = parse_points(pts) if isinstance(pts, str) else pts
    if "quadrature" in data:
        q = data["quadrature"]
        cfg.quadrature = q if isinstance(q, QuadratureConfig) else QuadratureConfig.from_dict(q)
    if "suites" in data:
        suites = data["suites"]
        cfg.suites = [suites] if isinstance(suites, str) else list(suites)
    if "suite" in data:
        _check_suite_settings(data["suite"])
        cfg.suite_settings = data["suite"]
    if "out" in data:
        cfg.out = Path(data["out"])
    if not isinstance(cfg.seed, int) or isinstance(cfg.seed, bool):
        raise ConfigError(f"seed must be an integer, got {cfg.seed!r}")
    if int(cfg.jobs) < 1:
        raise ConfigError("jobs must be at least 1")
    if cfg.delta is not None and not 0 < float(cfg.delta) <= 1:
        raise ConfigError(f"delta must lie in (0, 1], got {cfg.delta}")
    return cfg


def _cube_from_dict(data: dict[str, Any]) -> Cube:
    try:
        return Cube.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad cube record {data!r}: {exc}") from None
