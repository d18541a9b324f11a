"""Test functions, cube averages, median oscillation and BMO/LMO estimates."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConfigError, NumericalError, SingularPointError
from .geometry import Cube, log_distance, reference_cube
from .quadrature import cube_rule, masked_sum, weighted_median

DEFAULT_RESOLUTION = 257
REFINED_RESOLUTION = 513

# kinds of special points
SINGULAR = "singular"  # unbounded, integrable
JUMP = "jump"
KINK = "kink"


class TestFunction:
    """Base class. Subclasses implement ``_eval`` on arrays of scalar points
    (one-dimensional use) and optionally ``_eval_nd`` on ``(N, d)`` points.

    ``special`` lists ``(point, kind)`` pairs; quadrature splits at every
    special point and grades toward singular ones.
    """

    __test__ = False  # keep pytest from collecting the class
    tag = "function"
    dim: int | None = None
    special: tuple[tuple[tuple[float, ...], str], ...] = ()

    def _eval(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _eval_nd(self, x: np.ndarray) -> np.ndarray:
        if x.shape[-1] != 1:
            raise ValueError(f"{self.tag} is one-dimensional")
        return self._eval(x[..., 0])

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        bad = [p[0] for p, kind in self.special if kind == SINGULAR and len(p) == 1]
        if bad and np.any(np.isin(x, bad)):
            raise SingularPointError(f"{self.tag} evaluated at a singular point")
        return self._eval(x)

    def at_points(self, x: np.ndarray) -> np.ndarray:
        """Evaluate at ``(N, d)`` points, flagging exact singular points."""
        x = np.asarray(x, dtype=float)
        for p, kind in self.special:
            if kind == SINGULAR and np.any(np.all(x == np.asarray(p), axis=-1)):
                raise SingularPointError(f"{self.tag} evaluated at a singular point {p}")
        return self._eval_nd(x)

    # one-dimensional views of the special points
    @property
    def knots(self) -> list[float]:
        return [p[0] for p, _ in self.special if len(p) == 1]

    @property
    def singular_flags(self) -> list[bool]:
        return [kind == SINGULAR for p, kind in self.special if len(p) == 1]

    @property
    def guard_points(self) -> list[float]:
        """Points whose neighbourhood is excluded from operator evaluation."""
        return [p[0] for p, kind in self.special if len(p) == 1 and kind in (SINGULAR, JUMP)]

    def special_for_dim(self, d: int) -> tuple[list[tuple[float, ...]], list[bool]]:
        pts, flags = [], []
        for p, kind in self.special:
            if len(p) == d:
                pts.append(p)
                flags.append(kind == SINGULAR)
        return pts, flags

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.tag}>"


@dataclass(frozen=True, repr=False)
class Constant(TestFunction):
    value: float = 1.0

    @property
    def tag(self) -> str:
        return f"const:{self.value:g}"

    def _eval(self, x):
        return np.full(np.shape(x), float(self.value))

    def _eval_nd(self, x):
        return np.full(x.shape[:-1], float(self.value))


@dataclass(frozen=True, repr=False)
class LogAbs(TestFunction):
    """x -> log|x| in R^d (singular at the origin)."""

    dim_hint: int = 1
    tag = "logabs"

    @property
    def special(self):
        return (((0.0,) * self.dim_hint, SINGULAR),)

    def _eval(self, x):
        with np.errstate(divide="ignore"):
            return np.log(np.abs(x))

    def _eval_nd(self, x):
        with np.errstate(divide="ignore"):
            return np.log(np.linalg.norm(x, axis=-1))


@dataclass(frozen=True, repr=False)
class LogShiftDiff(TestFunction):
    """x -> log|x - s| - log|x + s|."""

    s: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        object.__setattr__(self, "s", tuple(float(v) for v in np.atleast_1d(self.s)))
        if not any(self.s):
            raise ValueError("shift s must be nonzero")

    @property
    def tag(self) -> str:
        return "logshiftdiff:" + ",".join(f"{v:g}" for v in self.s)

    @property
    def special(self):
        neg = tuple(-v for v in self.s)
        return ((self.s, SINGULAR), (neg, SINGULAR))

    def _eval(self, x):
        s = self.s[0]
        with np.errstate(divide="ignore"):
            return np.log(np.abs(x - s)) - np.log(np.abs(x + s))

    def _eval_nd(self, x):
        s = np.asarray(self.s)
        with np.errstate(divide="ignore"):
            return np.log(np.linalg.norm(x - s, axis=-1)) - np.log(np.linalg.norm(x + s, axis=-1))


@dataclass(frozen=True, repr=False)
class LipschitzProfile(TestFunction):
    """A Lipschitz profile A with derivative A'. Evaluates to A.

    ``diff`` may be supplied for a cancellation-free A(x) - A(y).
    """

    name: str = "abs"
    A: Callable[[np.ndarray], np.ndarray] = field(default=np.abs, compare=False)
    Aprime: Callable[[np.ndarray], np.ndarray] = field(default=np.sign, compare=False)
    lipschitz: float = 1.0
    kinks: tuple[float, ...] = ()
    derivative_jumps: tuple[float, ...] = ()
    diff_fn: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    @property
    def tag(self) -> str:
        return f"{self.name}-profile"

    @property
    def special(self):
        return tuple(((p,), KINK) for p in sorted(set(self.kinks) | set(self.derivative_jumps)))

    def _eval(self, x):
        return self.A(x)

    def diff(self, x, y):
        if self.diff_fn is not None:
            return self.diff_fn(x, y)
        return self.A(x) - self.A(y)

    def derivative(self) -> "ProfileDerivative":
        return ProfileDerivative(self)

    def check_lipschitz(self, xs: np.ndarray, ys: np.ndarray) -> float:
        """Largest |A(x)-A(y)| / |x-y| on the given pairs (must not exceed ``lipschitz``)."""
        xs, ys = np.asarray(xs, float), np.asarray(ys, float)
        keep = xs != ys
        return float(np.max(np.abs(self.diff(xs[keep], ys[keep])) / np.abs(xs[keep] - ys[keep])))


@dataclass(frozen=True, repr=False)
class ProfileDerivative(TestFunction):
    """A' of a Lipschitz profile, as a test function."""

    profile: LipschitzProfile = None

    @property
    def tag(self) -> str:
        return f"{self.profile.name}-profile-deriv"

    @property
    def special(self):
        out = [((p,), JUMP) for p in self.profile.derivative_jumps]
        out += [((p,), KINK) for p in self.profile.kinks if p not in self.profile.derivative_jumps]
        return tuple(sorted(out))

    def _eval(self, x):
        return self.profile.Aprime(x)


@dataclass(frozen=True, repr=False)
class Tabulated(TestFunction):
    """Piecewise-linear interpolant of samples, held constant beyond the grid."""

    grid: tuple[float, ...] = ()
    values: tuple[float, ...] = ()
    source: str = "inline"

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.ndim != 1 or g.size < 2 or g.size != v.size:
            raise ConfigError("tabulated function needs at least two (x, value) rows")
        if np.any(np.diff(g) <= 0):
            raise ConfigError("tabulated grid must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ConfigError("tabulated values must be finite")
        object.__setattr__(self, "grid", tuple(g))
        object.__setattr__(self, "values", tuple(v))

    @property
    def tag(self) -> str:
        return f"table:{self.source}"

    @property
    def special(self):
        return tuple(((p,), KINK) for p in self.grid)

    def _eval(self, x):
        return np.interp(x, self.grid, self.values)


def read_table(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"table file not found: {path}")
    rows = []
    with path.open(newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                if rows:
                    raise ConfigError(f"malformed row in {path}: {row}") from None
                # header line
    if not rows:
        raise ConfigError(f"no data rows in {path}")
    arr = np.array(sorted(rows))
    return arr[:, 0], arr[:, 1]


def load_table(path: str | Path) -> Tabulated:
    x, v = read_table(path)
    return Tabulated(tuple(x), tuple(v), source=str(path))


# -- Lipschitz profile catalog ------------------------------------------------

def _abs_diff(x, y):
    # |x| - |y| is a single rounded subtraction, like x - y
    return np.abs(np.asarray(x, float)) - np.abs(np.asarray(y, float))


def abs_profile() -> LipschitzProfile:
    return LipschitzProfile("abs", np.abs, np.sign, 1.0, derivative_jumps=(0.0,), diff_fn=_abs_diff)


def linear_profile() -> LipschitzProfile:
    return LipschitzProfile("linear", lambda x: np.asarray(x, float), lambda x: np.ones(np.shape(x)),
                            1.0, diff_fn=lambda x, y: np.asarray(x, float) - np.asarray(y, float))


def _plateau_A(x):
    a = np.abs(np.asarray(x, float))
    out = np.where(a <= 1, a, np.where(a <= 2, 2 * a - a * a / 2 - 0.5, 1.5))
    return np.sign(x) * out


def _plateau_Aprime(x):
    return np.clip(2 - np.abs(np.asarray(x, float)), 0.0, 1.0)


def plateau_profile() -> LipschitzProfile:
    """A' = 1 on [-1, 1], linear down to 0 at |x| = 2, zero beyond.

    A' is Lipschitz with compact support, so its mean oscillation on Q is
    at most min(l/4, 6/l) and L(Q) times it stays bounded: an LMO fixture.
    """
    return LipschitzProfile("plateau", _plateau_A, _plateau_Aprime, 1.0, kinks=(-2.0, -1.0, 1.0, 2.0))


def atan_profile() -> LipschitzProfile:
    return LipschitzProfile("atan", np.arctan, lambda x: 1.0 / (1.0 + np.asarray(x, float) ** 2), 1.0)


def spline_profile(grid: Sequence[float], values: Sequence[float], name: str = "table") -> LipschitzProfile:
    """Cubic-spline profile through samples of A, extended linearly past the grid."""
    g = np.asarray(grid, float)
    v = np.asarray(values, float)
    if g.size < 4 or np.any(np.diff(g) <= 0) or not np.all(np.isfinite(v)):
        raise ConfigError("profile table needs >= 4 increasing finite samples")
    spl = CubicSpline(g, v, bc_type="natural")
    dspl = spl.derivative()
    lo, hi = g[0], g[-1]
    s_lo, s_hi = float(dspl(lo)), float(dspl(hi))

    def A(x):
        x = np.asarray(x, float)
        inner = spl(np.clip(x, lo, hi))
        return np.where(x < lo, v[0] + s_lo * (x - lo), np.where(x > hi, v[-1] + s_hi * (x - hi), inner))

    def Ap(x):
        x = np.asarray(x, float)
        return np.where(x < lo, s_lo, np.where(x > hi, s_hi, dspl(np.clip(x, lo, hi))))

    fine = np.linspace(lo, hi, 20 * g.size)
    lip = float(max(np.max(np.abs(dspl(fine))), abs(s_lo), abs(s_hi)))
    return LipschitzProfile(name, A, Ap, lip, kinks=(float(lo), float(hi)))


PROFILES: dict[str, Callable[[], LipschitzProfile]] = {
    "abs": abs_profile,
    "linear": linear_profile,
    "plateau": plateau_profile,
    "atan": atan_profile,
}


def resolve_profile(tag: str) -> LipschitzProfile:
    if tag.startswith("table:"):
        x, v = read_table(tag[len("table:"):])
        return spline_profile(x, v, name=f"table:{tag[len('table:'):]}")
    try:
        return PROFILES[tag]()
    except KeyError:
        raise ConfigError(f"unknown profile {tag!r}; known: {sorted(PROFILES)} or table:<path>") from None


def resolve_function(tag: str) -> TestFunction:
    """Parse a function tag: const[:v], logabs, logshiftdiff:s[,s2..],
    <profile>-profile, <profile>-profile-deriv, table:<path>."""
    head, _, arg = tag.partition(":")
    try:
        if head == "const":
            return Constant(float(arg) if arg else 1.0)
        if head == "logabs":
            return LogAbs(int(arg) if arg else 1)
        if head == "logshiftdiff":
            return LogShiftDiff(tuple(float(v) for v in (arg or "1").split(",")))
    except ValueError as exc:
        raise ConfigError(f"bad function tag {tag!r}: {exc}") from None
    if head == "table":
        return load_table(arg)
    if head.endswith("-profile-deriv"):
        return resolve_profile(head[: -len("-profile-deriv")]).derivative()
    if head.endswith("-profile"):
        return resolve_profile(head[: -len("-profile")])
    raise ConfigError(f"unknown function tag {tag!r}")


# -- averages and oscillation -------------------------------------------------

def _samples(f: TestFunction, cube: Cube, resolution: int) -> tuple[np.ndarray, np.ndarray]:
    pts, flags = f.special_for_dim(cube.dim)
    nodes, weights = cube_rule(cube, resolution, pts, flags)
    values = f.at_points(nodes)
    if not np.all(np.isfinite(values[weights > 0])):
        raise NumericalError(f"{f.tag} is not finite on the quadrature nodes of {cube}")
    return values, weights


def mean(f: TestFunction, cube: Cube, resolution: int = DEFAULT_RESOLUTION) -> float:
    """Average of f over the cube."""
    values, weights = _samples(f, cube, resolution)
    return float(masked_sum(values, weights) / np.sum(weights))


@dataclass(frozen=True)
class OscillationReport:
    cube: Cube
    best_constant: float
    value: float
    grid_points: int

    def to_dict(self) -> dict:
        return {"cube": self.cube.to_dict(), "best_constant": self.best_constant,
                "value": self.value, "grid_points": self.grid_points}


def oscillation_of_samples(values: np.ndarray, weights: np.ndarray) -> tuple[float, float]:
    """(weighted median, weighted mean absolute deviation from it)."""
    b = weighted_median(values, weights)
    return b, float(np.sum(weights * np.abs(values - b)) / np.sum(weights))


def oscillation(f: TestFunction, cube: Cube, resolution: int = DEFAULT_RESOLUTION) -> OscillationReport:
    """inf_b |Q|^-1 int_Q |f - b|, attained at a median of f on Q."""
    values, weights = _samples(f, cube, resolution)
    b, value = oscillation_of_samples(values, weights)
    return OscillationReport(cube, b, value, values.size)


@dataclass
class SeminormEstimate:
    """Family supremum. A lower bound for the true seminorm by construction."""

    value: float
    family_size: int
    argmax_cube: Cube
    convergence_trace: list[tuple[int, float]]
    per_cube: list[float] = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "family_size": self.family_size,
            "argmax_cube": self.argmax_cube.to_dict(),
            "convergence_trace": [list(t) for t in self.convergence_trace],
            "per_cube": self.per_cube,
            **({"extras": self.extras} if self.extras else {}),
        }


def _family_sup(f: TestFunction, family: Sequence[Cube], resolution: int, refined: int,
                weight: Callable[[Cube], float]) -> SeminormEstimate:
    if not family:
        raise ValueError("cube family is empty")
    vals = [weight(q) * oscillation(f, q, resolution).value for q in family]
    k = int(np.argmax(vals))
    trace = [(resolution, vals[k])]
    if refined and refined != resolution:
        trace.append((refined, weight(family[k]) * oscillation(f, family[k], refined).value))
    return SeminormEstimate(vals[k], len(family), family[k], trace, vals)


def bmo_seminorm(f: TestFunction, family: Sequence[Cube], resolution: int = DEFAULT_RESOLUTION,
                 refined: int = REFINED_RESOLUTION) -> SeminormEstimate:
    return _family_sup(f, family, resolution, refined, lambda q: 1.0)


def bmo_norm(f: TestFunction, family: Sequence[Cube], resolution: int = DEFAULT_RESOLUTION) -> float:
    """Seminorm over the family plus |f_{Q0}|."""
    dim = family[0].dim if family else 1
    semi = bmo_seminorm(f, family, resolution, refined=0).value
    return semi + abs(mean(f, reference_cube(dim), resolution))


def lmo_seminorm(f: TestFunction, family: Sequence[Cube], resolution: int = DEFAULT_RESOLUTION,
                 refined: int = REFINED_RESOLUTION) -> SeminormEstimate:
    """sup over the family of L(Q) times the oscillation on Q."""
    return _family_sup(f, family, resolution, refined, log_distance)


def log_mean_closed_form(cube: Cube) -> float:
    """Exact average of log|x| over a one-dimensional cube (independent oracle)."""

    def prim(t: float) -> float:  # antiderivative of log|t|
        return 0.0 if t == 0 else t * math.log(abs(t)) - t

    a, b = cube.lower[0], cube.upper[0]
    return (prim(b) - prim(a)) / (b - a)
