"""Calderon-Zygmund kernel catalog and sampled checks of the size and
regularity conditions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, SingularPointError
from .funcspace import LipschitzProfile, resolve_profile


@dataclass(frozen=True)
class KernelSpec:
    """Off-diagonal kernel K(x, y) on the line (``dimension`` is kept for the
    checks, which are dimension-generic).

    ``regularity_constant`` is the constant used for far-field tail bounds;
    ``knots`` are points in y where K(x, .) is not smooth; ``guard_points``
    are points whose neighbourhood is excluded from operator evaluation.
    """

    name: str
    evaluator: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(compare=False)
    dimension: int = 1
    delta: float = 1.0
    size_constant: float = 1.0
    regularity_constant: float = 2.0
    knots: tuple[float, ...] = ()
    guard_points: tuple[float, ...] = ()
    profile: LipschitzProfile | None = field(default=None, compare=False)

    def __post_init__(self):
        if not 0 < self.delta <= 1:
            raise ValueError(f"regularity exponent must lie in (0, 1], got {self.delta}")
        if self.size_constant <= 0 or self.regularity_constant < 0:
            raise ValueError("kernel constants must be positive")

    def __call__(self, x, y) -> np.ndarray:
        return self.evaluator(np.asarray(x, float), np.asarray(y, float))


def kernel_eval(kernel: KernelSpec, x, y) -> np.ndarray:
    """K(x, y); diagonal points are rejected."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if np.any(np.broadcast_to(x == y, np.broadcast(x, y).shape)):
        raise SingularPointError("kernel evaluated on the diagonal x = y")
    out = kernel(x, y)
    return out if out.ndim else float(out)


def hilbert() -> KernelSpec:
    with_div = lambda x, y: 1.0 / (x - y)  # noqa: E731
    return KernelSpec("hilbert", with_div, 1, 1.0, 1.0, 2.0)


def commutator(profile: LipschitzProfile) -> KernelSpec:
    """K_A(x, y) = (A(x) - A(y)) / (x - y)^2 for a Lipschitz profile A.

    Size constant is the Lipschitz constant; with delta = 1 the regularity
    constant is bounded by 6 * Lipschitz (split K_A(x1,y) - K_A(x2,y) into the
    A(x1) - A(x2) term and the change of 1/(x-y)^2).
    """

    def ev(x, y):
        return profile.diff(x, y) / (x - y) ** 2

    lip = profile.lipschitz
    return KernelSpec(
        f"commutator:{profile.name}",
        ev,
        1,
        1.0,
        lip,
        6.0 * lip,
        knots=tuple(sorted(set(profile.kinks) | set(profile.derivative_jumps))),
        guard_points=tuple(profile.derivative_jumps),
        profile=profile,
    )


def _inverse_square() -> KernelSpec:
    # not a CZ kernel in d = 1: fixture for failing checks
    return KernelSpec("custom:inverse-square", lambda x, y: 1.0 / (x - y) ** 2, 1, 1.0, 1.0, 2.0)


def _zero() -> KernelSpec:
    return KernelSpec("custom:zero", lambda x, y: np.zeros(np.broadcast(x, y).shape), 1, 1.0, 1.0, 0.0)


CUSTOM: dict[str, Callable[[], KernelSpec]] = {
    "inverse-square": _inverse_square,
    "zero": _zero,
}


def register_custom(name: str, factory: Callable[[], KernelSpec]) -> None:
    CUSTOM[name] = factory


def resolve_kernel(tag: str) -> KernelSpec:
    """Parse hilbert | commutator:<profile> | commutator:table:<path> | custom:<name>."""
    head, _, arg = tag.partition(":")
    if head == "hilbert" and not arg:
        return hilbert()
    if head == "commutator" and arg:
        return commutator(resolve_profile(arg))
    if head == "custom" and arg in CUSTOM:
        return CUSTOM[arg]()
    raise ConfigError(f"unknown kernel tag {tag!r}")


# -- sampled condition checks -------------------------------------------------

@dataclass
class ConditionReport:
    condition: str
    kernel: str
    measured: float
    per_decade: dict[int, float]
    growth: float
    passed: bool
    design: dict

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "kernel": self.kernel,
            "measured": self.measured,
            "per_decade": {str(k): v for k, v in self.per_decade.items()},
            "growth": self.growth,
            "passed": self.passed,
            "design": self.design,
        }


def sample_pairs(decades: tuple[int, int] = (-3, 3), per_decade: int = 200, spread: float = 10.0,
                 seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Off-diagonal pairs whose separations cover ``decades`` uniformly in log."""
    rng = np.random.default_rng(seed)
    lo, hi = decades
    n = per_decade * (hi - lo)
    h = 10.0 ** rng.uniform(lo, hi, n)
    x = rng.uniform(-spread, spread, n)
    y = x + h * rng.choice([-1.0, 1.0], n)
    return x, y


def sample_triples(decades: tuple[int, int] = (-3, 3), per_decade: int = 200, spread: float = 10.0,
                   seed: int = 0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Triples (x1, x2, y) with 2|x1 - x2| <= |x1 - y|."""
    rng = np.random.default_rng(seed)
    lo, hi = decades
    n = per_decade * (hi - lo)
    dist = 10.0 ** rng.uniform(lo, hi, n)
    y = rng.uniform(-spread, spread, n)
    x1 = y + dist * rng.choice([-1.0, 1.0], n)
    x2 = x1 + 0.5 * dist * rng.uniform(1e-3, 1.0, n) * rng.choice([-1.0, 1.0], n)
    return x1, x2, y


def _decade_sups(sep: np.ndarray, vals: np.ndarray) -> dict[int, float]:
    bins = np.floor(np.log10(sep)).astype(int)
    return {int(b): float(np.max(vals[bins == b])) for b in np.unique(bins)}


def _verdict(per: dict[int, float], growth_cap: float) -> tuple[float, bool]:
    sups = np.array(list(per.values()))
    if not np.all(np.isfinite(sups)):
        return float("inf"), False
    top = float(np.max(sups))
    if top == 0:
        return 1.0, True
    growth = top / max(float(np.min(sups)), 1e-300)
    return growth, growth <= growth_cap


def check_size(kernel: KernelSpec, x: np.ndarray, y: np.ndarray, growth_cap: float = 10.0) -> ConditionReport:
    """sup |K(x,y)| |x-y|^d over the pairs, binned by decade of |x - y|.

    Passes when every decade sup is finite and the largest is within
    ``growth_cap`` of the smallest.
    """
    x, y = np.asarray(x, float), np.asarray(y, float)
    sep = np.abs(x - y)
    if np.any(sep == 0):
        raise SingularPointError("size check received diagonal pairs")
    vals = np.abs(kernel(x, y)) * sep ** kernel.dimension
    per = _decade_sups(sep, vals)
    growth, ok = _verdict(per, growth_cap)
    design = {"pairs": int(x.size), "decades": [min(per), max(per)]}
    return ConditionReport("size", kernel.name, float(np.max(vals)), per, growth, ok, design)


def check_regularity(kernel: KernelSpec, x1: np.ndarray, x2: np.ndarray, y: np.ndarray,
                     delta: float | None = None, growth_cap: float = 10.0) -> ConditionReport:
    """sup |K(x1,y) - K(x2,y)| |x1-y|^(d+delta) / |x1-x2|^delta.

    Every triple must satisfy 2|x1 - x2| <= |x1 - y|.
    """
    x1, x2, y = (np.asarray(a, float) for a in (x1, x2, y))
    delta = kernel.delta if delta is None else delta
    d12 = np.abs(x1 - x2)
    d1y = np.abs(x1 - y)
    if np.any(2 * d12 > d1y * (1 + 1e-12)) or np.any(d12 == 0):
        raise ValueError("regularity triples must satisfy 0 < 2|x1 - x2| <= |x1 - y|")
    vals = np.abs(kernel(x1, y) - kernel(x2, y)) * d1y ** (kernel.dimension + delta) / d12 ** delta
    per = _decade_sups(d1y, vals)
    growth, ok = _verdict(per, growth_cap)
    design = {"triples": int(x1.size), "delta": delta, "decades": [min(per), max(per)]}
    return ConditionReport("regularity", kernel.name, float(np.max(vals)), per, growth, ok, design)
