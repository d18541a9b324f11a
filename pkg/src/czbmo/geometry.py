"""Axis-parallel cubes, dilation, the enclosing cube and the log-distance L(Q)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class Cube:
    """Closed axis-parallel cube with centre ``center`` and side length ``side``."""

    center: tuple[float, ...]
    side: float

    def __post_init__(self) -> None:
        center = tuple(float(v) for v in np.atleast_1d(np.asarray(self.center, dtype=float)))
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "side", float(self.side))
        if len(center) < 1:
            raise ValueError("cube center must have at least one coordinate")
        if not all(math.isfinite(v) for v in center):
            raise ValueError(f"non-finite cube center {center}")
        if not (self.side > 0 and math.isfinite(self.side)):
            raise ValueError(f"cube side must be positive and finite, got {self.side}")

    @classmethod
    def interval(cls, c: float, side: float) -> "Cube":
        return cls((float(c),), side)

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def volume(self) -> float:
        return self.side ** self.dim

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.center) - self.side / 2

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.center) + self.side / 2

    @property
    def c(self) -> float:
        """Centre of a one-dimensional cube."""
        if self.dim != 1:
            raise ValueError("scalar centre requested for a cube with d > 1")
        return self.center[0]

    def contains(self, other: "Cube", rtol: float = 0.0) -> bool:
        slack = rtol * max(self.side, other.side)
        return bool(np.all(self.lower <= other.lower + slack) and np.all(other.upper <= self.upper + slack))

    def contains_points(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.dim == 1 and x.ndim <= 1:
            return (x >= self.lower[0]) & (x <= self.upper[0])
        return np.all((x >= self.lower) & (x <= self.upper), axis=-1)

    def to_dict(self) -> dict[str, Any]:
        return {"center": list(self.center), "side": self.side}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Cube":
        try:
            return cls(tuple(np.atleast_1d(data["center"])), data["side"])
        except KeyError as exc:
            raise ValueError(f"cube record missing field {exc}") from None


def reference_cube(dim: int = 1) -> Cube:
    """Q0: centre at the origin, unit side."""
    return Cube((0.0,) * dim, 1.0)


def dilate(cube: Cube, alpha: float) -> Cube:
    if not alpha > 0:
        raise ValueError(f"dilation factor must be positive, got {alpha}")
    return Cube(cube.center, alpha * cube.side)


@dataclass(frozen=True)
class EnclosingResult:
    cube: Cube
    tilde_side: float


def enclosing_with_reference(cube: Cube) -> EnclosingResult:
    """Smallest cube containing ``cube`` and Q0.

    The side is the largest axis-wise extent of the interval hulls; the centre
    is the midpoint of the hulls (any admissible centre gives the same side).
    """
    q0 = reference_cube(cube.dim)
    lo = np.minimum(cube.lower, q0.lower)
    hi = np.maximum(cube.upper, q0.upper)
    side = float(np.max(hi - lo))
    return EnclosingResult(Cube(tuple((lo + hi) / 2), side), side)


def log_distance(cube: Cube) -> float:
    """L(Q) = log max(l~/l, l~) + 1 with the natural logarithm."""
    tilde = enclosing_with_reference(cube).tilde_side
    return math.log(max(tilde / cube.side, tilde)) + 1.0


def log_distance_many(cubes: Iterable[Cube]) -> np.ndarray:
    return np.array([log_distance(q) for q in cubes])


def _expand_axis(spec: Any, name: str) -> list[float]:
    if isinstance(spec, dict):
        if "decades" in spec:
            lo, hi = spec["decades"]
            per = int(spec.get("per_decade", 1))
            if hi < lo or per < 1:
                raise ValueError(f"empty range for {name}: {spec}")
            count = int(round((hi - lo) * per)) + 1
            values = list(10.0 ** np.linspace(lo, hi, count))
            if spec.get("include_zero"):
                values = [0.0] + values
            return values
        if "values" in spec:
            spec = spec["values"]
        else:
            raise ValueError(f"unrecognised {name} spec {spec}")
    values = [float(v) for v in spec]
    if not values:
        raise ValueError(f"empty range for {name}")
    return values


@dataclass(frozen=True)
class FamilySpec:
    """Cartesian family: every side x every centre distance x every direction.

    Centres are ``distance * direction`` with directions normalised to unit
    length. Distances may include 0, sides must be positive.
    """

    sides: tuple[float, ...]
    distances: tuple[float, ...] = (0.0,)
    directions: tuple[tuple[float, ...], ...] = ((1.0,),)

    def __post_init__(self) -> None:
        if not self.sides or not self.distances or not self.directions:
            raise ValueError("family ranges must be nonempty")
        if any(s <= 0 for s in self.sides):
            raise ValueError("family sides must be positive")
        if any(d < 0 for d in self.distances):
            raise ValueError("centre distances must be nonnegative")
        dims = {len(v) for v in self.directions}
        if len(dims) != 1:
            raise ValueError("directions must share one dimension")

    @property
    def dim(self) -> int:
        return len(self.directions[0])

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "FamilySpec":
        dirs = data.get("directions", [[1.0]])
        return cls(
            tuple(_expand_axis(data["sides"], "sides")),
            tuple(_expand_axis(data.get("distances", [0.0]), "distances")),
            tuple(tuple(float(x) for x in np.atleast_1d(d)) for d in dirs),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "sides": list(self.sides),
            "distances": list(self.distances),
            "directions": [list(d) for d in self.directions],
        }


def cube_family(spec: FamilySpec | dict[str, Any]) -> list[Cube]:
    """Deterministic list of cubes for a family descriptor.

    Order: directions outermost, then distances, then sides. A dict with a
    ``cubes`` key is an explicit list of cube records.
    """
    if isinstance(spec, dict):
        if "cubes" in spec:
            cubes = [Cube.from_dict(c) for c in spec["cubes"]]
            if not cubes:
                raise ValueError("explicit cube list is empty")
            return cubes
        spec = FamilySpec.from_dict(spec)
    out: list[Cube] = []
    seen: set[tuple] = set()
    for direction in spec.directions:
        u = np.asarray(direction, dtype=float)
        norm = np.linalg.norm(u)
        if norm == 0:
            raise ValueError("zero direction vector")
        u = u / norm
        for dist in spec.distances:
            center = tuple(dist * u)
            for side in spec.sides:
                key = (center, side)
                if key in seen:
                    continue
                seen.add(key)
                out.append(Cube(center, side))
    return out


def decade_range(lo: int, hi: int, per_decade: int = 1) -> list[float]:
    """10**k for k from lo to hi inclusive, ``per_decade`` points per decade."""
    count = (hi - lo) * per_decade + 1
    return list(10.0 ** np.linspace(lo, hi, count))


def family_extent(cubes: Sequence[Cube]) -> tuple[float, float]:
    """Decades spanned by sides and by |c| (nonzero centres) of a family."""
    sides = np.log10([q.side for q in cubes])
    dists = [np.linalg.norm(q.center) for q in cubes]
    dists = np.log10([d for d in dists if d > 0]) if any(d > 0 for d in dists) else np.zeros(1)
    return float(np.ptp(sides)), float(np.ptp(dists))

