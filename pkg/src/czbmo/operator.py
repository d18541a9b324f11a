"""The truncated operator T_Q, its BMO extension and the normed operator T~ = T_{Q0}.

For x in Q,

    T_Q f(x) = PV int_{2Q} K(x,y) f(y) dy + int_{R \\ 2Q} (K(x,y) - K(c,y)) f(y) dy.

Near field: symmetric pairing t -> (x - t, x + t) on [eps, r] where r is the
largest symmetric window inside 2Q, plus a one-sided remainder; the excluded
window [0, eps] is removed by Richardson extrapolation in eps (the paired
integrand is even in t, so the error has odd powers of eps only).

Far field: dyadic shells 2^{k+1}Q \\ 2^kQ, k = 1..K_max, with K_max the
smallest count whose tail bound (from the regularity condition and the
measured shell mass of |f|) is below the tolerance.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import ConfigError, NumericalError, SingularPointError
from .funcspace import (
    SeminormEstimate,
    TestFunction,
    oscillation_of_samples,
)
from .geometry import Cube, log_distance, reference_cube
from .kernels import KernelSpec
from .quadrature import (
    GRADE_DEPTH,
    NEAR_FRACTION,
    _cells_to_rule,
    batched_rule,
    masked_sum,
    panel_rule,
    richardson,
)


@dataclass(frozen=True)
class QuadratureConfig:
    """Discretisation of the near and far integrals.

    ``pv_epsilons`` are exclusion radii as fractions of the cube side; the
    largest one is also the guard margin around singular points.
    ``shell_count`` of None picks K_max from ``tail_tolerance``.
    """

    pv_epsilons: tuple[float, ...] = (1 / 64, 1 / 128, 1 / 256)
    near_nodes: int = 16
    near_panels: int = 4
    shell_nodes: int = 16
    shell_panels: int = 2
    shell_count: int | None = None
    tail_tolerance: float = 1e-8
    max_shells: int = 160
    grade_depth: int = GRADE_DEPTH

    def __post_init__(self):
        eps = tuple(float(e) for e in self.pv_epsilons)
        object.__setattr__(self, "pv_epsilons", eps)
        if not eps or any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
            raise ConfigError("pv_epsilons must be positive and strictly decreasing")
        if eps[0] >= 0.5:
            raise ConfigError("pv_epsilons must be below half the cube side")
        if self.tail_tolerance <= 0:
            raise ConfigError("tail_tolerance must be positive")
        if self.shell_count is not None and self.shell_count < 1:
            raise ConfigError("shell_count must be at least 1")
        if min(self.near_nodes, self.near_panels, self.shell_nodes, self.shell_panels) < 1:
            raise ConfigError("node and panel counts must be positive")

    @property
    def margin(self) -> float:
        return self.pv_epsilons[0]

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["pv_epsilons"] = list(self.pv_epsilons)
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "QuadratureConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown quadrature settings: {sorted(unknown)}")
        data = dict(data)
        if "pv_epsilons" in data:
            data["pv_epsilons"] = tuple(data["pv_epsilons"])
        return cls(**data)


@dataclass
class TruncatedResult:
    cube: Cube
    eval_points: np.ndarray
    near_values: np.ndarray
    far_values: np.ndarray
    total_values: np.ndarray
    tail_bound: float
    shell_count: int
    pv_change: float
    skipped_points: list[float] = field(default_factory=list)
    mean_2q: float | None = None
    constant_part: np.ndarray | None = None
    fluctuation_part: np.ndarray | None = None
    tilde_mean: float | None = None

    def to_dict(self) -> dict[str, Any]:
        out = {
            "cube": self.cube.to_dict(),
            "points": self.eval_points.tolist(),
            "near": self.near_values.tolist(),
            "far": self.far_values.tolist(),
            "total": self.total_values.tolist(),
            "tail_bound": self.tail_bound,
            "shell_count": self.shell_count,
            "pv_change": self.pv_change,
            "skipped_points": list(self.skipped_points),
        }
        if self.mean_2q is not None:
            out["mean_2q"] = self.mean_2q
        if self.tilde_mean is not None:
            out["tilde_mean"] = self.tilde_mean
        return out

    def csv_rows(self) -> list[dict[str, float]]:
        return [
            {"x": float(x), "near": float(n), "far": float(f), "total": float(t)}
            for x, n, f, t in zip(self.eval_points, self.near_values, self.far_values, self.total_values)
        ]


class _Integrand:
    """f - ref with the special points of f and of the kernel's profile."""

    def __init__(self, f: TestFunction, kernel: KernelSpec, ref: float = 0.0):
        self.f = f
        self.ref = float(ref)
        fk = list(zip(f.knots, f.singular_flags))
        kk = [(p, False) for p in kernel.knots if p not in f.knots]
        pts = sorted(fk + kk)
        self.knots = np.array([p for p, _ in pts], dtype=float)
        self.singular = np.array([s for _, s in pts], dtype=bool)
        self.guards = sorted(set(f.guard_points) | set(kernel.guard_points))

    def __call__(self, y: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.f._eval(y) - self.ref


# -- far field ------------------------------------------------------------------

@dataclass
class _ShellRule:
    y: np.ndarray
    w: np.ndarray
    shell: np.ndarray  # shell index k of each node


def _shell_rule(c: float, side: float, count: int, g: _Integrand, cfg: QuadratureConfig) -> _ShellRule:
    ks = np.arange(1, count + 1)
    inner = 2.0 ** (ks - 1) * side
    outer = 2.0 ** ks * side
    # (a, b) for the right then left half of each shell
    a = np.concatenate([c + inner, c - outer])
    b = np.concatenate([c + outer, c - inner])
    kidx = np.concatenate([ks, ks])
    plain = np.ones(a.size, dtype=bool)
    for p, sing in zip(g.knots, g.singular):
        # a knot disturbs its own shell half and, if singular, a close neighbour
        reach = NEAR_FRACTION * (b - a) if sing else 0.0
        plain &= ~((a - reach <= p) & (p <= b + reach))
    ys, ws, ss = [], [], []
    if plain.any():
        t = np.linspace(0.0, 1.0, cfg.shell_panels + 1)
        pa = a[plain, None] + (b - a)[plain, None] * t[:-1]
        pb = a[plain, None] + (b - a)[plain, None] * t[1:]
        y, w = _cells_to_rule(pa, pb, cfg.shell_nodes)
        ys.append(y.ravel())
        ws.append(w.ravel())
        ss.append(np.repeat(kidx[plain], y.shape[1]))
    for i in np.flatnonzero(~plain):
        y, w = panel_rule(a[i], b[i], g.knots, g.singular, cfg.shell_nodes, cfg.shell_panels, cfg.grade_depth)
        ys.append(y)
        ws.append(w)
        ss.append(np.full(y.size, kidx[i]))
    return _ShellRule(np.concatenate(ys), np.concatenate(ws), np.concatenate(ss))


def _choose_shells(c: float, side: float, u: float, kernel: KernelSpec, g: _Integrand,
                   cfg: QuadratureConfig, k_min: int = 1) -> tuple[_ShellRule, int, float]:
    """Shell rule, K_max and the tail bound for evaluation points within ``u`` of c.

    The bound uses |K(x,y) - K(c,y)| <= C u^delta / |c-y|^(1+delta), valid once
    |c - y| >= 2u, i.e. for shells with 2^(k-1) side >= 2u.
    """
    rule = _shell_rule(c, side, cfg.max_shells, g, cfg)
    with np.errstate(invalid="ignore", over="ignore"):
        mass = np.bincount(rule.shell, weights=np.where(rule.w > 0, np.abs(g(rule.y)) * rule.w, 0.0),
                           minlength=cfg.max_shells + 1)[1:]
    if not np.all(np.isfinite(mass)):
        raise NumericalError(f"{g.f.tag} is not integrable on the far shells")
    ks = np.arange(1, cfg.max_shells + 1)
    delta = kernel.delta
    inner = 2.0 ** (ks - 1) * side
    with np.errstate(over="ignore", under="ignore"):
        terms = kernel.regularity_constant * u ** delta * inner ** -(1 + delta) * mass
    valid = inner >= 2 * u * (1 - 1e-12)
    if terms[-1] > 0:
        q = terms[-1] / terms[-2] if terms[-2] > 0 else 0.0
        remainder = terms[-1] * q / (1 - q) if q < 0.95 else math.inf
    else:
        remainder = 0.0
    # tails[K] = sum of terms for shells K+1..max plus remainder
    tails = np.concatenate([np.cumsum(terms[::-1])[::-1], [0.0]]) + remainder
    first_valid = int(np.argmax(valid)) if valid.any() else cfg.max_shells
    k_floor = max(k_min, first_valid)
    if cfg.shell_count is not None:
        k_max = max(cfg.shell_count, k_floor)
        tail = float(tails[k_max]) if k_max < tails.size else remainder
        if not tail < cfg.tail_tolerance:
            raise NumericalError(
                f"shell_count={cfg.shell_count} leaves tail bound {tail:.3g} >= {cfg.tail_tolerance:g}")
    else:
        ok = np.flatnonzero(tails[k_floor:] < cfg.tail_tolerance)
        if ok.size == 0:
            raise NumericalError(
                f"far field of {g.f.tag} does not reach tail tolerance {cfg.tail_tolerance:g} "
                f"within {cfg.max_shells} shells (growth too fast for the kernel)")
        k_max = k_floor + int(ok[0])
        tail = float(tails[k_max])
    keep = rule.shell <= k_max
    return _ShellRule(rule.y[keep], rule.w[keep], rule.shell[keep]), k_max, tail


# -- near field -----------------------------------------------------------------

def _column_filter(knots_t: np.ndarray, lo: np.ndarray, hi: np.ndarray, singular: np.ndarray):
    """Drop knot columns that lie outside every row's interval (and are not
    close enough to matter for grading)."""
    if knots_t.shape[1] == 0:
        return knots_t, singular
    length = (hi - lo)[:, None]
    inside = (knots_t > lo[:, None]) & (knots_t < hi[:, None])
    near = (knots_t > lo[:, None] - NEAR_FRACTION * length) & (knots_t < hi[:, None] + NEAR_FRACTION * length)
    keep = inside.any(axis=0) | (near.any(axis=0) & singular)
    return knots_t[:, keep], singular[keep]


def _dyadic_breaks(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Breakpoints lo * 2^j inside (lo, hi), one row per interval (padded with hi)."""
    ratio = np.maximum(hi / lo, 1.0)
    count = int(np.ceil(np.log2(ratio.max()))) if ratio.size else 0
    j = np.arange(1, count + 1, dtype=float)
    return np.minimum(lo[:, None] * 2.0 ** j, hi[:, None])


def _knot_distance(xs: np.ndarray, knots: np.ndarray, scale: float) -> np.ndarray:
    """Distance from each x to the nearest knot not located at x itself."""
    if knots.size == 0:
        return np.full(xs.shape, np.inf)
    d = np.abs(xs[:, None] - knots[None, :])
    d = np.where(d > 1e-12 * scale, d, np.inf)
    return d.min(axis=1)


def _near_field(kernel: KernelSpec, g: _Integrand, cube: Cube, xs: np.ndarray, cfg: QuadratureConfig):
    c, side = cube.c, cube.side
    a, b = c - side, c + side
    r = np.minimum(xs - a, b - xs)
    rows = xs.size
    X = xs[:, None]
    t_knots = np.abs(X - g.knots[None, :])
    # the exclusion window must not reach any knot, so that the paired
    # integrand is smooth on it and the extrapolation in eps is valid
    reach = np.minimum(side, _knot_distance(xs, g.knots, max(abs(c), side)))
    eps_rows = [e * reach for e in cfg.pv_epsilons]
    breaks = _dyadic_breaks(eps_rows[0], r)
    pair_vals = []
    for lo in eps_rows:
        kn, sg = _column_filter(t_knots, lo, r, g.singular)
        kn = np.concatenate([kn, breaks], axis=1)
        sg = np.concatenate([sg, np.zeros(breaks.shape[1], bool)])
        t, w = batched_rule(lo, r, kn, sg, cfg.near_nodes, cfg.near_panels, cfg.grade_depth, np.abs(xs))
        yl, yr = X - t, X + t
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = kernel(X, yl) * g(yl) + kernel(X, yr) * g(yr)
        pair_vals.append(masked_sum(vals, w))
    eps_abs = list(cfg.pv_epsilons)
    pv, pv_prev = richardson(eps_abs, np.array(pair_vals))

    right = xs > c
    rem_lo = np.where(right, a, xs + r)
    rem_hi = np.where(right, xs - r, b)
    y_knots = np.broadcast_to(g.knots[None, :], (rows, g.knots.size))
    kn, sg = _column_filter(y_knots, rem_lo, rem_hi, g.singular)
    y, w = batched_rule(rem_lo, rem_hi, kn, sg, cfg.near_nodes, cfg.near_panels, cfg.grade_depth)
    with np.errstate(divide="ignore", invalid="ignore"):
        rem = masked_sum(kernel(X, y) * g(y), w)
    return pv + rem, np.abs(pv - pv_prev)


def _far_field(kernel: KernelSpec, g: _Integrand, c: float, xs: np.ndarray, rule: _ShellRule) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        gy = g(rule.y)
        kc = kernel(np.float64(c), rule.y)
        vals = (kernel(xs[:, None], rule.y[None, :]) - kc[None, :]) * gy[None, :]
    return masked_sum(vals, rule.w[None, :])


def _guard(points: np.ndarray, guards: Sequence[float], margin: float) -> np.ndarray:
    """Boolean mask of points farther than ``margin`` from every guard point."""
    ok = np.ones(points.shape, dtype=bool)
    for p in guards:
        ok &= np.abs(points - p) > margin
    return ok


def _evaluate_in_cube(kernel: KernelSpec, g: _Integrand, cube: Cube, xs: np.ndarray, cfg: QuadratureConfig):
    if cube.dim != 1 or kernel.dimension != 1:
        raise ConfigError("operator evaluation is one-dimensional")
    rule, k_max, tail = _choose_shells(cube.c, cube.side, cube.side / 2, kernel, g, cfg)
    near, pv_change = _near_field(kernel, g, cube, xs, cfg)
    far = _far_field(kernel, g, cube.c, xs, rule)
    if not (np.all(np.isfinite(near)) and np.all(np.isfinite(far))):
        raise NumericalError(f"non-finite operator values for {g.f.tag} on {cube}")
    return near, far, tail, k_max, pv_change


def _prepare_points(cube: Cube, points, g: _Integrand, cfg: QuadratureConfig, on_guard: str):
    xs = np.atleast_1d(np.asarray(points, dtype=float)).ravel()
    slack = 1e-12 * cube.side
    if np.any((xs < cube.lower[0] - slack) | (xs > cube.upper[0] + slack)):
        raise ValueError(f"evaluation points must lie in {cube}; use tilde_apply for other points")
    ok = _guard(xs, g.guards, cfg.margin * cube.side)
    if not ok.all() and on_guard == "raise":
        bad = xs[~ok].tolist()
        raise SingularPointError(f"points {bad} lie within the singularity margin of {g.f.tag}/{g.guards}")
    return xs[ok], xs[~ok].tolist()


def apply_truncated(kernel: KernelSpec, f: TestFunction, cube: Cube, points,
                    cfg: QuadratureConfig | None = None, on_guard: str = "raise") -> TruncatedResult:
    """T_Q f at points of Q, for bounded (or slowly growing) f."""
    cfg = cfg or QuadratureConfig()
    g = _Integrand(f, kernel)
    xs, skipped = _prepare_points(cube, points, g, cfg, on_guard)
    if xs.size == 0:
        raise SingularPointError("no evaluation points left outside the singularity margin")
    near, far, tail, k_max, pv_change = _evaluate_in_cube(kernel, g, cube, xs, cfg)
    return TruncatedResult(cube, xs, near, far, near + far, tail, k_max, float(np.max(pv_change)), skipped)


def _mean_2q(f: TestFunction, kernel: KernelSpec, cube: Cube, cfg: QuadratureConfig) -> float:
    g = _Integrand(f, kernel)
    a, b = cube.c - cube.side, cube.c + cube.side
    y, w = panel_rule(a, b, g.knots, g.singular, cfg.shell_nodes, 8, cfg.grade_depth)
    return float(masked_sum(g(y), w) / (b - a))


def apply_truncated_bmo(kernel: KernelSpec, f: TestFunction, cube: Cube, points,
                        cfg: QuadratureConfig | None = None, on_guard: str = "raise") -> TruncatedResult:
    """T_Q f = f_{2Q} T_Q 1 + T_Q (f - f_{2Q}) at points of Q.

    ``constant_part`` and ``fluctuation_part`` hold the two summands.
    """
    cfg = cfg or QuadratureConfig()
    m = _mean_2q(f, kernel, cube, cfg)
    g = _Integrand(f, kernel, ref=m)
    xs, skipped = _prepare_points(cube, points, g, cfg, on_guard)
    if xs.size == 0:
        raise SingularPointError("no evaluation points left outside the singularity margin")
    near_f, far_f, tail_f, k_f, pv_f = _evaluate_in_cube(kernel, g, cube, xs, cfg)
    one = _Integrand(_ONE, kernel)
    if m != 0:
        near_1, far_1, tail_1, k_1, pv_1 = _evaluate_in_cube(kernel, one, cube, xs, cfg)
    else:
        near_1 = far_1 = np.zeros_like(xs)
        tail_1, k_1, pv_1 = 0.0, 0, np.zeros_like(xs)
    near = m * near_1 + near_f
    far = m * far_1 + far_f
    return TruncatedResult(
        cube, xs, near, far, near + far,
        tail_bound=abs(m) * tail_1 + tail_f,
        shell_count=max(k_f, k_1),
        pv_change=float(max(np.max(pv_f), abs(m) * np.max(pv_1))),
        skipped_points=skipped,
        mean_2q=m,
        constant_part=m * (near_1 + far_1),
        fluctuation_part=near_f + far_f,
    )


class _Unit(TestFunction):
    tag = "const:1"

    def _eval(self, x):
        return np.ones(np.shape(x))


_ONE = _Unit()


# -- general evaluation (points anywhere on the line) -------------------------------

def _subtract(a: float, b: float, lo: float, hi: float) -> list[tuple[float, float]]:
    """[a, b] minus (lo, hi)."""
    out = []
    if a < min(b, lo):
        out.append((a, min(b, lo)))
    if max(a, hi) < b:
        out.append((max(a, hi), b))
    return out


def truncated_at(kernel: KernelSpec, f: TestFunction, cube: Cube, x: float,
                 cfg: QuadratureConfig | None = None, ref: float = 0.0) -> float:
    """T_Q (f - ref)(x) for a single x anywhere off the boundary of 2Q.

    Scalar route used for T~ = T_{Q0} away from Q0 and as a cross-check of
    the vectorised route. The PV window is the largest symmetric interval
    around x that does not cross the boundary of 2Q.
    """
    cfg = cfg or QuadratureConfig()
    g = _Integrand(f, kernel, ref)
    c, side = cube.c, cube.side
    a2, b2 = c - side, c + side
    inside = a2 < x < b2
    r = min(abs(x - a2), abs(b2 - x))
    if r == 0:
        raise SingularPointError("x lies on the boundary of 2Q")
    for p in g.guards:
        if abs(x - p) <= cfg.margin * min(side, 2 * r):
            raise SingularPointError(f"x={x} within the singularity margin of {p}")
    u = max(abs(x - c), side / 2)
    k_min = max(1, math.ceil(math.log2(max(abs(x - c) + r, side) / side)) + 1)
    rule, k_max, _ = _choose_shells(c, side, u, kernel, g, cfg, k_min=k_min)
    del rule
    nodes, order, depth = cfg.near_nodes, cfg.near_panels, cfg.grade_depth
    knots = list(g.knots) + [x - r, x + r]
    sing = list(g.singular) + [True, True]
    total = 0.0

    def kern(y):
        with np.errstate(divide="ignore", invalid="ignore"):
            return kernel(np.float64(x), y)

    pieces = [(a2, b2, False)]
    for k in range(1, k_max + 1):
        lo, hi = 2.0 ** (k - 1) * side, 2.0 ** k * side
        pieces += [(c + lo, c + hi, True), (c - hi, c - lo, True)]
    cut = [(qa, qb, far) for pa, pb, far in pieces for qa, qb in _subtract(pa, pb, x - r, x + r)]
    pa = np.array([p[0] for p in cut])
    pb = np.array([p[1] for p in cut])
    far = np.array([p[2] for p in cut])
    plain = np.ones(pa.size, dtype=bool)
    for p, sg in zip(knots, sing):
        reach = NEAR_FRACTION * (pb - pa) if sg else 0.0
        plain &= ~((pa - reach <= p) & (p <= pb + reach))
    rules = []
    if plain.any():
        t = np.linspace(0.0, 1.0, order + 1)
        ca = pa[plain, None] + (pb - pa)[plain, None] * t[:-1]
        cb = pa[plain, None] + (pb - pa)[plain, None] * t[1:]
        y, w = _cells_to_rule(ca, cb, nodes)
        rules.append((y, w, far[plain]))
    for i in np.flatnonzero(~plain):
        y, w = panel_rule(pa[i], pb[i], knots, sing, nodes, order, depth)
        rules.append((y[None, :], w[None, :], far[i:i + 1]))
    for y, w, fr in rules:
        with np.errstate(divide="ignore", invalid="ignore"):
            gy = g(y)
            vals = kern(y) * gy - np.where(fr[:, None], kernel(np.float64(c), y) * gy, 0.0)
        total += float(np.sum(masked_sum(vals, w)))

    others = [p for p in g.knots if abs(p - x) > 1e-12 * max(abs(x), side)]
    reach = min([side, 2 * r] + [abs(p - x) for p in others])
    eps_abs = [e * reach for e in cfg.pv_epsilons]
    marks = [(abs(x - p), bool(sg)) for p, sg in zip(g.knots, g.singular)]
    marks += [(float(t), False) for t in _dyadic_breaks(np.array([eps_abs[0]]), np.array([r]))[0]]
    if not inside:
        # the window reaches the edge of 2Q, where K(c, .) varies on the scale of Q
        steps = side * 2.0 ** np.arange(math.ceil(math.log2(max(r / side, 1.0))))
        marks += [(r, True)] + [(r - d, False) for d in steps if r - d > eps_abs[0]]
    t_knots = [m for m, _ in marks]
    t_sing = [f for _, f in marks]
    pair_vals = []
    for eps in eps_abs:
        t, w = panel_rule(eps, r, t_knots, t_sing, nodes, order, depth, abs(x))
        yl, yr = x - t, x + t
        vals = kern(yl) * g(yl) + kern(yr) * g(yr)
        if not inside:
            vals = vals - kernel(np.float64(c), yl) * g(yl) - kernel(np.float64(c), yr) * g(yr)
        pair_vals.append(float(masked_sum(vals, w)))
    pv, _ = richardson(eps_abs, np.array(pair_vals))
    return total + float(pv)


def tilde_apply(kernel: KernelSpec, f: TestFunction, points, cfg: QuadratureConfig | None = None,
                resolution: int = 65, on_guard: str = "raise") -> TruncatedResult:
    """T~ f = T_{Q0} f (BMO form) at arbitrary points, plus the mean over Q0.

    Points inside Q0 use the vectorised route; others the scalar route.
    """
    cfg = cfg or QuadratureConfig()
    q0 = reference_cube(1)
    xs = np.atleast_1d(np.asarray(points, dtype=float)).ravel()
    m = _mean_2q(f, kernel, q0, cfg)
    g = _Integrand(f, kernel, ref=m)
    ok = _guard(xs, g.guards, cfg.margin * q0.side)
    if not ok.all() and on_guard == "raise":
        raise SingularPointError(f"points {xs[~ok].tolist()} lie within the singularity margin")
    skipped = xs[~ok].tolist()
    xs = xs[ok]
    total = np.empty_like(xs)
    in_q0 = np.abs(xs) <= 0.5
    tail = 0.0
    k_max = 0
    if in_q0.any():
        res = apply_truncated_bmo(kernel, f, q0, xs[in_q0], cfg, on_guard="raise")
        total[in_q0] = res.total_values
        tail, k_max = res.tail_bound, res.shell_count
    for i in np.flatnonzero(~in_q0):
        total[i] = tilde_value(kernel, f, float(xs[i]), cfg, mean_2q0=m)
    grid, weights = evaluation_grid(q0, resolution)
    keep = _guard(grid, g.guards, cfg.margin)
    inner = apply_truncated_bmo(kernel, f, q0, grid[keep], cfg, on_guard="skip")
    mean_q0 = float(np.sum(inner.total_values * weights[keep]) / np.sum(weights[keep]))
    nan = np.full_like(total, np.nan)
    return TruncatedResult(q0, xs, nan, nan, total, tail, k_max, float("nan"), skipped,
                           mean_2q=m, tilde_mean=mean_q0)


def tilde_value(kernel: KernelSpec, f: TestFunction, x: float, cfg: QuadratureConfig | None = None,
                mean_2q0: float | None = None) -> float:
    """T_{Q0} f(x) = m T_{Q0}1(x) + T_{Q0}(f - m)(x), m = f_{2Q0}, for any x."""
    cfg = cfg or QuadratureConfig()
    q0 = reference_cube(1)
    m = _mean_2q(f, kernel, q0, cfg) if mean_2q0 is None else mean_2q0
    value = truncated_at(kernel, f, q0, x, cfg, ref=m)
    if m != 0:
        value += m * truncated_at(kernel, _ONE, q0, x, cfg)
    return value


def perturbation_term(kernel: KernelSpec, f: TestFunction, cfg: QuadratureConfig | None = None) -> float:
    """int_{R \\ 2Q0} K(0, y) (f(y) - f_{2Q0}) dy over the dyadic shells of Q0.

    Shells are taken in symmetric pairs, so the integral is the symmetric
    limit; this is the constant Tf - T~f when both are defined.
    """
    cfg = cfg or QuadratureConfig()
    q0 = reference_cube(1)
    m = _mean_2q(f, kernel, q0, cfg)
    g = _Integrand(f, kernel, ref=m)
    rule = _shell_rule(0.0, 1.0, cfg.max_shells, g, cfg)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = kernel(np.float64(0.0), rule.y) * g(rule.y)
    return float(masked_sum(vals, rule.w))


# -- oscillation of T_Q f and seminorm estimates ----------------------------------------

def evaluation_grid(cube: Cube, resolution: int) -> tuple[np.ndarray, np.ndarray]:
    """Midpoint nodes and weights on a one-dimensional cube."""
    if resolution < 3:
        raise ValueError("resolution must be at least 3")
    h = cube.side / resolution
    x = cube.lower[0] + h * (np.arange(resolution) + 0.5)
    return x, np.full(resolution, h)


@dataclass
class CubeOscillation:
    cube: Cube
    value: float
    best_constant: float
    points_used: int
    skipped: int
    tail_bound: float
    pv_change: float
    points: np.ndarray | None = None
    values: np.ndarray | None = None
    weights: np.ndarray | None = None


def operator_oscillation(kernel: KernelSpec, f: TestFunction, cube: Cube,
                         cfg: QuadratureConfig | None = None, resolution: int = 65,
                         part: str = "total") -> CubeOscillation:
    """||T_Q f||_Q on the midpoint grid (guarded nodes dropped).

    ``part`` selects ``total`` or ``fluctuation`` (T_Q(f - f_{2Q}) alone).
    """
    cfg = cfg or QuadratureConfig()
    x, w = evaluation_grid(cube, resolution)
    res = apply_truncated_bmo(kernel, f, cube, x, cfg, on_guard="skip")
    keep = np.isin(x, res.eval_points)
    values = res.total_values if part == "total" else res.fluctuation_part
    b, value = oscillation_of_samples(values, w[keep])
    return CubeOscillation(cube, value, b, int(keep.sum()), len(res.skipped_points),
                           res.tail_bound, res.pv_change, res.eval_points, values, w[keep])


def _tilde_oscillation(kernel: KernelSpec, f: TestFunction, direct: CubeOscillation,
                       cfg: QuadratureConfig) -> tuple[float, float] | None:
    """Oscillations of T~f and of T_Q f on the nodes both can use.

    T~ drops nodes at |x| = 1 (the boundary of 2Q0) and guards with the Q0
    margin; the direct values are restricted to the same nodes so that the
    two numbers differ only by quadrature error. None when no node is left.
    """
    x, w = direct.points, direct.weights
    m = _mean_2q(f, kernel, reference_cube(1), cfg)
    g = _Integrand(f, kernel, ref=m)
    # T~ guards with the Q0 margin, which can exceed the cube's own
    keep = _guard(x, g.guards, cfg.margin * max(direct.cube.side, 1.0)) & (np.abs(np.abs(x) - 1.0) > 1e-9)
    if not keep.any():
        return None
    res = tilde_apply(kernel, f, x[keep], cfg, resolution=9, on_guard="skip")
    common = np.isin(x, res.eval_points)
    tilde = oscillation_of_samples(res.total_values, w[common])[1]
    return tilde, oscillation_of_samples(direct.values[common], w[common])[1]


def operator_bmo_seminorm(kernel: KernelSpec, f: TestFunction, family: Sequence[Cube],
                          cfg: QuadratureConfig | None = None, resolution: int = 65,
                          weight: str = "bmo", cross_check_every: int = 10,
                          part: str = "total") -> SeminormEstimate:
    """sup over the family of ||T_Q f||_Q (``weight='lmo'`` multiplies by L(Q)).

    Every ``cross_check_every``-th cube is recomputed through T~ = T_{Q0}
    (same seminorm up to quadrature error); the largest discrepancy is kept
    in ``extras['cross_check']``.
    """
    if not family:
        raise ValueError("cube family is empty")
    cfg = cfg or QuadratureConfig()
    vals, tails, skipped = [], [], 0
    checks = []
    for i, q in enumerate(family):
        osc = operator_oscillation(kernel, f, q, cfg, resolution, part)
        wgt = log_distance(q) if weight == "lmo" else 1.0
        vals.append(wgt * osc.value)
        tails.append(osc.tail_bound)
        skipped += osc.skipped
        if cross_check_every and i % cross_check_every == 0 and part == "total":
            pair = _tilde_oscillation(kernel, f, osc, cfg)
            if pair is None:
                continue
            tilde, direct = pair
            checks.append({"cube": q.to_dict(), "direct": direct, "tilde": tilde,
                           "difference": abs(tilde - direct)})
    k = int(np.argmax(vals))
    finer = 2 * resolution - 1
    refined = operator_oscillation(kernel, f, family[k], cfg, finer, part).value
    wk = log_distance(family[k]) if weight == "lmo" else 1.0
    est = SeminormEstimate(vals[k], len(family), family[k], [(resolution, vals[k]), (finer, wk * refined)], vals)
    est.extras = {
        "max_tail_bound": float(max(tails)),
        "skipped_points": skipped,
        "cross_check": checks,
        "cross_check_max_difference": max((c["difference"] for c in checks), default=0.0),
    }
    return est


__all__ = [
    "QuadratureConfig",
    "TruncatedResult",
    "apply_truncated",
    "apply_truncated_bmo",
    "tilde_apply",
    "tilde_value",
    "truncated_at",
    "perturbation_term",
    "evaluation_grid",
    "operator_oscillation",
    "operator_bmo_seminorm",
]

