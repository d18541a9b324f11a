"""Quadrature rules shared by the function-space and operator modules.

Two families of rules live here:

* ``batched_rule`` builds one composite Gauss-Legendre rule per row, with
  per-row interval ends and knots. Rows share a node count so that integrands
  can be evaluated as dense ``(rows, nodes)`` arrays. Knots flagged singular
  get geometric grading (ratio 1/2) on both sides.
* ``cube_rule`` is the rule for averages over a cube: composite midpoint on
  smooth pieces (``resolution`` cells per axis), graded Gauss-Legendre on
  pieces that touch an integrable singularity.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Sequence

import numpy as np

from .geometry import Cube

GRADE_DEPTH = 40
# a singular point outside an interval but within this fraction of its length still grades the rule
NEAR_FRACTION = 0.25
_RESOLVE = 1e4 * np.finfo(float).eps


@lru_cache(maxsize=None)
def gauss_legendre01(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    x = (x + 1) / 2
    w = w / 2
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _cells_to_rule(a: np.ndarray, b: np.ndarray, order: int, scale=0.0) -> tuple[np.ndarray, np.ndarray]:
    xg, wg = gauss_legendre01(order)
    width = b - a
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), scale)
    # cells narrower than the float spacing near them cannot be resolved
    width = np.where(width > _RESOLVE * np.maximum(scale, 1e-300), width, 0.0)
    y = a[..., None] + width[..., None] * xg
    w = width[..., None] * wg
    return y.reshape(*a.shape[:-1], -1), w.reshape(*a.shape[:-1], -1)


def batched_rule(
    lo: np.ndarray,
    hi: np.ndarray,
    knots: np.ndarray | None = None,
    singular: Sequence[bool] | np.ndarray | None = None,
    order: int = 16,
    panels: int = 4,
    depth: int = GRADE_DEPTH,
    scale: np.ndarray | float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-row composite rule on ``[lo[i], hi[i]]``.

    ``knots`` has shape ``(rows, m)``; entries outside a row's interval are
    clipped to the nearest end, so a singular knot just outside an interval
    still grades the rule toward that end. Returns ``(nodes, weights)`` of
    shape ``(rows, N)``; zero weights mark padding nodes, which callers must
    mask before multiplying (the integrand may be infinite there).

    ``scale`` (per row or scalar) is the magnitude of the coordinates the
    integrand is actually evaluated at, e.g. |x| for offsets t around x;
    cells too narrow to be resolved at that magnitude are dropped.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    rows = lo.size
    if knots is None:
        knots = np.empty((rows, 0))
    knots = np.asarray(knots, dtype=float).reshape(rows, -1)
    m = knots.shape[1]
    sing = np.zeros((rows, m), dtype=bool)
    if m:
        sing[:] = np.asarray(singular if singular is not None else False, dtype=bool)
    hi = np.maximum(hi, lo)
    k = np.clip(knots, lo[:, None], hi[:, None])
    idx = np.argsort(k, axis=1, kind="stable")
    k = np.take_along_axis(k, idx, axis=1)
    sing = np.take_along_axis(sing, idx, axis=1)
    # coincident knots share the strongest flag
    if m > 1:
        same = k[:, 1:] == k[:, :-1]
        for _ in range(m - 1):
            spread = sing.copy()
            spread[:, 1:] |= same & sing[:, :-1]
            spread[:, :-1] |= same & sing[:, 1:]
            if np.array_equal(spread, sing):
                break
            sing = spread

    edges = np.concatenate([lo[:, None], k, hi[:, None]], axis=1)
    flags = np.concatenate([np.zeros((rows, 1), bool), sing, np.zeros((rows, 1), bool)], axis=1)
    u, v = edges[:, :-1], edges[:, 1:]
    h = v - u
    graded = bool(sing.any())
    zl = np.where(flags[:, :-1], h / 4, 0.0) if graded else np.zeros_like(h)
    zr = np.where(flags[:, 1:], h / 4, 0.0) if graded else np.zeros_like(h)

    t = np.linspace(0.0, 1.0, panels + 1)
    a_mid, b_mid = u + zl, v - zr
    ca = [a_mid[..., None] + (b_mid - a_mid)[..., None] * t[:-1]]
    cb = [a_mid[..., None] + (b_mid - a_mid)[..., None] * t[1:]]
    if graded:
        j = np.arange(depth, dtype=float)
        f_hi = np.concatenate([2.0 ** -j, [2.0 ** -depth]])
        f_lo = np.concatenate([2.0 ** -(j + 1), [0.0]])
        ca.append(u[..., None] + zl[..., None] * f_lo)
        cb.append(u[..., None] + zl[..., None] * f_hi)
        ca.append(v[..., None] - zr[..., None] * f_hi)
        cb.append(v[..., None] - zr[..., None] * f_lo)
    a = np.concatenate(ca, axis=-1).reshape(rows, -1)
    b = np.concatenate(cb, axis=-1).reshape(rows, -1)
    scale = np.broadcast_to(np.asarray(scale, dtype=float), (rows,))[:, None]
    return _cells_to_rule(a, b, order, scale)


def panel_rule(
    a: float,
    b: float,
    knots: Sequence[float] = (),
    singular: Sequence[bool] = (),
    order: int = 16,
    panels: int = 4,
    depth: int = GRADE_DEPTH,
    scale: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Single-interval version of :func:`batched_rule`.

    Singular knots farther than ``NEAR_FRACTION`` of the length outside
    ``[a, b]`` are ignored.
    """
    length = b - a
    near = NEAR_FRACTION * length
    keep = [(p, s) for p, s in zip(knots, singular) if a - near <= p <= b + near]
    # outside knots that are merely kinks do not affect the rule
    keep = [(p, s) for p, s in keep if a < p < b or s]
    kn = np.array([[p for p, _ in keep]]) if keep else None
    sg = [s for _, s in keep]
    y, w = batched_rule(np.array([a]), np.array([b]), kn, sg, order, panels, depth, scale)
    return y[0], w[0]


def masked_sum(values: np.ndarray, weights: np.ndarray, axis: int = -1) -> np.ndarray:
    """Sum of ``values * weights`` ignoring zero-weight padding nodes."""
    with np.errstate(invalid="ignore", over="ignore"):
        return np.sum(np.where(weights != 0, values * weights, 0.0), axis=axis)


def _graded_piece(u: float, v: float, left: bool, right: bool, h_target: float,
                  order: int, depth: int) -> tuple[np.ndarray, np.ndarray]:
    length = v - u
    cells: list[tuple[float, float]] = []
    if left and right:
        mid = (u + v) / 2
        a1, b1 = _graded_piece(u, mid, True, False, h_target, order, depth)
        a2, b2 = _graded_piece(mid, v, False, True, h_target, order, depth)
        return np.concatenate([a1, a2]), np.concatenate([b1, b2])
    for j in range(depth):
        lo_f, hi_f = 2.0 ** -(j + 1), 2.0 ** -j
        cells.append((lo_f, hi_f))
    cells.append((0.0, 2.0 ** -depth))
    sub: list[tuple[float, float]] = []
    for lo_f, hi_f in cells:
        width = (hi_f - lo_f) * length
        pieces = max(1, math.ceil(width / h_target - 1e-9))
        edges = np.linspace(lo_f, hi_f, pieces + 1)
        sub.extend(zip(edges[:-1], edges[1:]))
    f = np.array(sub)
    if left:
        a, b = u + length * f[:, 0], u + length * f[:, 1]
    else:
        a, b = v - length * f[:, 1], v - length * f[:, 0]
    return a, b


def interval_rule(
    a: float,
    b: float,
    resolution: int,
    knots: Sequence[float] = (),
    singular: Sequence[bool] = (),
    order: int = 8,
    depth: int = GRADE_DEPTH,
) -> tuple[np.ndarray, np.ndarray]:
    """Rule for an average over ``[a, b]`` at ``resolution`` cells.

    The interval is split at interior knots. A piece whose end touches (or lies
    within one piece length of) a singular point is integrated with graded
    Gauss-Legendre cells no wider than ``order`` midpoint cells; every other
    piece uses the composite midpoint rule.
    """
    if resolution < 3:
        raise ValueError("resolution must be at least 3 points per axis")
    total = b - a
    inner = sorted({float(p) for p in knots if a < p < b})
    sing_pts = [float(p) for p, s in zip(knots, singular) if s]
    edges = [a, *inner, b]
    h_mid = total / resolution
    xs: list[np.ndarray] = []
    ws: list[np.ndarray] = []
    for u, v in zip(edges[:-1], edges[1:]):
        length = v - u
        left = any(0 <= u - p < length for p in sing_pts)
        right = any(0 <= p - v < length for p in sing_pts)
        if not (left or right):
            cells = max(1, round(length / h_mid))
            step = length / cells
            xs.append(u + step * (np.arange(cells) + 0.5))
            ws.append(np.full(cells, step))
            continue
        ca, cb = _graded_piece(u, v, left, right, order * h_mid, order, depth)
        y, w = _cells_to_rule(ca[None, :], cb[None, :], order)
        keep = w[0] > 0
        xs.append(y[0][keep])
        ws.append(w[0][keep])
    return np.concatenate(xs), np.concatenate(ws)


def cube_rule(
    cube: Cube,
    resolution: int,
    points: Sequence[Sequence[float]] = (),
    singular: Sequence[bool] = (),
    order: int = 8,
) -> tuple[np.ndarray, np.ndarray]:
    """Tensor-product averaging rule on ``cube``.

    ``points`` are special points of the integrand in R^d; their coordinates
    become knots on each axis. Returns nodes of shape ``(N, d)`` and weights
    summing to the cube volume.
    """
    axes_x, axes_w = [], []
    for axis in range(cube.dim):
        kn = [p[axis] for p in points]
        x, w = interval_rule(cube.lower[axis], cube.upper[axis], resolution, kn, singular, order)
        axes_x.append(x)
        axes_w.append(w)
    if cube.dim == 1:
        return axes_x[0][:, None], axes_w[0]
    grids = np.meshgrid(*axes_x, indexing="ij")
    wgrid = np.ones_like(grids[0])
    for axis, w in enumerate(axes_w):
        shape = [1] * cube.dim
        shape[axis] = -1
        wgrid = wgrid * w.reshape(shape)
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    return nodes, wgrid.ravel()


def weighted_median(values: np.ndarray, weights: np.ndarray) -> float:
    """Lower weighted median: the smallest sample with at least half the mass at or below it."""
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if values.size == 0:
        raise ValueError("median of an empty sample")
    idx = np.argsort(values, kind="stable")
    cum = np.cumsum(weights[idx])
    k = int(np.searchsorted(cum, 0.5 * cum[-1]))
    return float(values[idx][min(k, values.size - 1)])


def richardson(eps: Sequence[float], values: np.ndarray, powers: Sequence[float] = (1, 3, 5, 7)
               ) -> tuple[np.ndarray, np.ndarray]:
    """Extrapolate ``values[i] ~ V + sum_k a_k eps[i]**powers[k]`` to eps = 0.

    ``values`` has shape ``(levels, ...)``. Returns the extrapolant using all
    levels and the one using all but the finest level (the spread between the
    two is the reported convergence indicator). With a single level both are
    the raw values.
    """
    eps = np.asarray(eps, dtype=float)
    values = np.asarray(values, dtype=float)
    n = eps.size
    if n == 1:
        return values[0], values[0]

    def solve(k: int) -> np.ndarray:
        mat = np.ones((k, k))
        for col in range(1, k):
            mat[:, col] = eps[:k] ** powers[col - 1]
        weights = np.linalg.solve(mat.T, np.eye(k)[0])
        return np.tensordot(weights, values[:k], axes=1)

    return solve(n), solve(n - 1)
