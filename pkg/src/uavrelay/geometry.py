"""Disk geometry: lens areas, distance densities, enclosing circles."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from uavrelay.errors import NumericalError

Point = tuple[float, float]


@dataclass(frozen=True)
class Disk:
    """A closed disk in the plane."""

    center: Point
    radius: float

    def __post_init__(self):
        cx, cy = self.center
        if not (math.isfinite(cx) and math.isfinite(cy)):
            raise ValueError(f"disk center must be finite, got {self.center}")
        if not math.isfinite(self.radius) or self.radius < 0:
            raise ValueError(f"disk radius must be finite and >= 0, got {self.radius}")

    def contains(self, point: Sequence[float], tol: float = 1e-9) -> bool:
        return math.hypot(point[0] - self.center[0], point[1] - self.center[1]) <= self.radius + tol


def _check_nonneg(**values: float) -> None:
    for name, v in values.items():
        if not math.isfinite(v) or v < 0:
            raise ValueError(f"{name} must be finite and >= 0, got {v}")


_SERIES_CUTOFF = 0.05


def _chord_gap(t: float) -> float:
    """``t - sin(t)`` without cancellation for small ``t``."""
    if t >= _SERIES_CUTOFF:
        return t - math.sin(t)
    t2 = t * t
    return t * t2 / 6.0 * (1.0 - t2 / 20.0 * (1.0 - t2 / 42.0 * (1.0 - t2 / 72.0)))


def _chord_gap_array(t: np.ndarray) -> np.ndarray:
    t2 = t * t
    series = t * t2 / 6.0 * (1.0 - t2 / 20.0 * (1.0 - t2 / 42.0 * (1.0 - t2 / 72.0)))
    return np.where(t >= _SERIES_CUTOFF, t - np.sin(t), series)


def _lens(R: float, r: float, d: float) -> float:
    # unchecked core of lens_area; callers guarantee valid inputs
    if d >= R + r:
        return 0.0
    if d <= abs(R - r):
        m = R if R < r else r
        return math.pi * m * m
    # sum of two circular segments; atan2 and the series keep thin slivers
    # accurate when one radius dwarfs the other
    q = math.sqrt(max((R + r + d) * (R - r + d) * (-R + r + d) * (R + r - d), 0.0))
    a1 = math.atan2(q, d * d + (R - r) * (R + r))
    a2 = math.atan2(q, d * d + (r - R) * (r + R))
    area = 0.5 * (R * R * _chord_gap(2.0 * a1) + r * r * _chord_gap(2.0 * a2))
    m = R if R < r else r
    return min(max(area, 0.0), math.pi * m * m)


def lens_area(R: float, r: float, d: float) -> float:
    """Intersection area of two disks with radii ``R``, ``r`` and center distance ``d``."""
    _check_nonneg(R=R, r=r, d=d)
    return _lens(float(R), float(r), float(d))


def lens_area_array(R, r, d) -> np.ndarray:
    """Vectorized :func:`lens_area` with numpy broadcasting (no input validation)."""
    R, r, d = np.broadcast_arrays(
        np.asarray(R, dtype=float), np.asarray(r, dtype=float), np.asarray(d, dtype=float)
    )
    small = np.minimum(R, r)
    full = np.pi * small * small
    out = np.zeros(R.shape)
    contained = d <= np.abs(R - r)
    partial = ~contained & (d < R + r)
    out[contained] = full[contained]
    if partial.any():
        Rp, rp, dp = R[partial], r[partial], d[partial]
        q = np.sqrt(np.maximum((Rp + rp + dp) * (Rp - rp + dp) * (-Rp + rp + dp) * (Rp + rp - dp), 0.0))
        a1 = np.arctan2(q, dp * dp + (Rp - rp) * (Rp + rp))
        a2 = np.arctan2(q, dp * dp + (rp - Rp) * (rp + Rp))
        area = 0.5 * (Rp * Rp * _chord_gap_array(2.0 * a1) + rp * rp * _chord_gap_array(2.0 * a2))
        out[partial] = np.clip(area, 0.0, full[partial])
    return out


def _pdf(x: float, d: float, r: float) -> float:
    if d == 0.0:
        return 2.0 * x / (r * r) if 0.0 <= x <= r else 0.0
    if x < max(0.0, d - r) or x > d + r or x == 0.0:
        return 0.0
    q = math.sqrt(max((x + d + r) * (-x + d + r) * (x - d + r) * (x + d - r), 0.0))
    return 2.0 * x * math.atan2(q, x * x + (d - r) * (d + r)) / (math.pi * r * r)


def disk_distance_pdf(x: float, d: float, r: float) -> float:
    """Density of the distance from a fixed point to a uniform point in a disk.

    The disk has radius ``r`` and its center lies ``d`` away from the fixed
    point. Zero outside the support ``[max(0, d - r), d + r]``.
    """
    if not math.isfinite(r) or r <= 0:
        raise ValueError(f"r must be finite and > 0, got {r}")
    _check_nonneg(d=d)
    if not math.isfinite(x):
        raise ValueError(f"x must be finite, got {x}")
    return _pdf(float(x), float(d), float(r))


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    eps: float,
    max_depth: int = 60,
    min_depth: int = 3,
    max_evals: int = 2_000_000,
) -> float:
    """Integrate ``f`` over ``[a, b]`` to absolute tolerance ``eps``.

    Iterative adaptive Simpson with Richardson correction. Raises
    :class:`NumericalError` (carrying the partial sum) when an interval
    still fails the error test at ``max_depth``.
    """
    if b <= a:
        return 0.0
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    stack = [(a, b, fa, fm, fb, (b - a) * (fa + 4.0 * fm + fb) / 6.0, eps, 0)]
    total = 0.0
    evals = 3
    failed = False
    while stack:
        lo, hi, flo, fmid, fhi, whole, tol, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        flm = f(0.5 * (lo + mid))
        frm = f(0.5 * (mid + hi))
        evals += 2
        left = (mid - lo) * (flo + 4.0 * flm + fmid) / 6.0
        right = (hi - mid) * (fmid + 4.0 * frm + fhi) / 6.0
        delta = left + right - whole
        if depth >= min_depth and abs(delta) <= 15.0 * tol:
            total += left + right + delta / 15.0
        elif depth >= max_depth or evals >= max_evals:
            failed = True
            total += left + right + delta / 15.0
        else:
            stack.append((mid, hi, fmid, frm, fhi, right, 0.5 * tol, depth + 1))
            stack.append((lo, mid, flo, flm, fmid, left, 0.5 * tol, depth + 1))
    if failed:
        raise NumericalError(
            f"adaptive Simpson did not converge on [{a}, {b}] (eps={eps})", partial=total
        )
    return total


def average_lens_area(
    Rc: float,
    r_i: float,
    d_ij: float,
    r_j: float,
    quad_tol: float = 1e-8,
    max_depth: int = 60,
) -> float:
    """Expected lens area between disk ``(Rc)`` around drone j and drone i's uncertainty disk.

    Drone j sits uniformly inside a disk of radius ``r_j`` whose center is
    ``d_ij`` from drone i's estimate; the lens area of ``(Rc, r_i, x)`` is
    averaged over the resulting distance density.
    """
    for name, v in (("Rc", Rc), ("r_i", r_i), ("r_j", r_j), ("quad_tol", quad_tol)):
        if not math.isfinite(v) or v <= 0:
            raise ValueError(f"{name} must be finite and > 0, got {v}")
    _check_nonneg(d_ij=d_ij)
    Rc, r_i, d, r_j = float(Rc), float(r_i), float(d_ij), float(r_j)

    lo, hi = max(0.0, d - r_j), d + r_j
    inner, outer = abs(Rc - r_i), Rc + r_i
    full = math.pi * min(Rc, r_i) ** 2
    if lo >= outer:
        return 0.0
    if hi <= inner:
        return full

    breaks = [lo, hi]
    for k in (inner, outer, r_j - d):
        if lo < k < hi:
            breaks.append(k)
    breaks.sort()

    def integrand(x: float) -> float:
        return _lens(Rc, r_i, x) * _pdf(x, d, r_j)

    # coarse composite Simpson sets the scale for the relative tolerance
    xs = np.linspace(lo, hi, 65)
    ys = [integrand(x) for x in xs]
    coarse = (xs[1] - xs[0]) / 3.0 * (ys[0] + ys[-1] + 4.0 * sum(ys[1:-1:2]) + 2.0 * sum(ys[2:-1:2]))
    # the result is later divided by the disk area, so tiny slivers need no
    # more absolute accuracy than a small fraction of it
    scale = max(abs(coarse), full * 1e-4)
    span = hi - lo

    total = 0.0
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b <= a:
            continue
        eps = quad_tol * scale * (b - a) / span
        total += adaptive_simpson(integrand, a, b, eps, max_depth=max_depth)
    return min(max(total, 0.0), full)


@dataclass(frozen=True)
class _C:
    x: float
    y: float
    r: float


def _inside(c: _C, p: Point) -> bool:
    return math.hypot(p[0] - c.x, p[1] - c.y) <= c.r * (1.0 + 1e-13) + 1e-13


def _diameter(a: Point, b: Point) -> _C:
    cx, cy = 0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])
    return _C(cx, cy, max(math.hypot(cx - a[0], cy - a[1]), math.hypot(cx - b[0], cy - b[1])))


def circumcircle(a: Point, b: Point, c: Point) -> tuple[Point, float] | None:
    """Circumscribed circle of three points, or None when they are collinear."""
    ox = (min(a[0], b[0], c[0]) + max(a[0], b[0], c[0])) / 2.0
    oy = (min(a[1], b[1], c[1]) + max(a[1], b[1], c[1])) / 2.0
    ax, ay = a[0] - ox, a[1] - oy
    bx, by = b[0] - ox, b[1] - oy
    cx, cy = c[0] - ox, c[1] - oy
    den = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if den == 0.0:
        return None
    a2, b2, c2 = ax * ax + ay * ay, bx * bx + by * by, cx * cx + cy * cy
    x = ox + (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / den
    y = oy + (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / den
    r = max(math.hypot(x - p[0], y - p[1]) for p in (a, b, c))
    return (x, y), r


def _cross(o: Point, a: Point, b: Point) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _mec_two(points: list[Point], p: Point, q: Point) -> _C:
    base = _diameter(p, q)
    left: _C | None = None
    right: _C | None = None
    for s in points:
        if _inside(base, s):
            continue
        side = _cross(p, q, s)
        cc = circumcircle(p, q, s)
        if cc is None:
            continue
        c = _C(cc[0][0], cc[0][1], cc[1])
        pos = _cross(p, q, (c.x, c.y))
        if side > 0 and (left is None or pos > _cross(p, q, (left.x, left.y))):
            left = c
        elif side < 0 and (right is None or pos < _cross(p, q, (right.x, right.y))):
            right = c
    if left is None and right is None:
        return base
    if left is None:
        return right
    if right is None:
        return left
    return left if left.r <= right.r else right


def _mec_one(points: list[Point], p: Point) -> _C:
    c = _C(p[0], p[1], 0.0)
    for i, q in enumerate(points):
        if not _inside(c, q):
            c = _diameter(p, q) if c.r == 0.0 else _mec_two(points[: i + 1], p, q)
    return c


def min_enclosing_circle(points: Iterable[Sequence[float]], seed: int = 0) -> Disk:
    """Smallest disk containing every point (randomized incremental construction).

    The insertion order is shuffled with ``seed`` so results are reproducible.
    """
    pts = [(float(p[0]), float(p[1])) for p in points]
    if not pts:
        raise ValueError("min_enclosing_circle needs at least one point")
    if not all(math.isfinite(x) and math.isfinite(y) for x, y in pts):
        raise ValueError("points must be finite")
    random.Random(seed).shuffle(pts)
    c: _C | None = None
    for i, p in enumerate(pts):
        if c is None or not _inside(c, p):
            c = _mec_one(pts[: i + 1], p)
    return Disk((c.x, c.y), c.r)


def circle_intersections(
    c1: Sequence[float], r1: float, c2: Sequence[float], r2: float, tol: float = 0.0
) -> list[Point]:
    """Intersection points of two circles.

    Near-tangent pairs (gap within ``tol``) yield the single tangent point.
    Concentric circles yield nothing.
    """
    dx, dy = c2[0] - c1[0], c2[1] - c1[1]
    d = math.hypot(dx, dy)
    if d == 0.0:
        return []
    if d > r1 + r2 + tol or d < abs(r1 - r2) - tol:
        return []
    a = (r1 * r1 - r2 * r2 + d * d) / (2.0 * d)
    h2 = r1 * r1 - a * a
    ux, uy = dx / d, dy / d
    mx, my = c1[0] + a * ux, c1[1] + a * uy
    if h2 <= 0.0:
        return [(mx, my)]
    h = math.sqrt(h2)
    return [(mx - h * uy, my + h * ux), (mx + h * uy, my - h * ux)]
