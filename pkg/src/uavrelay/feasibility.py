"""Geometric upper bound on network lifetime.

For exact tracker positions, decide whether *any* relay placement yields a
connected single-hop (star) or multi-hop topology. Thresholds are closed:
distances within ``1e-9 * R`` of a limit count as feasible.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from uavrelay.connectivity import MULTI_HOP, SINGLE_HOP
from uavrelay.geometry import circle_intersections, min_enclosing_circle

REL_TOL = 1e-9


@dataclass(frozen=True)
class FeasibilityVerdict:
    single_hop_feasible: bool
    multi_hop_feasible: bool
    witness_point: tuple[float, float] | None = None


def _points(positions) -> list[tuple[float, float]]:
    pts = [(float(p[0]), float(p[1])) for p in positions]
    if not pts:
        raise ValueError("need at least one tracker position")
    return pts


def _check_R(R: float) -> None:
    if not math.isfinite(R) or R <= 0:
        raise ValueError(f"R must be > 0, got {R}")


def single_hop_feasible(true_positions, R: float) -> FeasibilityVerdict:
    """Some point lies within ``R`` of every tracker iff the enclosing circle fits in ``R``."""
    _check_R(R)
    pts = _points(true_positions)
    ok = _single_ok(pts, R)
    # a star topology is also a connected multi-hop topology
    multi = True if ok else _multi_hop_generic(pts, R)[0]
    return FeasibilityVerdict(ok, multi, min_enclosing_circle(pts).center if ok else None)


def _single_ok(pts: list[tuple[float, float]], R: float) -> bool:
    return min_enclosing_circle(pts).radius <= R * (1.0 + REL_TOL)


def tracker_components(points: Sequence[tuple[float, float]], R: float) -> list[list[int]]:
    """Connected components of the tracker-only disk graph, ordered by smallest member."""
    n = len(points)
    limit = R * (1.0 + REL_TOL)
    seen = [False] * n
    comps = []
    for s in range(n):
        if seen[s]:
            continue
        stack, comp = [s], []
        seen[s] = True
        while stack:
            a = stack.pop()
            comp.append(a)
            for b in range(n):
                if not seen[b] and math.dist(points[a], points[b]) <= limit:
                    seen[b] = True
                    stack.append(b)
        comps.append(sorted(comp))
    return comps


def _multi_hop_generic(pts: list[tuple[float, float]], R: float) -> tuple[bool, tuple[float, float] | None]:
    comps = tracker_components(pts, R)
    if len(comps) == 1:
        return True, pts[0]
    limit = R * (1.0 + REL_TOL)

    def reaches_all(x: tuple[float, float]) -> bool:
        return all(any(math.dist(x, pts[i]) <= limit for i in comp) for comp in comps)

    # the feasible set is an intersection of unions of disks; when non-empty
    # it contains a disk center or a pairwise boundary intersection point
    candidates = list(pts)
    for a, b in itertools.combinations(range(len(pts)), 2):
        candidates.extend(circle_intersections(pts[a], R, pts[b], R, tol=R * REL_TOL))
    for x in candidates:
        if reaches_all(x):
            return True, x
    return False, None


def _multi_hop_three(pts: list[tuple[float, float]], R: float) -> tuple[bool, tuple[float, float] | None]:
    limit = R * (1.0 + REL_TOL)
    pairs = sorted(itertools.combinations(range(3), 2), key=lambda ab: (math.dist(pts[ab[0]], pts[ab[1]]), ab))
    linked = [ab for ab in pairs if math.dist(pts[ab[0]], pts[ab[1]]) <= limit]
    if len(linked) >= 2:
        # already connected through the trackers; any point near a tracker works
        return True, pts[0]
    if len(linked) == 1:
        a, b = linked[0]
        (c,) = {0, 1, 2} - {a, b}
        da, db = math.dist(pts[a], pts[c]), math.dist(pts[b], pts[c])
        near = a if da <= db else b
        if min(da, db) <= 2.0 * limit:
            p, q = pts[near], pts[c]
            return True, ((p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0)
        return False, None
    mec = min_enclosing_circle(pts)
    if mec.radius <= limit:
        return True, mec.center
    return False, None


def multi_hop_feasible(true_positions, R: float, method: str = "auto") -> FeasibilityVerdict:
    """Whether some relay position connects the relay plus all trackers.

    ``method`` is ``"casework"`` (three trackers only), ``"generic"`` or
    ``"auto"`` (casework for three trackers).
    """
    _check_R(R)
    pts = _points(true_positions)
    if method == "auto":
        method = "casework" if len(pts) == 3 else "generic"
    if method == "casework":
        if len(pts) != 3:
            raise ValueError("casework applies to exactly three trackers")
        ok, w = _multi_hop_three(pts, R)
    elif method == "generic":
        ok, w = _multi_hop_generic(pts, R)
    else:
        raise ValueError(f"unknown method {method!r}")
    return FeasibilityVerdict(ok and _single_ok(pts, R), ok, w)


def feasible(true_positions, R: float, mode: str) -> bool:
    if mode == SINGLE_HOP:
        _check_R(R)
        return _single_ok(_points(true_positions), R)
    if mode == MULTI_HOP:
        return multi_hop_feasible(true_positions, R).multi_hop_feasible
    raise ValueError(f"unknown mode {mode!r}")


def max_lifetime(position_trace, R: float, mode: str, step_dt: float) -> float:
    """Seconds during which a connecting relay placement exists (feasible steps times ``step_dt``)."""
    trace = list(position_trace)
    if not trace:
        raise ValueError("position trace is empty")
    return sum(feasible(pts, R, mode) for pts in trace) * step_dt


def feasibility_flags(position_trace, R: float) -> np.ndarray:
    """Per-step ``(single_hop, multi_hop)`` feasibility, shape ``(T, 2)``."""
    out = []
    for pts in position_trace:
        m = multi_hop_feasible(pts, R)
        out.append((m.single_hop_feasible, m.multi_hop_feasible))
    return np.array(out, dtype=bool).reshape(-1, 2)
