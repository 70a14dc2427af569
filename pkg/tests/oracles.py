"""Independent reference implementations used by the tests.

Nothing here calls into the package under test except for plain data types.
"""

import itertools
import math
from collections import deque

import numpy as np


def mc_lens(R, r, d, n, rng):
    """Lens area by rejection sampling in the smaller disk."""
    R, r = max(R, r), min(R, r)
    rho = r * np.sqrt(rng.random(n))
    phi = rng.random(n) * 2 * np.pi
    x = d + rho * np.cos(phi)
    y = rho * np.sin(phi)
    return math.pi * r * r * np.mean(x * x + y * y <= R * R)


def sample_disk(center, radius, n, rng):
    rho = radius * np.sqrt(rng.random(n))
    phi = rng.random(n) * 2 * np.pi
    return np.column_stack([center[0] + rho * np.cos(phi), center[1] + rho * np.sin(phi)])


def mc_average_lens(Rc, r_i, d, r_j, n, rng):
    """Averaged lens area from two independent uniform draws: area_i * P(|X_i - X_j| <= Rc)."""
    a = sample_disk((0.0, 0.0), r_i, n, rng)
    b = sample_disk((d, 0.0), r_j, n, rng)
    diff = a - b
    return math.pi * r_i**2 * np.mean(diff[:, 0] ** 2 + diff[:, 1] ** 2 <= Rc * Rc)


def circumcircle(a, b, c):
    ax, ay = a
    bx, by = b
    cx, cy = c
    d = 2 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if abs(d) < 1e-12 * max(1.0, max(abs(v) for v in (*a, *b, *c))) ** 2:
        return None
    ux = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay) + (cx * cx + cy * cy) * (ay - by)) / d
    uy = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx) + (cx * cx + cy * cy) * (bx - ax)) / d
    return (ux, uy), math.dist((ux, uy), a)


def brute_mec_radius(pts):
    """O(n^4) smallest enclosing circle: best of all pair and triple circles that enclose every point."""
    if len(pts) == 1:
        return 0.0
    best = math.inf
    cands = []
    for a, b in itertools.combinations(pts, 2):
        cands.append((((a[0] + b[0]) / 2, (a[1] + b[1]) / 2), math.dist(a, b) / 2))
    for a, b, c in itertools.combinations(pts, 3):
        cc = circumcircle(a, b, c)
        if cc is not None:
            cands.append(cc)
    for center, r in cands:
        if r < best and all(math.dist(center, p) <= r * (1 + 1e-12) + 1e-9 for p in pts):
            best = r
    return best


def bfs_connected(n, edges):
    adj = {i: set() for i in range(n)}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    seen = {0}
    queue = deque([0])
    while queue:
        for b in adj[queue.popleft()]:
            if b not in seen:
                seen.add(b)
                queue.append(b)
    return len(seen) == n


def _components(pts, R):
    n = len(pts)
    comps = []
    seen = set()
    for s in range(n):
        if s in seen:
            continue
        comp, queue = [s], deque([s])
        seen.add(s)
        while queue:
            a = queue.popleft()
            for b in range(n):
                if b not in seen and math.dist(pts[a], pts[b]) <= R:
                    seen.add(b)
                    comp.append(b)
                    queue.append(b)
        comps.append(comp)
    return comps


def _lattice_in_box(lo, hi, step):
    if np.any(hi < lo):
        return np.empty((0, 2))
    xs = np.arange(math.ceil(lo[0] / step), math.floor(hi[0] / step) + 1) * step
    ys = np.arange(math.ceil(lo[1] / step), math.floor(hi[1] / step) + 1) * step
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


def _search(pts, groups, R, step):
    """Whether a lattice point lies within ``R`` of some member of every group."""
    lo = np.max([pts[g].min(axis=0) - R for g in groups], axis=0)
    hi = np.min([pts[g].max(axis=0) + R for g in groups], axis=0)
    grid = _lattice_in_box(lo, hi, step)
    if not len(grid):
        return False
    dx = grid[:, None, 0] - pts[None, :, 0]
    dy = grid[:, None, 1] - pts[None, :, 1]
    near = dx * dx + dy * dy <= R * R
    return bool(np.any(np.all(np.stack([near[:, g].any(axis=1) for g in groups], axis=1), axis=1)))


def grid_feasibility(pts, R, pitch_frac=1 / 200):
    """Grid-search feasibility at radius ``R``: (single_hop, multi_hop).

    Relay positions are searched on a global lattice of pitch ``R * pitch_frac``,
    restricted to the bounding box that any useful placement must lie in.
    """
    pts = np.asarray(pts, dtype=float)
    step = R * pitch_frac
    single = _search(pts, [[i] for i in range(len(pts))], R, step)
    comps = _components([tuple(p) for p in pts], R)
    if single or len(comps) == 1:
        return single, True
    return single, _search(pts, comps, R, step)


def grid_verdict(pts, R, margin=1 / 100):
    """Oracle verdict at ``R`` or None when the case lies within ``margin * R`` of a threshold.

    Feasible on the lattice at ``(1 - margin) R`` proves feasibility at ``R``
    (the lattice is finer than the margin); infeasible on the lattice at
    ``(1 + margin) R`` proves the opposite.
    """
    lo = grid_feasibility(pts, R * (1 - margin))
    hi = grid_feasibility(pts, R * (1 + margin))
    out = []
    for a, b in zip(lo, hi):
        if a:
            out.append(True)
        elif not b:
            out.append(False)
        else:
            out.append(None)
    return tuple(out)


def integrate_sqrt_endpoints(f, a, b, n=400):
    """Gauss-Legendre after x = a + (b - a)(1 - cos t)/2, which smooths square-root endpoint behaviour."""
    t, w = np.polynomial.legendre.leggauss(n)
    theta = 0.5 * np.pi * (t + 1.0)
    x = a + 0.5 * (b - a) * (1.0 - np.cos(theta))
    jac = 0.5 * (b - a) * np.sin(theta) * 0.5 * np.pi
    return float(sum(wi * f(xi) * ji for wi, xi, ji in zip(w, x, jac)))
