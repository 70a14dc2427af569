"""Link probabilities under position uncertainty and network reliability.

Node 0 is always the relay; trackers are nodes ``1..N-1``. Edges are ordered
as ``itertools.combinations(range(N), 2)``, so the relay edges come first.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from uavrelay.geometry import Disk, average_lens_area, lens_area, lens_area_array

SINGLE_HOP = "single_hop"
MULTI_HOP = "multi_hop"
MODES = (SINGLE_HOP, MULTI_HOP)

MAX_NODES = 6
R_MIN = 1.0


class UncertaintyDisk(Disk):
    """Estimated tracker position with a strictly positive uncertainty radius."""

    def __post_init__(self):
        super().__post_init__()
        if self.radius <= 0:
            raise ValueError(f"uncertainty radius must be > 0, got {self.radius}")


def uncertainty_radius(speed: float, elapsed: float, k: float = 1.0, r_min: float = R_MIN) -> float:
    """``k * speed * elapsed`` floored at ``r_min``."""
    return max(r_min, k * speed * elapsed)


def relay_link_probability(relay_pos: Sequence[float], disk: Disk, R: float) -> float:
    """Chance that a tracker uniformly placed in ``disk`` is within ``R`` of the relay."""
    if not math.isfinite(R) or R <= 0:
        raise ValueError(f"R must be > 0, got {R}")
    r = disk.radius
    if r <= 0:
        raise ValueError("uncertainty disk radius must be > 0")
    d = math.hypot(relay_pos[0] - disk.center[0], relay_pos[1] - disk.center[1])
    if d >= R + r:
        return 0.0
    return min(1.0, max(0.0, lens_area(R, r, d) / (math.pi * r * r)))


def relay_link_probability_array(relay_xy: np.ndarray, centers: np.ndarray, radii: np.ndarray, R: float) -> np.ndarray:
    """Relay-to-tracker probabilities for ``M`` relay positions and ``N`` trackers, shape ``(M, N)``."""
    relay_xy = np.asarray(relay_xy, dtype=float).reshape(-1, 2)
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    radii = np.asarray(radii, dtype=float)
    d = np.hypot(relay_xy[:, None, 0] - centers[None, :, 0], relay_xy[:, None, 1] - centers[None, :, 1])
    area = lens_area_array(R, radii[None, :], d)
    return np.clip(area / (np.pi * radii[None, :] ** 2), 0.0, 1.0)


def tracker_link_probability(
    disk_i: Disk, disk_j: Disk, Rc: float, quad_tol: float = 1e-8
) -> float:
    """Chance that two trackers, each uniform in its disk, are within ``Rc``.

    Evaluated as the average lens area over drone j's distance density,
    normalized by drone i's disk area. The quantity is symmetric in ``i, j``.
    """
    if not math.isfinite(Rc) or Rc <= 0:
        raise ValueError(f"Rc must be > 0, got {Rc}")
    d = math.hypot(disk_i.center[0] - disk_j.center[0], disk_i.center[1] - disk_j.center[1])
    if d >= Rc + disk_i.radius + disk_j.radius:
        return 0.0
    area = average_lens_area(Rc, disk_i.radius, d, disk_j.radius, quad_tol)
    return min(1.0, max(0.0, area / (math.pi * disk_i.radius**2)))


def single_hop_connectivity(relay_pos: Sequence[float], disks: Sequence[Disk], R: float) -> float:
    """Probability that every tracker links directly to the relay (independent links)."""
    if not disks:
        raise ValueError("need at least one tracker disk")
    p = 1.0
    for disk in disks:
        p *= relay_link_probability(relay_pos, disk, R)
    return p


class _DSU:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _connected(n: int, edges: Sequence[tuple[int, int]]) -> bool:
    dsu = _DSU(n)
    for a, b in edges:
        dsu.union(a, b)
    root = dsu.find(0)
    return all(dsu.find(i) == root for i in range(n))


@dataclass(frozen=True)
class EdgeStateTable:
    """Every edge-presence configuration of the complete graph on ``n_nodes``.

    Row ``s`` has edge ``e`` present iff bit ``e`` of ``s`` is set.
    """

    n_nodes: int
    edges: tuple[tuple[int, int], ...]
    present: np.ndarray  # (2**E, E) bool
    connected: np.ndarray  # (2**E,) bool

    @property
    def n_edges(self) -> int:
        return len(self.edges)


@lru_cache(maxsize=None)
def edge_state_table(n_nodes: int) -> EdgeStateTable:
    if not (1 <= n_nodes <= MAX_NODES):
        raise ValueError(f"exact enumeration supports 1..{MAX_NODES} nodes, got {n_nodes}")
    edges = tuple(itertools.combinations(range(n_nodes), 2))
    E = len(edges)
    rows = np.arange(2**E)
    present = ((rows[:, None] >> np.arange(E)[None, :]) & 1).astype(bool)
    connected = np.array(
        [_connected(n_nodes, [edges[e] for e in range(E) if row[e]]) for row in present], dtype=bool
    )
    present.setflags(write=False)
    connected.setflags(write=False)
    return EdgeStateTable(n_nodes, edges, present, connected)


def network_connectivity(edge_probs: Sequence[float], table: EdgeStateTable) -> float:
    """All-terminal reliability: probability the random graph is connected."""
    p = np.asarray(edge_probs, dtype=float)
    if p.shape != (table.n_edges,):
        raise ValueError(f"expected {table.n_edges} edge probabilities, got {p.shape}")
    if np.any(p < 0) or np.any(p > 1) or not np.all(np.isfinite(p)):
        raise ValueError("edge probabilities must lie in [0, 1]")
    weights = np.where(table.present, p[None, :], 1.0 - p[None, :]).prod(axis=1)
    return float(min(1.0, max(0.0, weights[table.connected].sum())))


def relay_conditioned_reliability(tracker_probs: Sequence[float], table: EdgeStateTable) -> np.ndarray:
    """Reliability conditioned on each relay-edge pattern, shape ``(2**(N-1),)``.

    Entry ``a`` is the probability the graph is connected given relay edges
    present exactly as the bits of ``a``. Combine with
    :func:`reliability_from_relay_links` to evaluate many relay positions
    against fixed tracker-tracker probabilities.
    """
    n_t = table.n_nodes - 1
    p = np.asarray(tracker_probs, dtype=float)
    E_tt = table.n_edges - n_t
    if p.shape != (E_tt,):
        raise ValueError(f"expected {E_tt} tracker-pair probabilities, got {p.shape}")
    tt_present = table.present[:: 2**n_t, n_t:]  # rows with no relay edges enumerate tracker configs
    w_tt = np.where(tt_present, p[None, :], 1.0 - p[None, :]).prod(axis=1)
    flags = table.connected.reshape(2**E_tt, 2**n_t).astype(float)
    return w_tt @ flags


def reliability_from_relay_links(relay_probs: np.ndarray, conditioned: np.ndarray) -> np.ndarray:
    """Reliability for a batch of relay-edge probability rows ``(M, N-1)``."""
    q = np.atleast_2d(np.asarray(relay_probs, dtype=float))
    n_t = q.shape[1]
    out = np.zeros(q.shape[0])
    for a in range(2**n_t):
        w = np.ones(q.shape[0])
        for i in range(n_t):
            w = w * (q[:, i] if (a >> i) & 1 else 1.0 - q[:, i])
        out += w * conditioned[a]
    return np.clip(out, 0.0, 1.0)


def ground_truth_connected(
    true_positions: Sequence[Sequence[float]], relay_pos: Sequence[float], R: float, mode: str
) -> bool:
    """Disk-model connectivity on exact positions."""
    if R <= 0:
        raise ValueError(f"R must be > 0, got {R}")
    pts = [(float(relay_pos[0]), float(relay_pos[1]))] + [(float(p[0]), float(p[1])) for p in true_positions]
    if mode == SINGLE_HOP:
        rx, ry = pts[0]
        return all(math.hypot(x - rx, y - ry) <= R for x, y in pts[1:])
    if mode == MULTI_HOP:
        edges = [
            (a, b)
            for a, b in itertools.combinations(range(len(pts)), 2)
            if math.hypot(pts[a][0] - pts[b][0], pts[a][1] - pts[b][1]) <= R
        ]
        return _connected(len(pts), edges)
    raise ValueError(f"unknown mode {mode!r}")
