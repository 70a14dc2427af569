"""Receding-horizon relay planner.

Every control sequence over the horizon is enumerated and scored with a
running connectivity term (summed over horizon steps) plus a small terminal
distance penalty. Candidate relay positions are rolled out as a tree so each
distinct prefix is evaluated once; leaf ``i`` corresponds to sequence ``i`` of
:func:`uavrelay.mobility.enumerate_control_sequences`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from uavrelay.connectivity import (
    MULTI_HOP,
    SINGLE_HOP,
    R_MIN,
    UncertaintyDisk,
    edge_state_table,
    network_connectivity,
    relay_conditioned_reliability,
    relay_link_probability,
    relay_link_probability_array,
    reliability_from_relay_links,
    single_hop_connectivity,
    tracker_link_probability,
)
from uavrelay.errors import ConfigError
from uavrelay.mobility import ControlInput, RelayState, control_set

SINGLE = "single_hop"
NEAREST = "nearest_point"
MIDPOINT = "midpoint"
HYBRID = "hybrid"
COM = "center_of_mass"
ALGORITHMS = (SINGLE, NEAREST, MIDPOINT, HYBRID, COM)

# scoring topology each algorithm is built for
NATIVE_MODE = {SINGLE: SINGLE_HOP, COM: SINGLE_HOP, NEAREST: MULTI_HOP, MIDPOINT: MULTI_HOP, HYBRID: MULTI_HOP}

MAX_CANDIDATES = 10**6


@dataclass(frozen=True)
class PlannerConfig:
    algorithm: str = HYBRID
    horizon_steps: int = 1
    epsilon: float = 1e-4
    speed_set: tuple[float, ...] = (20.0, 30.0, 40.0)
    delta_set: tuple[float, ...] = (-math.pi / 6, 0.0, math.pi / 6)
    step_dt: float = 2.0
    comm_range: float = 100_000.0
    k_uncertainty: float = 1.0
    quad_tol: float = 1e-8
    r_min: float = R_MIN
    replan_at_refresh_only: bool = False

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}", "algorithm")
        if int(self.horizon_steps) != self.horizon_steps or self.horizon_steps < 0:
            raise ConfigError("must be a non-negative integer", "horizon_steps")
        if not (0.0 < self.epsilon < 1.0):
            raise ConfigError("must satisfy 0 < epsilon < 1", "epsilon")
        if not self.speed_set or min(self.speed_set) <= 0:
            raise ConfigError("must be non-empty and positive", "speed_set")
        if not self.delta_set:
            raise ConfigError("must be non-empty", "delta_set")
        for name in ("step_dt", "comm_range", "quad_tol", "r_min"):
            if not getattr(self, name) > 0:
                raise ConfigError("must be > 0", name)
        if self.k_uncertainty < 0:
            raise ConfigError("must be >= 0", "k_uncertainty")
        object.__setattr__(self, "speed_set", tuple(float(v) for v in self.speed_set))
        object.__setattr__(self, "delta_set", tuple(float(d) for d in self.delta_set))

    @property
    def effective_horizon(self) -> int:
        """Lookahead steps; the no-horizon setting still looks one step ahead."""
        return max(1, int(self.horizon_steps))

    @property
    def theta_max(self) -> float:
        return max(abs(d) for d in self.delta_set)

    @property
    def v_min(self) -> float:
        return min(self.speed_set)

    @property
    def v_max(self) -> float:
        return max(self.speed_set)

    @property
    def n_candidates(self) -> int:
        return (len(self.speed_set) * len(self.delta_set)) ** self.effective_horizon


@dataclass
class Forecast:
    """Estimated tracker disks over the horizon.

    ``centers[j]``/``radii[j]`` describe step ``j + 1`` ahead. ``current``
    holds the estimates at planning time (used for set partitions and the
    centroid baseline). ``pair_probs[j]`` are tracker-tracker link
    probabilities in edge-table order; filled lazily when absent.
    """

    centers: np.ndarray  # (F, N, 2)
    radii: np.ndarray  # (F, N)
    current: np.ndarray  # (N, 2)
    pair_probs: np.ndarray | None = None  # (F, E_tt)

    @property
    def n_trackers(self) -> int:
        return self.centers.shape[1]

    def disks(self, j: int) -> list[UncertaintyDisk]:
        return [UncertaintyDisk((float(c[0]), float(c[1])), float(r)) for c, r in zip(self.centers[j], self.radii[j])]


def build_forecast(means: np.ndarray, elapsed: Sequence[float], cfg: PlannerConfig) -> Forecast:
    """Constant-velocity forecast from filter means ``(N, 6)``.

    ``elapsed[i]`` is the time since tracker ``i``'s last estimate refresh; the
    uncertainty radius grows with it along the horizon.
    """
    means = np.asarray(means, dtype=float)
    F = cfg.effective_horizon
    steps = np.arange(1, F + 1)[:, None, None] * cfg.step_dt
    pos, vel = means[:, :2], means[:, 3:5]
    centers = pos[None, :, :] + vel[None, :, :] * steps
    speed = np.hypot(vel[:, 0], vel[:, 1])
    tau = np.asarray(elapsed, dtype=float)[None, :] + steps[:, :, 0]
    radii = np.maximum(cfg.r_min, cfg.k_uncertainty * speed[None, :] * tau)
    return Forecast(centers, radii, pos.copy())


def tracker_pair_probabilities(centers: np.ndarray, radii: np.ndarray, cfg: PlannerConfig) -> np.ndarray:
    """Tracker-tracker link probabilities for one time step, in edge-table order."""
    n = len(centers)
    out = []
    for a in range(n):
        for b in range(a + 1, n):
            out.append(
                tracker_link_probability(
                    UncertaintyDisk(tuple(centers[a]), float(radii[a])),
                    UncertaintyDisk(tuple(centers[b]), float(radii[b])),
                    cfg.comm_range,
                    cfg.quad_tol,
                )
            )
    return np.array(out)


def _ensure_pair_probs(forecast: Forecast, cfg: PlannerConfig) -> np.ndarray:
    if forecast.pair_probs is None:
        forecast.pair_probs = np.array(
            [tracker_pair_probabilities(forecast.centers[j], forecast.radii[j], cfg) for j in range(len(forecast.centers))]
        )
    return forecast.pair_probs


def partition_far(centers: np.ndarray) -> tuple[int, list[int]]:
    """Split trackers into the one farthest from the rest and everybody else.

    Farthest means the largest sum of distances to the other trackers; the
    lowest index wins ties.
    """
    c = np.asarray(centers, dtype=float)
    n = len(c)
    if n == 1:
        return 0, []
    sums = [sum(math.dist(c[i], c[j]) for j in range(n) if j != i) for i in range(n)]
    k = max(range(n), key=lambda i: (sums[i], -i))
    return k, [i for i in range(n) if i != k]


@dataclass
class PlanDecision:
    algorithm: str
    controls: tuple[ControlInput, ...]
    index: int
    objective: float
    lagrange: float
    mayer: float
    lagrange_terms: np.ndarray = field(repr=False)
    mayer_terms: np.ndarray = field(repr=False)
    branch: str | None = None

    @property
    def first(self) -> ControlInput:
        return self.controls[0]


def _wrap(theta: np.ndarray) -> np.ndarray:
    return np.pi - np.mod(np.pi - theta, 2.0 * np.pi)


def rollout_tree(state: RelayState, cfg: PlannerConfig) -> list[np.ndarray]:
    """Relay positions at each horizon level; level ``j`` has ``C**(j+1)`` rows."""
    ctrls = control_set(cfg.speed_set, cfg.delta_set)
    spd = np.array([u.speed for u in ctrls])
    dlt = np.array([u.heading_delta for u in ctrls])
    C = len(ctrls)
    pos = np.array([state.position], dtype=float)
    head = np.array([state.heading], dtype=float)
    levels = []
    for _ in range(cfg.effective_horizon):
        n = len(head)
        head = _wrap(np.repeat(head, C) + np.tile(dlt, n))
        step = np.tile(spd, n) * cfg.step_dt
        pos = np.repeat(pos, C, axis=0) + np.column_stack([step * np.cos(head), step * np.sin(head)])
        levels.append(pos)
    return levels


def _decode(index: int, cfg: PlannerConfig) -> tuple[ControlInput, ...]:
    ctrls = control_set(cfg.speed_set, cfg.delta_set)
    C = len(ctrls)
    digits = []
    for _ in range(cfg.effective_horizon):
        index, d = divmod(index, C)
        digits.append(ctrls[d])
    return tuple(reversed(digits))


def _check_cap(cfg: PlannerConfig) -> None:
    if cfg.n_candidates > MAX_CANDIDATES:
        raise ConfigError(
            f"{cfg.n_candidates} candidate sequences exceed the cap of {MAX_CANDIDATES}", "horizon_steps"
        )


def _single_products(levels, forecast: Forecast, cfg: PlannerConfig) -> list[np.ndarray]:
    return [
        relay_link_probability_array(pos, forecast.centers[j], forecast.radii[j], cfg.comm_range).prod(axis=1)
        for j, pos in enumerate(levels)
    ]


def _multi_reliability(levels, forecast: Forecast, cfg: PlannerConfig) -> list[np.ndarray]:
    table = edge_state_table(forecast.n_trackers + 1)
    pp = _ensure_pair_probs(forecast, cfg)
    out = []
    for j, pos in enumerate(levels):
        q = relay_link_probability_array(pos, forecast.centers[j], forecast.radii[j], cfg.comm_range)
        out.append(reliability_from_relay_links(q, relay_conditioned_reliability(pp[j], table)))
    return out


def _leaf_distances(leaves: np.ndarray, points: np.ndarray) -> np.ndarray:
    return np.hypot(leaves[:, None, 0] - points[None, :, 0], leaves[:, None, 1] - points[None, :, 1])


def _mayer(algorithm: str, leaves: np.ndarray, forecast: Forecast, cfg: PlannerConfig) -> np.ndarray:
    end = forecast.centers[-1]
    d = _leaf_distances(leaves, end)
    if algorithm == SINGLE:
        worst = d.max(axis=1)
    else:
        k, rest = partition_far(forecast.current)
        if not rest:
            worst = d[:, k]
        elif algorithm == NEAREST:
            worst = np.maximum(d[:, k], d[:, rest].min(axis=1))
        else:
            mean = end[rest].mean(axis=0)
            worst = np.maximum(d[:, k], np.hypot(leaves[:, 0] - mean[0], leaves[:, 1] - mean[1]))
    return -cfg.epsilon * worst / cfg.comm_range


def _decide(algorithm: str, lag: np.ndarray, may: np.ndarray, cfg: PlannerConfig, branch=None) -> PlanDecision:
    total = lag + may
    i = int(np.argmax(total))
    return PlanDecision(
        algorithm, _decode(i, cfg), i, float(total[i]), float(lag[i]), float(may[i]), lag, may, branch
    )


def _tree_sum(per_level: list[np.ndarray], C: int) -> np.ndarray:
    total = np.zeros(1)
    for vals in per_level:
        total = np.repeat(total, C) + vals
    return total


def _tree_min(per_level: list[np.ndarray], C: int) -> np.ndarray:
    low = np.full(1, np.inf)
    for vals in per_level:
        low = np.minimum(np.repeat(low, C), vals)
    return low


def _plan_connectivity(algorithm: str, state: RelayState, forecast: Forecast, cfg: PlannerConfig) -> PlanDecision:
    levels = rollout_tree(state, cfg)
    C = len(cfg.speed_set) * len(cfg.delta_set)
    if algorithm == SINGLE:
        rho = _single_products(levels, forecast, cfg)
    else:
        rho = _multi_reliability(levels, forecast, cfg)
    return _decide(algorithm, _tree_sum(rho, C), _mayer(algorithm, levels[-1], forecast, cfg), cfg)


def plan_hybrid(state: RelayState, forecast: Forecast, cfg: PlannerConfig) -> PlanDecision:
    """Single-hop plan while its best candidate keeps every direct link possible, else midpoint."""
    _check_cap(cfg)
    levels = rollout_tree(state, cfg)
    C = len(cfg.speed_set) * len(cfg.delta_set)
    rho = _single_products(levels, forecast, cfg)
    single = _decide(HYBRID, _tree_sum(rho, C), _mayer(SINGLE, levels[-1], forecast, cfg), cfg, SINGLE)
    if _tree_min(rho, C)[single.index] > 0.0:
        return single
    multi = _multi_reliability(levels, forecast, cfg)
    return _decide(HYBRID, _tree_sum(multi, C), _mayer(MIDPOINT, levels[-1], forecast, cfg), cfg, MIDPOINT)


def plan_center_of_mass(state: RelayState, forecast: Forecast, cfg: PlannerConfig) -> PlanDecision:
    """Greedy pursuit of the current centroid of the tracker estimates."""
    _check_cap(cfg)
    leaves = rollout_tree(state, cfg)[-1]
    target = forecast.current.mean(axis=0)
    dist = np.hypot(leaves[:, 0] - target[0], leaves[:, 1] - target[1])
    return _decide(COM, np.zeros(len(leaves)), -dist, cfg)


def plan(algorithm: str, forecast: Forecast, relay_state: RelayState, cfg: PlannerConfig) -> PlanDecision:
    """Exhaustive receding-horizon search; ties go to the first sequence in enumeration order."""
    _check_cap(cfg)
    if algorithm == HYBRID:
        return plan_hybrid(relay_state, forecast, cfg)
    if algorithm == COM:
        return plan_center_of_mass(relay_state, forecast, cfg)
    if algorithm in (SINGLE, NEAREST, MIDPOINT):
        return _plan_connectivity(algorithm, relay_state, forecast, cfg)
    raise ConfigError(f"unknown algorithm {algorithm!r}", "algorithm")


# Direct, per-candidate objective evaluation. Slow; used to cross-check the
# vectorized search and exposed for analysis.


def _terminal(candidate_states, est_disks):
    end = candidate_states[-1]
    pts = np.array([d.center for d in est_disks[-1]])
    return end, pts, np.hypot(pts[:, 0] - end[0], pts[:, 1] - end[1])


def objective_single_hop(candidate_states, est_disks, cfg: PlannerConfig) -> float:
    """Sum of per-step single-hop probabilities minus the worst terminal distance penalty."""
    lag = sum(single_hop_connectivity(s, disks, cfg.comm_range) for s, disks in zip(candidate_states, est_disks))
    _, _, d = _terminal(candidate_states, est_disks)
    return lag - cfg.epsilon * float(d.max()) / cfg.comm_range


def network_reliability_at(relay_pos, disks, cfg: PlannerConfig) -> float:
    """All-terminal reliability for one relay position, through the full edge-state table."""
    table = edge_state_table(len(disks) + 1)
    probs = []
    for a, b in table.edges:
        if a == 0:
            probs.append(relay_link_probability(relay_pos, disks[b - 1], cfg.comm_range))
        else:
            probs.append(tracker_link_probability(disks[a - 1], disks[b - 1], cfg.comm_range, cfg.quad_tol))
    return network_connectivity(probs, table)


def _multi_objective(candidate_states, est_disks, cfg, partition_centers, use_mean: bool) -> float:
    lag = sum(network_reliability_at(s, disks, cfg) for s, disks in zip(candidate_states, est_disks))
    end, pts, d = _terminal(candidate_states, est_disks)
    if partition_centers is None:
        partition_centers = pts
    k, rest = partition_far(partition_centers)
    if not rest:
        worst = d[k]
    elif use_mean:
        mean = pts[rest].mean(axis=0)
        worst = max(d[k], math.hypot(end[0] - mean[0], end[1] - mean[1]))
    else:
        worst = max(d[k], d[rest].min())
    return lag - cfg.epsilon * float(worst) / cfg.comm_range


def objective_nearest_point(candidate_states, est_disks, cfg: PlannerConfig, partition_centers=None) -> float:
    return _multi_objective(candidate_states, est_disks, cfg, partition_centers, use_mean=False)


def objective_midpoint(candidate_states, est_disks, cfg: PlannerConfig, partition_centers=None) -> float:
    return _multi_objective(candidate_states, est_disks, cfg, partition_centers, use_mean=True)
