"""Simulation loop, scoring and Monte Carlo aggregation.

Truth, measurements and the relay's tracker estimates do not depend on the
relay's own trajectory, so they are computed once per scenario (a
:class:`World`) and shared by every planner run on that scenario.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from uavrelay.connectivity import MODES, MULTI_HOP, SINGLE_HOP, ground_truth_connected
from uavrelay.errors import ConfigError
from uavrelay.estimator import (
    FilterConfig,
    initial_state,
    measurement_noise,
    predict,
    process_noise,
    synthesize_measurement,
    transition_matrix,
    update,
)
from uavrelay.feasibility import multi_hop_feasible
from uavrelay.mobility import ControlInput, step_relay, tracker_position, tracker_track
from uavrelay.planner import (
    COM,
    NATIVE_MODE,
    Forecast,
    PlannerConfig,
    build_forecast,
    plan,
    tracker_pair_probabilities,
)
from uavrelay.scenario import Scenario, ScenarioConfig, from_dict, materialize, seed_streams, to_dict

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MULTI_HOP_ALGORITHMS = ("nearest_point", "midpoint", "hybrid")


@dataclass
class World:
    """Planner-independent part of a run.

    Arrays are indexed by step; tracker arrays are ``(T, N, 4)`` holding
    ``x, y, vx, vy``.
    """

    time: np.ndarray
    truth: np.ndarray
    estimate: np.ndarray
    elapsed: np.ndarray  # time since last estimate refresh, (T,)
    refresh: np.ndarray  # bool (T,)
    feasible: np.ndarray  # bool (T, 2): single-hop, multi-hop
    comm_range: float
    step_dt: float
    _pair_cache: dict | None = None

    @property
    def n_steps(self) -> int:
        return len(self.time)

    def pair_probs(
        self, now: int, target: int, centers: np.ndarray, radii: np.ndarray, cfg: PlannerConfig
    ) -> np.ndarray:
        """Tracker-pair probabilities for step ``target`` as forecast at step ``now``.

        Forecasts made after the same refresh agree on every future step, so
        results are shared across planning steps and planner runs.
        """
        if self._pair_cache is None:
            self._pair_cache = {}
        epoch = now - int(round(self.elapsed[now] / self.step_dt))
        key = (epoch, target, cfg.k_uncertainty, cfg.r_min, cfg.quad_tol, cfg.comm_range)
        hit = self._pair_cache.get(key)
        if hit is None:
            hit = tracker_pair_probabilities(centers, radii, cfg)
            self._pair_cache[key] = hit
        return hit


def build_world(scenario: Scenario, noise_cfg: FilterConfig | None = None) -> World:
    cfg = scenario.config
    fcfg = noise_cfg or cfg.filter_config()
    _, noise_rng = seed_streams(cfg.seed)
    T, N = cfg.n_steps, cfg.n_trackers
    every = cfg.refresh_every
    time = np.arange(T) * cfg.step_dt_s
    truth = np.zeros((T, N, 4))
    est = np.zeros((T, N, 4))
    elapsed = np.zeros(T)
    refresh = np.zeros(T, dtype=bool)
    feas = np.zeros((T, 2), dtype=bool)
    filters = [None] * N
    last = 0.0
    for k in range(T):
        t = float(time[k])
        states = [tracker_position(p, t) for p in scenario.plans]
        if k % every == 0:
            refresh[k] = True
            last = t
            for i, s in enumerate(states):
                z = synthesize_measurement(s, fcfg, noise_rng)
                filters[i] = initial_state(z, fcfg) if filters[i] is None else update(predict(filters[i], None, fcfg), z, fcfg)
        else:
            filters = [predict(f, None, fcfg) for f in filters]
        elapsed[k] = t - last
        for i, (s, f) in enumerate(zip(states, filters)):
            truth[k, i] = (s.position[0], s.position[1], s.velocity[0], s.velocity[1])
            est[k, i] = (f.mean[0], f.mean[1], f.mean[3], f.mean[4])
        v = multi_hop_feasible(truth[k, :, :2], cfg.comm_range_m)
        feas[k] = (v.single_hop_feasible, v.multi_hop_feasible)
    return World(time, truth, est, elapsed, refresh, feas, cfg.comm_range_m, cfg.step_dt_s)


@dataclass
class SimulationTrace:
    algorithm: str
    horizon_steps: int
    seed: int
    comm_range: float
    step_dt: float
    world: World
    relay: np.ndarray  # (T, 4): x, y, heading, speed at each step
    control: np.ndarray  # (T, 2): applied speed, heading change
    objective: np.ndarray  # (T,)
    branch: list[str]
    connected: np.ndarray  # bool (T, 2): single-hop, multi-hop

    @property
    def n_steps(self) -> int:
        return len(self.relay)

    @property
    def radii(self) -> np.ndarray:
        return _radii(self.world, self.k_uncertainty, self.r_min)

    k_uncertainty: float = 1.0
    r_min: float = 1.0


def _radii(world: World, k: float, r_min: float) -> np.ndarray:
    speed = np.hypot(world.estimate[:, :, 2], world.estimate[:, :, 3])
    return np.maximum(r_min, k * speed * world.elapsed[:, None])


def run(
    scenario: Scenario,
    planner_cfg: PlannerConfig | None = None,
    noise_cfg: FilterConfig | None = None,
    world: World | None = None,
) -> SimulationTrace:
    """Fly the relay through the scenario under one planner configuration."""
    cfg = scenario.config
    pcfg = planner_cfg or cfg.planner_config()
    if world is None:
        world = build_world(scenario, noise_cfg)
    R = pcfg.comm_range
    if R != world.comm_range:
        raise ConfigError("planner comm_range differs from the scenario's", "comm_range")
    needs_pairs = pcfg.algorithm in MULTI_HOP_ALGORITHMS
    T = world.n_steps
    relay = scenario.relay_initial
    relay_log = np.zeros((T, 4))
    control_log = np.zeros((T, 2))
    objective = np.zeros(T)
    branch: list[str] = []
    connected = np.zeros((T, 2), dtype=bool)
    pending: list[ControlInput] = []
    for k in range(T):
        truth_xy = world.truth[k, :, :2]
        relay_log[k] = (relay.position[0], relay.position[1], relay.heading, relay.speed)
        connected[k] = [ground_truth_connected(truth_xy, relay.position, R, m) for m in MODES]

        replan = not pcfg.replan_at_refresh_only or world.refresh[k] or not pending
        if replan:
            forecast = build_forecast(
                np.column_stack(
                    [world.estimate[k, :, :2], np.zeros(cfg.n_trackers), world.estimate[k, :, 2:4], np.zeros(cfg.n_trackers)]
                ),
                np.full(cfg.n_trackers, world.elapsed[k]),
                pcfg,
            )
            if needs_pairs:
                forecast.pair_probs = np.array(
                    [
                        world.pair_probs(k, k + j + 1, forecast.centers[j], forecast.radii[j], pcfg)
                        for j in range(len(forecast.centers))
                    ]
                )
            try:
                decision = plan(pcfg.algorithm, forecast, relay, pcfg)
            except ConfigError as exc:
                raise ConfigError(f"step {k}: {exc}", exc.field) from None
            pending = list(decision.controls)
            objective[k] = decision.objective
            branch.append(decision.branch or pcfg.algorithm)
        else:
            objective[k] = math.nan
            branch.append("hold")
        u = pending.pop(0) if pending else ControlInput(relay.speed, 0.0)
        control_log[k] = (u.speed, u.heading_delta)
        relay = step_relay(relay, u, pcfg.step_dt, pcfg.theta_max, pcfg.v_min, pcfg.v_max)
        if k % 500 == 0:
            log.debug("planned", extra={"step": k})
    return SimulationTrace(
        pcfg.algorithm,
        pcfg.horizon_steps,
        cfg.seed,
        R,
        pcfg.step_dt,
        world,
        relay_log,
        control_log,
        objective,
        branch,
        connected,
        pcfg.k_uncertainty,
        pcfg.r_min,
    )


@dataclass(frozen=True)
class RunMetrics:
    connectivity_duration: float  # minutes
    max_lifetime: float  # minutes
    relative_connectivity: float
    rmse_position: float  # m
    rmse_velocity: float  # m/s


def relative_connectivity(duration: float, lifetime: float) -> float:
    if lifetime > 0:
        return duration / lifetime
    return 1.0 if duration == 0 else math.nan


def estimate_rmse(world: World) -> tuple[float, float]:
    err = world.estimate - world.truth
    pos = math.sqrt(float(np.mean(np.sum(err[:, :, :2] ** 2, axis=2))))
    vel = math.sqrt(float(np.mean(np.sum(err[:, :, 2:] ** 2, axis=2))))
    return pos, vel


def score(trace: SimulationTrace, mode: str) -> RunMetrics:
    col = MODES.index(mode)
    dt_min = trace.step_dt / 60.0
    duration = int(trace.connected[:, col].sum()) * dt_min
    lifetime = int(trace.world.feasible[:, col].sum()) * dt_min
    pos, vel = estimate_rmse(trace.world)
    return RunMetrics(duration, lifetime, relative_connectivity(duration, lifetime), pos, vel)


def metrics_dict(trace: SimulationTrace) -> dict:
    native = NATIVE_MODE[trace.algorithm]
    return {
        "schema_version": SCHEMA_VERSION,
        "algorithm": trace.algorithm,
        "horizon_steps": trace.horizon_steps,
        "seed": trace.seed,
        "comm_range_m": trace.comm_range,
        "step_dt_s": trace.step_dt,
        "n_steps": trace.n_steps,
        "native_mode": native,
        "native": asdict(score(trace, native)),
        SINGLE_HOP: asdict(score(trace, SINGLE_HOP)),
        MULTI_HOP: asdict(score(trace, MULTI_HOP)),
    }


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _f(x: float) -> str:
    return format(float(x), ".9g")


def trace_columns(n_trackers: int) -> list[str]:
    cols = ["step", "time_s"]
    for i in range(1, n_trackers + 1):
        cols += [f"true_x_{i}", f"true_y_{i}", f"true_vx_{i}", f"true_vy_{i}"]
        cols += [f"est_x_{i}", f"est_y_{i}", f"est_vx_{i}", f"est_vy_{i}", f"radius_{i}"]
    cols += [
        "relay_x",
        "relay_y",
        "relay_heading_rad",
        "relay_speed",
        "control_speed",
        "control_delta_rad",
        "objective",
        "branch",
        "connected_single_hop",
        "connected_multi_hop",
        "feasible_single_hop",
        "feasible_multi_hop",
    ]
    return cols


def trace_csv(trace: SimulationTrace) -> str:
    w = trace.world
    N = w.truth.shape[1]
    radii = trace.radii
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(trace_columns(N))
    for k in range(trace.n_steps):
        row = [str(k), _f(w.time[k])]
        for i in range(N):
            row += [_f(v) for v in w.truth[k, i]]
            row += [_f(v) for v in w.estimate[k, i]]
            row.append(_f(radii[k, i]))
        row += [_f(v) for v in trace.relay[k]]
        row += [_f(v) for v in trace.control[k]]
        row.append(_f(trace.objective[k]))
        row.append(trace.branch[k])
        row += [str(int(b)) for b in trace.connected[k]]
        row += [str(int(b)) for b in w.feasible[k]]
        out.writerow(row)
    return buf.getvalue()


def write_outputs(trace: SimulationTrace, out_dir) -> None:
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trace.csv").write_text(trace_csv(trace))
    (out / "metrics.json").write_text(dumps_json(metrics_dict(trace)))


# Monte Carlo ---------------------------------------------------------------


def _world_key(d: dict) -> str:
    base = dict(d)
    base.pop("planner")
    return json.dumps(base, sort_keys=True)


def _cell_error(d: dict, exc: Exception) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "algorithm": d["planner"]["algorithm"],
        "horizon_steps": d["planner"]["horizon_steps"],
        "seed": d["seed"],
        "comm_range_m": d["comm_range_m"],
        "error": f"{type(exc).__name__}: {exc}",
    }


def run_group(config_dicts: Sequence[dict]) -> list[dict]:
    """Run configs that share a world (same scenario fields, different planners).

    A failing cell yields an entry with an ``error`` field instead of metrics.
    """
    if any(_world_key(d) != _world_key(config_dicts[0]) for d in config_dicts):
        raise ValueError("configs in a group must share scenario fields")
    try:
        scenario = materialize(from_dict(config_dicts[0]))
        world = build_world(scenario)
    except Exception as exc:  # noqa: BLE001 - reported per cell
        return [_cell_error(d, exc) for d in config_dicts]
    out = []
    for d in config_dicts:
        try:
            trace = run(scenario, from_dict(d).planner_config(), world=world)
            out.append(metrics_dict(trace))
        except Exception as exc:  # noqa: BLE001
            log.error("cell failed: %s", exc, extra={"step": "-"})
            out.append(_cell_error(d, exc))
    return out


def run_cells(configs: Sequence[ScenarioConfig], jobs: int = 1) -> list[dict]:
    """Metrics for each config, in input order, regardless of ``jobs``."""
    dicts = [to_dict(c) for c in configs]
    groups: dict[str, list[int]] = {}
    for idx, d in enumerate(dicts):
        groups.setdefault(_world_key(d), []).append(idx)
    batches = list(groups.values())
    payloads = [[dicts[i] for i in b] for b in batches]
    if jobs > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_group, payloads))
    else:
        results = [run_group(p) for p in payloads]
    out: list[dict | None] = [None] * len(dicts)
    for batch, res in zip(batches, results):
        for i, m in zip(batch, res):
            out[i] = m
    return out  # type: ignore[return-value]


def summarize(values: Iterable[float]) -> dict:
    a = np.array(sorted(values), dtype=float)
    q1, med, q3 = np.quantile(a, [0.25, 0.5, 0.75])
    return {
        "n": int(a.size),
        "mean": float(a.mean()),
        "median": float(med),
        "q1": float(q1),
        "q3": float(q3),
        "min": float(a.min()),
        "max": float(a.max()),
    }


def aggregate(cell_metrics: Sequence[dict]) -> list[dict]:
    """Per (algorithm, horizon, comm range) distribution of native-mode metrics."""
    groups: dict[tuple, list[dict]] = {}
    for m in cell_metrics:
        if "error" in m:
            continue
        key = (m["algorithm"], m["horizon_steps"], m["comm_range_m"])
        groups.setdefault(key, []).append(m)
    rows = []
    for key in sorted(groups, key=lambda k: (k[2], k[0], k[1])):
        ms = sorted(groups[key], key=lambda m: m["seed"])
        rows.append(
            {
                "algorithm": key[0],
                "horizon_steps": key[1],
                "comm_range_m": key[2],
                "native_mode": ms[0]["native_mode"],
                "connectivity_min": summarize(m["native"]["connectivity_duration"] for m in ms),
                "max_lifetime_min": summarize(m["native"]["max_lifetime"] for m in ms),
                "relative_connectivity": summarize(m["native"]["relative_connectivity"] for m in ms),
                "paper_relative_target": PAPER_RELATIVE_TARGET.get(key[0]),
            }
        )
    return rows


PAPER_RELATIVE_TARGET = {"nearest_point": 0.90, "midpoint": 0.90, "hybrid": 0.95}


def monte_carlo(configs: Sequence[ScenarioConfig], M: int, parallelism: int = 1) -> dict:
    """Run each config over seeds ``seed .. seed + M - 1`` and aggregate."""
    if M < 1:
        raise ValueError("M must be >= 1")
    cells = [c.replace(seed=c.seed + m) for c in configs for m in range(M)]
    metrics = run_cells(cells, parallelism)
    return {"schema_version": SCHEMA_VERSION, "cells": metrics, "aggregate": aggregate(metrics)}


# Estimator study -----------------------------------------------------------


def rmse_study(config: ScenarioConfig, M: int, noise_cfg: FilterConfig | None = None) -> dict:
    """Per-step RMSE of the tracker filter across ``M`` seeded runs.

    Every tracker is measured and filtered at each step (zero control input,
    as on the relay). The covariance recursion does not depend on the data,
    so one gain sequence serves every track and the tracks run as a batch.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    fcfg = noise_cfg or config.filter_config()
    T, dt = config.n_steps, config.step_dt_s
    times = np.arange(T) * dt
    sig = np.concatenate([fcfg.sigma_gps, fcfg.sigma_vel])
    truth = []
    meas = []
    for m in range(M):
        cfg = config.replace(seed=config.seed + m)
        scenario = materialize(cfg)
        _, noise_rng = seed_streams(cfg.seed)
        x = np.stack([np.hstack(tracker_track(p, times)) for p in scenario.plans], axis=1)  # (T, N, 6)
        truth.append(x)
        meas.append(x + noise_rng.standard_normal(x.shape) * sig)
    truth_a = np.concatenate(truth, axis=1)  # (T, B, 6)
    z = np.concatenate(meas, axis=1)
    B = truth_a.shape[1]

    F = transition_matrix(dt)
    Q = process_noise(dt, fcfg.sigma_acc)
    Rm = measurement_noise(fcfg)
    I6 = np.eye(6)
    mean = z[0].copy()
    P = Rm.copy()
    sq_pos = np.zeros(T)
    sq_vel = np.zeros(T)
    for k in range(T):
        if k:
            mean = mean @ F.T
            P = F @ P @ F.T + Q
            K = np.linalg.solve(P + Rm, P).T
            mean = mean + (z[k] - mean) @ K.T
            A = I6 - K
            P = A @ P @ A.T + K @ Rm @ K.T
            P = 0.5 * (P + P.T)
        e = mean - truth_a[k]
        sq_pos[k] = np.sum(e[:, 0] ** 2 + e[:, 1] ** 2)
        sq_vel[k] = np.sum(e[:, 3] ** 2 + e[:, 4] ** 2)
    pos = np.sqrt(sq_pos / B)
    vel = np.sqrt(sq_vel / B)
    half = T // 2
    return {
        "time_s": times,
        "rmse_position_m": pos,
        "rmse_velocity_mps": vel,
        "steady_position_m": float(np.sqrt(np.mean(pos[half:] ** 2))),
        "steady_velocity_mps": float(np.sqrt(np.mean(vel[half:] ** 2))),
    }
