"""Scenario configuration, JSON schema and seeded materialization."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from uavrelay.errors import ConfigError
from uavrelay.estimator import FilterConfig
from uavrelay.mobility import RelayState, Segment, TrackerPlan, wrap_angle
from uavrelay.planner import ALGORITHMS, PlannerConfig

SPEED_CLASSES = {
    "slow": (25.0,),
    "normal": (30.0,),
    "fast": (35.0,),
    "mixed": (25.0, 30.0, 35.0),
}
PAPER_COMM_RANGES_M = (50_000.0, 100_000.0, 150_000.0, 200_000.0)
MANEUVER_JITTER = 0.1  # fraction of the nominal maneuver period

_TOP_KEYS = (
    "n_trackers",
    "initial_positions_m",
    "speed_class",
    "sim_duration_s",
    "step_dt_s",
    "estimate_period_s",
    "comm_range_m",
    "seed",
    "maneuver_period_s",
    "maneuver_turn_max_deg",
    "planner",
    "noise",
)
_PLANNER_KEYS = (
    "algorithm",
    "horizon_steps",
    "epsilon",
    "speed_set_mps",
    "delta_set_deg",
    "k_uncertainty",
    "quad_tol",
    "replan_at_refresh_only",
)
_NOISE_KEYS = ("sigma_acc_mps2", "sigma_gps_m", "sigma_vel_mps")


@dataclass(frozen=True)
class PlannerSettings:
    algorithm: str = "hybrid"
    horizon_steps: int = 1
    epsilon: float = 1e-4
    speed_set_mps: tuple[float, ...] = (20.0, 30.0, 40.0)
    delta_set_deg: tuple[float, ...] = (-30.0, 0.0, 30.0)
    k_uncertainty: float = 1.0
    quad_tol: float = 1e-8
    replan_at_refresh_only: bool = False


@dataclass(frozen=True)
class NoiseSettings:
    sigma_acc_mps2: tuple[float, ...] = (0.3, 0.3)
    sigma_gps_m: tuple[float, ...] = (3.0, 3.0)
    sigma_vel_mps: tuple[float, ...] = (0.3, 0.3)


@dataclass(frozen=True)
class ScenarioConfig:
    n_trackers: int
    initial_positions_m: tuple[tuple[float, float], ...]
    speed_class: str
    sim_duration_s: float
    step_dt_s: float
    estimate_period_s: float
    comm_range_m: float
    seed: int
    maneuver_period_s: float
    maneuver_turn_max_deg: float = 45.0
    planner: PlannerSettings = field(default_factory=PlannerSettings)
    noise: NoiseSettings = field(default_factory=NoiseSettings)

    def __post_init__(self):
        object.__setattr__(
            self, "initial_positions_m", tuple((float(p[0]), float(p[1])) for p in self.initial_positions_m)
        )
        validate(self)

    @property
    def n_steps(self) -> int:
        return int(round(self.sim_duration_s / self.step_dt_s))

    @property
    def refresh_every(self) -> int:
        return int(round(self.estimate_period_s / self.step_dt_s))

    @property
    def speed_values(self) -> tuple[float, ...]:
        return SPEED_CLASSES[self.speed_class]

    def planner_config(self) -> PlannerConfig:
        p = self.planner
        return PlannerConfig(
            algorithm=p.algorithm,
            horizon_steps=p.horizon_steps,
            epsilon=p.epsilon,
            speed_set=p.speed_set_mps,
            delta_set=tuple(math.radians(d) for d in p.delta_set_deg),
            step_dt=self.step_dt_s,
            comm_range=self.comm_range_m,
            k_uncertainty=p.k_uncertainty,
            quad_tol=p.quad_tol,
            replan_at_refresh_only=p.replan_at_refresh_only,
        )

    def filter_config(self) -> FilterConfig:
        n = self.noise
        return FilterConfig(
            dt=self.step_dt_s, sigma_acc=n.sigma_acc_mps2, sigma_gps=n.sigma_gps_m, sigma_vel=n.sigma_vel_mps
        )

    def replace(self, **changes) -> "ScenarioConfig":
        planner_changes = {k: changes.pop(k) for k in list(changes) if k in _PLANNER_KEYS}
        d = to_dict(self)
        d.update(changes)
        d["planner"].update(planner_changes)
        return from_dict(d)


def _multiple(a: float, b: float) -> bool:
    q = a / b
    return abs(q - round(q)) < 1e-9 * max(1.0, abs(q))


def validate(cfg: ScenarioConfig) -> None:
    if cfg.n_trackers < 1:
        raise ConfigError("must be >= 1", "n_trackers")
    if cfg.n_trackers + 1 > 6:
        raise ConfigError("exact reliability enumeration supports at most 5 trackers", "n_trackers")
    if len(cfg.initial_positions_m) != cfg.n_trackers:
        raise ConfigError(f"expected {cfg.n_trackers} positions", "initial_positions_m")
    if not all(math.isfinite(c) for p in cfg.initial_positions_m for c in p):
        raise ConfigError("positions must be finite", "initial_positions_m")
    if cfg.speed_class not in SPEED_CLASSES:
        raise ConfigError(f"must be one of {sorted(SPEED_CLASSES)}", "speed_class")
    for name in ("sim_duration_s", "step_dt_s", "estimate_period_s", "comm_range_m", "maneuver_period_s"):
        v = getattr(cfg, name)
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            raise ConfigError("must be a positive number", name)
    turn = cfg.maneuver_turn_max_deg
    if not (isinstance(turn, (int, float)) and 0 <= turn <= 180):
        raise ConfigError("must lie in [0, 180]", "maneuver_turn_max_deg")
    if not _multiple(cfg.estimate_period_s, cfg.step_dt_s):
        raise ConfigError("must be an integer multiple of step_dt_s", "estimate_period_s")
    if not _multiple(cfg.sim_duration_s, cfg.step_dt_s):
        raise ConfigError("must be an integer multiple of step_dt_s", "sim_duration_s")
    if not isinstance(cfg.seed, int) or isinstance(cfg.seed, bool) or not (0 <= cfg.seed < 2**64):
        raise ConfigError("must be an unsigned 64-bit integer", "seed")
    p = cfg.planner
    if p.algorithm not in ALGORITHMS:
        raise ConfigError(f"must be one of {list(ALGORITHMS)}", "planner.algorithm")
    if any(abs(d) > 180 for d in p.delta_set_deg):
        raise ConfigError("heading changes must lie in [-180, 180]", "planner.delta_set_deg")
    try:
        cfg.planner_config()
        cfg.filter_config()
    except ConfigError as exc:
        raise ConfigError(str(exc).split(": ", 1)[-1], f"planner.{exc.field}") from None
    except ValueError as exc:
        raise ConfigError(str(exc), "noise") from None


def to_dict(cfg: ScenarioConfig) -> dict[str, Any]:
    p, n = cfg.planner, cfg.noise
    return {
        "n_trackers": cfg.n_trackers,
        "initial_positions_m": [list(pt) for pt in cfg.initial_positions_m],
        "speed_class": cfg.speed_class,
        "sim_duration_s": cfg.sim_duration_s,
        "step_dt_s": cfg.step_dt_s,
        "estimate_period_s": cfg.estimate_period_s,
        "comm_range_m": cfg.comm_range_m,
        "seed": cfg.seed,
        "maneuver_period_s": cfg.maneuver_period_s,
        "maneuver_turn_max_deg": cfg.maneuver_turn_max_deg,
        "planner": {
            "algorithm": p.algorithm,
            "horizon_steps": p.horizon_steps,
            "epsilon": p.epsilon,
            "speed_set_mps": list(p.speed_set_mps),
            "delta_set_deg": list(p.delta_set_deg),
            "k_uncertainty": p.k_uncertainty,
            "quad_tol": p.quad_tol,
            "replan_at_refresh_only": p.replan_at_refresh_only,
        },
        "noise": {
            "sigma_acc_mps2": list(n.sigma_acc_mps2),
            "sigma_gps_m": list(n.sigma_gps_m),
            "sigma_vel_mps": list(n.sigma_vel_mps),
        },
    }


def _check_keys(d: Any, keys: tuple[str, ...], where: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError("must be a JSON object", where or "config")
    prefix = f"{where}." if where else ""
    for k in d:
        if k not in keys:
            raise ConfigError("unknown field", f"{prefix}{k}")
    for k in keys:
        if k not in d:
            raise ConfigError("missing field", f"{prefix}{k}")


def _num(d: dict, key: str, where: str = "") -> float:
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError("must be a number", f"{where}{key}")
    return float(v)


def _nums(d: dict, key: str, where: str = "") -> tuple[float, ...]:
    v = d[key]
    if not isinstance(v, list) or not v or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in v):
        raise ConfigError("must be a non-empty list of numbers", f"{where}{key}")
    return tuple(float(x) for x in v)


def _int(d: dict, key: str, where: str = "") -> int:
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError("must be an integer", f"{where}{key}")
    return v


def from_dict(d: dict[str, Any]) -> ScenarioConfig:
    """Parse a config mapping; unknown or missing fields are errors."""
    _check_keys(d, _TOP_KEYS, "")
    _check_keys(d["planner"], _PLANNER_KEYS, "planner")
    _check_keys(d["noise"], _NOISE_KEYS, "noise")
    pd, nd = d["planner"], d["noise"]
    if not isinstance(pd["algorithm"], str):
        raise ConfigError("must be a string", "planner.algorithm")
    if not isinstance(pd["replan_at_refresh_only"], bool):
        raise ConfigError("must be a boolean", "planner.replan_at_refresh_only")
    if not isinstance(d["speed_class"], str):
        raise ConfigError("must be a string", "speed_class")
    positions = d["initial_positions_m"]
    if not isinstance(positions, list) or not all(
        isinstance(p, list) and len(p) == 2 and all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in p)
        for p in positions
    ):
        raise ConfigError("must be a list of [x, y] pairs", "initial_positions_m")
    planner = PlannerSettings(
        algorithm=pd["algorithm"],
        horizon_steps=_int(pd, "horizon_steps", "planner."),
        epsilon=_num(pd, "epsilon", "planner."),
        speed_set_mps=_nums(pd, "speed_set_mps", "planner."),
        delta_set_deg=_nums(pd, "delta_set_deg", "planner."),
        k_uncertainty=_num(pd, "k_uncertainty", "planner."),
        quad_tol=_num(pd, "quad_tol", "planner."),
        replan_at_refresh_only=pd["replan_at_refresh_only"],
    )
    noise = NoiseSettings(
        sigma_acc_mps2=_nums(nd, "sigma_acc_mps2", "noise."),
        sigma_gps_m=_nums(nd, "sigma_gps_m", "noise."),
        sigma_vel_mps=_nums(nd, "sigma_vel_mps", "noise."),
    )
    return ScenarioConfig(
        n_trackers=_int(d, "n_trackers"),
        initial_positions_m=tuple(tuple(p) for p in positions),
        speed_class=d["speed_class"],
        sim_duration_s=_num(d, "sim_duration_s"),
        step_dt_s=_num(d, "step_dt_s"),
        estimate_period_s=_num(d, "estimate_period_s"),
        comm_range_m=_num(d, "comm_range_m"),
        seed=_int(d, "seed"),
        maneuver_period_s=_num(d, "maneuver_period_s"),
        maneuver_turn_max_deg=_num(d, "maneuver_turn_max_deg"),
        planner=planner,
        noise=noise,
    )


def load_config(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON ({exc.msg} at line {exc.lineno})", str(path)) from None
    return from_dict(data)


def dump_config(cfg: ScenarioConfig) -> str:
    return json.dumps(to_dict(cfg), indent=2) + "\n"


def paper_preset(
    seed: int = 0, comm_range_m: float = 100_000.0, turn_max_deg: float = 45.0, **planner
) -> ScenarioConfig:
    """Three trackers, 171 minutes at 2 s steps, estimates every 30 s."""
    return ScenarioConfig(
        n_trackers=3,
        initial_positions_m=((0.0, 0.0), (500.0, 500.0), (1000.0, 0.0)),
        speed_class="mixed",
        sim_duration_s=171 * 60.0,
        step_dt_s=2.0,
        estimate_period_s=30.0,
        comm_range_m=comm_range_m,
        seed=seed,
        maneuver_period_s=300.0,
        maneuver_turn_max_deg=turn_max_deg,
        planner=PlannerSettings(**planner),
        noise=NoiseSettings(),
    )


@dataclass(frozen=True)
class Scenario:
    config: ScenarioConfig
    plans: tuple[TrackerPlan, ...]
    relay_initial: RelayState


def seed_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent generators for flight plans and measurement noise."""
    plans_ss, noise_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(plans_ss), np.random.default_rng(noise_ss)


def random_plan(
    start: tuple[float, float],
    speeds: tuple[float, ...],
    duration: float,
    period: float,
    rng: np.random.Generator,
    turn_max_deg: float = 180.0,
) -> TrackerPlan:
    """Maneuver roughly every ``period`` seconds to a new heading and speed.

    The first heading is uniform; each later one turns from the previous by
    a uniform angle of at most ``turn_max_deg`` (180 makes every heading
    uniform and independent).
    """
    turn = math.radians(turn_max_deg)
    segments = []
    t = 0.0
    heading = None
    while t < duration:
        draw = math.pi - rng.uniform(0.0, 2.0 * math.pi)  # (-pi, pi]
        heading = draw if heading is None else wrap_angle(heading + draw * turn / math.pi)
        speed = float(speeds[rng.integers(len(speeds))])
        segments.append(Segment(t, speed, heading))
        t += period * rng.uniform(1.0 - MANEUVER_JITTER, 1.0 + MANEUVER_JITTER)
    return TrackerPlan(start, tuple(segments), duration)


def materialize(config: ScenarioConfig) -> Scenario:
    validate(config)
    plans_rng, _ = seed_streams(config.seed)
    plans = tuple(
        random_plan(
            p,
            config.speed_values,
            config.sim_duration_s,
            config.maneuver_period_s,
            plans_rng,
            config.maneuver_turn_max_deg,
        )
        for p in config.initial_positions_m
    )
    centroid = np.mean(np.array(config.initial_positions_m), axis=0)
    speeds = sorted(config.planner.speed_set_mps)
    relay = RelayState((float(centroid[0]), float(centroid[1])), 0.0, float(speeds[len(speeds) // 2]))
    return Scenario(config, plans, relay)
