"""Truth-level motion: tracker flight plans and relay kinematics."""

from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from uavrelay.estimator import KinematicState

THETA_MAX = math.radians(30.0)
V_MIN = 20.0
V_MAX = 40.0
_ANGLE_TOL = 1e-12


def wrap_angle(theta: float) -> float:
    """Map an angle to ``(-pi, pi]``."""
    w = math.remainder(theta, 2.0 * math.pi)
    return math.pi if w == -math.pi else w


@dataclass(frozen=True)
class RelayState:
    position: tuple[float, float]
    heading: float
    speed: float


@dataclass(frozen=True)
class ControlInput:
    speed: float
    heading_delta: float


def step_relay(
    state: RelayState,
    u: ControlInput,
    dt: float,
    theta_max: float = THETA_MAX,
    v_min: float = V_MIN,
    v_max: float = V_MAX,
) -> RelayState:
    """Advance the relay one step: turn first, then fly straight at ``u.speed``."""
    if abs(u.heading_delta) > theta_max + _ANGLE_TOL:
        raise ValueError(
            f"heading change {math.degrees(u.heading_delta):.3f} deg exceeds "
            f"{math.degrees(theta_max):.3f} deg"
        )
    if not (v_min <= u.speed <= v_max):
        raise ValueError(f"speed {u.speed} outside [{v_min}, {v_max}]")
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    heading = wrap_angle(state.heading + u.heading_delta)
    x, y = state.position
    step = u.speed * dt
    return RelayState((x + step * math.cos(heading), y + step * math.sin(heading)), heading, u.speed)


def control_set(speed_set: Sequence[float], delta_set: Sequence[float]) -> list[ControlInput]:
    """All (speed, delta) pairs, speed-major."""
    return [ControlInput(float(v), float(d)) for v in speed_set for d in delta_set]


def enumerate_control_sequences(
    speed_set: Sequence[float], delta_set: Sequence[float], horizon_steps: int
) -> list[tuple[ControlInput, ...]]:
    """Every control sequence of length ``horizon_steps`` in lexicographic order.

    ``horizon_steps == 0`` yields the single empty sequence.
    """
    if horizon_steps < 0:
        raise ValueError("horizon_steps must be >= 0")
    if not speed_set or not delta_set:
        raise ValueError("speed and delta sets must be non-empty")
    return list(itertools.product(control_set(speed_set, delta_set), repeat=horizon_steps))


@dataclass(frozen=True)
class Segment:
    t_start: float
    speed: float
    heading: float


@dataclass(frozen=True)
class TrackerPlan:
    """Piecewise-constant-velocity flight plan on ``[0, t_end]``."""

    start: tuple[float, float]
    segments: tuple[Segment, ...]
    t_end: float
    altitude: float = 0.0
    _knots: tuple = field(init=False, repr=False, compare=False)
    _starts: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.segments:
            raise ValueError("plan needs at least one segment")
        if self.segments[0].t_start != 0.0:
            raise ValueError("first segment must start at t=0")
        times = [s.t_start for s in self.segments]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("segment start times must be strictly increasing")
        if self.t_end < times[-1]:
            raise ValueError("t_end precedes the last segment")
        # position at each segment start
        knots = [(float(self.start[0]), float(self.start[1]))]
        for seg, nxt in zip(self.segments, self.segments[1:]):
            x, y = knots[-1]
            span = nxt.t_start - seg.t_start
            knots.append(
                (x + seg.speed * span * math.cos(seg.heading), y + seg.speed * span * math.sin(seg.heading))
            )
        object.__setattr__(self, "_knots", tuple(knots))
        object.__setattr__(self, "_starts", tuple(times))


def tracker_position(plan: TrackerPlan, t: float) -> KinematicState:
    """Tracker state at time ``t``; a boundary instant belongs to the later segment."""
    if not (0.0 <= t <= plan.t_end):
        raise ValueError(f"t={t} outside plan window [0, {plan.t_end}]")
    i = bisect.bisect_right(plan._starts, t) - 1
    seg = plan.segments[i]
    x0, y0 = plan._knots[i]
    tau = t - seg.t_start
    c, s = math.cos(seg.heading), math.sin(seg.heading)
    pos = (x0 + seg.speed * tau * c, y0 + seg.speed * tau * s, plan.altitude)
    vel = (seg.speed * c, seg.speed * s, 0.0)
    return KinematicState(np.array(pos), np.array(vel))


def tracker_track(plan: TrackerPlan, times) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`tracker_position`: positions and velocities, each ``(T, 3)``."""
    t = np.asarray(times, dtype=float)
    if t.size and (t.min() < 0.0 or t.max() > plan.t_end):
        raise ValueError(f"times outside plan window [0, {plan.t_end}]")
    idx = np.searchsorted(np.array(plan._starts), t, side="right") - 1
    speed = np.array([s.speed for s in plan.segments])[idx]
    heading = np.array([s.heading for s in plan.segments])[idx]
    knots = np.array(plan._knots)[idx]
    tau = t - np.array(plan._starts)[idx]
    c, s_ = np.cos(heading), np.sin(heading)
    pos = np.column_stack([knots[:, 0] + speed * tau * c, knots[:, 1] + speed * tau * s_, np.full(t.shape, plan.altitude)])
    vel = np.column_stack([speed * c, speed * s_, np.zeros(t.shape)])
    return pos, vel
