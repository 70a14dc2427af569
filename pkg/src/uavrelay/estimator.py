"""Constant-velocity Kalman filter used by the relay to track each tracker drone.

State layout is ``[px, py, pz, vx, vy, vz]``. Acceleration enters as the
control input; the relay normally passes zero because tracker accelerations
are never transmitted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from uavrelay.errors import NumericalError

_I3 = np.eye(3)
_Z3 = np.zeros((3, 3))


@dataclass(frozen=True)
class KinematicState:
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float).reshape(3))
        if not (np.all(np.isfinite(self.position)) and np.all(np.isfinite(self.velocity))):
            raise ValueError("kinematic state must be finite")

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.position, self.velocity])


def _axis3(value, name: str) -> np.ndarray:
    # two-component sigmas cover x, y; z is held at constant altitude
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        arr = np.array([arr[0], arr[0], 0.0])
    elif arr.size == 2:
        arr = np.array([arr[0], arr[1], 0.0])
    elif arr.size != 3:
        raise ValueError(f"{name} must have 1, 2 or 3 components")
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite and >= 0")
    return arr


@dataclass(frozen=True)
class FilterConfig:
    """Filter step and per-axis noise levels.

    Scalars or 2-vectors apply to the horizontal axes; the vertical axis gets
    zero noise unless a 3-vector is given.
    """

    dt: float
    sigma_acc: np.ndarray = field(default_factory=lambda: np.array([0.3, 0.3, 0.0]))
    sigma_gps: np.ndarray = field(default_factory=lambda: np.array([3.0, 3.0, 0.0]))
    sigma_vel: np.ndarray = field(default_factory=lambda: np.array([0.3, 0.3, 0.0]))

    def __post_init__(self):
        if not math.isfinite(self.dt) or self.dt <= 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        for name in ("sigma_acc", "sigma_gps", "sigma_vel"):
            object.__setattr__(self, name, _axis3(getattr(self, name), name))

    @classmethod
    def paper(cls, dt: float = 2.0) -> "FilterConfig":
        return cls(dt=dt, sigma_acc=(0.3, 0.3), sigma_gps=(3.0, 3.0), sigma_vel=(0.3, 0.3))


@dataclass(frozen=True)
class FilterState:
    mean: np.ndarray
    covariance: np.ndarray

    @property
    def estimate(self) -> KinematicState:
        return KinematicState(self.mean[:3], self.mean[3:])


def transition_matrix(dt: float) -> np.ndarray:
    return np.block([[_I3, _I3 * dt], [_Z3, _I3]])


def control_matrix(dt: float) -> np.ndarray:
    return np.vstack([0.5 * _I3 * dt * dt, _I3 * dt])


def process_noise(dt: float, sigma_acc) -> np.ndarray:
    """Block-diagonal process noise: ``diag(dt^4/4, dt^2) * sigma^2`` per axis."""
    s2 = _axis3(sigma_acc, "sigma_acc") ** 2
    return np.diag(np.concatenate([0.25 * dt**4 * s2, dt**2 * s2]))


def measurement_noise(cfg: FilterConfig) -> np.ndarray:
    # zero sigmas (e.g. the held altitude axis) are floored so S stays invertible
    sig = np.maximum(np.concatenate([cfg.sigma_gps, cfg.sigma_vel]), 1e-12)
    return np.diag(sig**2)


def initial_state(z: np.ndarray, cfg: FilterConfig) -> FilterState:
    """Filter seeded from the first measurement with the measurement covariance."""
    z = np.asarray(z, dtype=float).reshape(6)
    if not np.all(np.isfinite(z)):
        raise ValueError("measurement must be finite")
    return FilterState(z.copy(), measurement_noise(cfg))


def predict(state: FilterState, accel, cfg: FilterConfig, dt: float | None = None) -> FilterState:
    dt = cfg.dt if dt is None else dt
    a = np.zeros(3) if accel is None else np.asarray(accel, dtype=float).reshape(3)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(state.mean))):
        raise ValueError("non-finite input to predict")
    F = transition_matrix(dt)
    mean = F @ state.mean + control_matrix(dt) @ a
    P = F @ state.covariance @ F.T + process_noise(dt, cfg.sigma_acc)
    return FilterState(mean, 0.5 * (P + P.T))


def update(state: FilterState, z, cfg: FilterConfig) -> FilterState:
    """Kalman measurement update with ``H = I``, in Joseph form."""
    z = np.asarray(z, dtype=float).reshape(6)
    if not np.all(np.isfinite(z)):
        raise ValueError("measurement must be finite")
    P = state.covariance
    S = P + measurement_noise(cfg)
    try:
        # K = P S^-1, solved through the symmetric system S K^T = P
        K = np.linalg.solve(S, P).T
    except np.linalg.LinAlgError as exc:
        raise NumericalError("singular innovation covariance") from exc
    mean = state.mean + K @ (z - state.mean)
    A = np.eye(6) - K
    Pn = A @ P @ A.T + K @ measurement_noise(cfg) @ K.T
    return FilterState(mean, 0.5 * (Pn + Pn.T))


def estimate_track(
    measurements: Sequence,
    cfg: FilterConfig,
    accel_inputs: Iterable | None = None,
    prior: FilterState | None = None,
) -> list[FilterState]:
    """Run predict/update over a measurement stream.

    Without a ``prior`` the first measurement seeds the filter. ``accel_inputs[k]``
    drives the predict that arrives at measurement ``k``; missing inputs mean zero.
    """
    zs = [np.asarray(z, dtype=float) for z in measurements]
    if not zs:
        raise ValueError("measurement stream is empty")
    accels = list(accel_inputs) if accel_inputs is not None else [None] * len(zs)
    if len(accels) < len(zs):
        accels += [None] * (len(zs) - len(accels))

    state = initial_state(zs[0], cfg) if prior is None else update(prior, zs[0], cfg)
    out = [state]
    for k in range(1, len(zs)):
        state = update(predict(state, accels[k], cfg), zs[k], cfg)
        out.append(state)
    return out


def synthesize_measurement(truth: KinematicState, cfg: FilterConfig, rng: np.random.Generator) -> np.ndarray:
    """Truth plus independent per-axis Gaussian noise."""
    noise = rng.standard_normal(6) * np.concatenate([cfg.sigma_gps, cfg.sigma_vel])
    return truth.as_vector() + noise
