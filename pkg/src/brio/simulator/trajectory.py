"""Analytic ground-truth trajectories with closed-form derivatives.

A trajectory is a path ``position(u)`` with Euler angles ``(roll, pitch, yaw)(u)``
driven by a time warp ``u(t)``: the vehicle rests for ``start_delay`` seconds,
then the path speed ramps from 0 to 1 over ``ramp`` seconds with a quintic
smoothstep, so every scenario starts at rest at the origin with zero yaw.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from brio.geometry import euler_zyx_to_matrix

KINDS = ("static", "hover", "line", "circle", "slalom")


@dataclass
class TrajectoryConfig:
    kind: str
    start_delay: float = 1.5
    ramp: float = 1.5
    speed: float = 1.0
    heading_deg: float = 0.0
    radius: float = 3.0
    slalom_amplitude: float = 1.0
    slalom_wavelength: float = 8.0
    vertical_amplitude: float = 0.0
    vertical_wavelength: float = 10.0
    sway_amplitude: list[float] = field(default_factory=lambda: [0.02, 0.02, 0.01])
    sway_frequency: float = 0.4
    roll_amplitude_deg: float = 0.0
    pitch_amplitude_deg: float = 0.0
    attitude_frequency: float = 0.3

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown trajectory kind {self.kind!r}; choose from {', '.join(KINDS)}")
        if self.start_delay < 0 or self.ramp < 0:
            raise ValueError("start_delay and ramp must be non-negative")
        if self.kind == "circle" and not self.radius > 0:
            raise ValueError("circle radius must be positive")


@dataclass
class KinematicSample:
    """Ground truth at an array of stamps; world-frame unless noted."""

    stamps: np.ndarray
    position: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    rotation: np.ndarray
    body_rate: np.ndarray


def _time_warp(t, delay, ramp):
    tau = np.maximum(t - delay, 0.0)
    if ramp == 0:
        moving = (t > delay).astype(float)
        return tau, moving, np.zeros_like(t)
    x = np.clip(tau / ramp, 0.0, 1.0)
    smooth = x**3 * (10 - 15 * x + 6 * x * x)
    smooth_int = ramp * x**4 * (2.5 - 3 * x + x * x)
    smooth_dot = 30 * x * x * (1 - x) ** 2 / ramp
    after = tau > ramp
    u = np.where(after, 0.5 * ramp + (tau - ramp), smooth_int)
    du = np.where(after, 1.0, smooth)
    ddu = np.where(after, 0.0, smooth_dot)
    return u, du, ddu


class Trajectory:
    def __init__(self, config: TrajectoryConfig):
        self.config = config

    # Path in the warped parameter: returns (pos, d1, d2) each (n, 3) and
    # angle triples (n, 3) with their first derivatives.
    def _path(self, u):
        c = self.config
        n = len(u)
        pos = np.zeros((n, 3))
        d1 = np.zeros((n, 3))
        d2 = np.zeros((n, 3))
        yaw = np.zeros(n)
        dyaw = np.zeros(n)

        if c.kind == "hover":
            amp = np.asarray(c.sway_amplitude, dtype=float)
            w = 2 * np.pi * c.sway_frequency
            s, co = np.sin(w * u), np.cos(w * u)
            pos = amp * s[:, None]
            d1 = amp * (w * co)[:, None]
            d2 = -amp * (w * w * s)[:, None]
        elif c.kind == "line":
            h = np.deg2rad(c.heading_deg)
            direction = np.array([np.cos(h), np.sin(h), 0.0])
            pos = c.speed * u[:, None] * direction
            d1 = np.tile(c.speed * direction, (n, 1))
            yaw[:] = h
        elif c.kind == "circle":
            om = c.speed / c.radius
            s, co = np.sin(om * u), np.cos(om * u)
            pos[:, 0] = c.radius * s
            pos[:, 1] = c.radius * (1 - co)
            d1[:, 0] = c.speed * co
            d1[:, 1] = c.speed * s
            d2[:, 0] = -c.speed * om * s
            d2[:, 1] = c.speed * om * co
            yaw = om * u
            dyaw[:] = om
        elif c.kind == "slalom":
            k = 2 * np.pi * c.speed / c.slalom_wavelength
            a = c.slalom_amplitude
            s, co = np.sin(k * u), np.cos(k * u)
            pos[:, 0] = c.speed * u
            pos[:, 1] = a * (1 - co)
            d1[:, 0] = c.speed
            d1[:, 1] = a * k * s
            d2[:, 1] = a * k * k * co
            yaw = np.arctan2(d1[:, 1], d1[:, 0])
            dyaw = c.speed * d2[:, 1] / (c.speed**2 + d1[:, 1] ** 2)

        if c.vertical_amplitude:
            kz = 2 * np.pi * c.speed / c.vertical_wavelength
            pos[:, 2] += c.vertical_amplitude * (1 - np.cos(kz * u))
            d1[:, 2] += c.vertical_amplitude * kz * np.sin(kz * u)
            d2[:, 2] += c.vertical_amplitude * kz * kz * np.cos(kz * u)

        wa = 2 * np.pi * c.attitude_frequency
        ra, pa = np.deg2rad(c.roll_amplitude_deg), np.deg2rad(c.pitch_amplitude_deg)
        roll = ra * np.sin(wa * u)
        droll = ra * wa * np.cos(wa * u)
        pitch = pa * np.sin(1.3 * wa * u)
        dpitch = pa * 1.3 * wa * np.cos(1.3 * wa * u)
        return pos, d1, d2, (roll, pitch, yaw), (droll, dpitch, dyaw)

    def sample(self, stamps) -> KinematicSample:
        t = np.atleast_1d(np.asarray(stamps, dtype=float))
        c = self.config
        if c.kind == "static":
            u = np.zeros_like(t)
            du = np.zeros_like(t)
            ddu = np.zeros_like(t)
        else:
            u, du, ddu = _time_warp(t, c.start_delay, c.ramp)
        pos, d1, d2, angles, rates = self._path(u)
        velocity = d1 * du[:, None]
        acceleration = d2 * (du * du)[:, None] + d1 * ddu[:, None]
        roll, pitch, yaw = angles
        droll, dpitch, dyaw = (r * du for r in rates)
        rotation = euler_zyx_to_matrix(roll, pitch, yaw)
        sr, cr = np.sin(roll), np.cos(roll)
        sp, cp = np.sin(pitch), np.cos(pitch)
        body_rate = np.column_stack(
            [
                droll - dyaw * sp,
                dpitch * cr + dyaw * cp * sr,
                -dpitch * sr + dyaw * cp * cr,
            ]
        )
        return KinematicSample(t, pos, velocity, acceleration, rotation, body_rate)

    def path_length(self, duration: float, rate: float = 100.0) -> float:
        t = np.arange(int(round(duration * rate)) + 1) / rate
        p = self.sample(t).position
        return float(np.sum(np.linalg.norm(np.diff(p, axis=0), axis=1)))
