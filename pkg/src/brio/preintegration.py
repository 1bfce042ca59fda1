"""On-manifold IMU preintegration between two radar stamps.

Deltas are expressed in the body frame at the start of the interval and are
gravity free: ``v_j = v_i + g dt + R_i dv`` and
``p_j = p_i + v_i dt + g dt^2 / 2 + R_i dp``.

The default scheme is the midpoint rule: the rotation step uses the mean of
the two bracketing gyro samples and the velocity step the mean of the two
rotated specific forces.  ``scheme="euler"`` holds each sample constant until
the next one instead.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from brio.geometry import exp_so3, right_jacobian, skew
from brio.types import ImuSample, ImuStream, NavState, NoiseConfig

SCHEMES = ("midpoint", "euler")


@dataclass
class PreintegratedImu:
    """Accumulated IMU deltas with covariance and first-order bias Jacobians.

    ``covariance`` is 9x9 ordered ``[rotation, position, velocity]`` to line up
    with the IMU residual.  ``bias_covariance`` holds the 6 diagonal variances
    of the bias random walk over the interval, ``[gyro, accel]``.
    """

    delta_rotation: np.ndarray
    delta_velocity: np.ndarray
    delta_position: np.ndarray
    delta_t: float
    start: float
    end: float
    covariance: np.ndarray
    bias_covariance: np.ndarray
    gyro_bias: np.ndarray
    accel_bias: np.ndarray
    d_rot_d_bg: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    d_vel_d_bg: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    d_vel_d_ba: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    d_pos_d_bg: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    d_pos_d_ba: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))

    def corrected(self, gyro_bias, accel_bias):
        """Deltas re-linearized to new biases, first order in the bias change."""
        dbg = np.asarray(gyro_bias, dtype=float) - self.gyro_bias
        dba = np.asarray(accel_bias, dtype=float) - self.accel_bias
        rot = self.delta_rotation @ exp_so3(self.d_rot_d_bg @ dbg)
        vel = self.delta_velocity + self.d_vel_d_bg @ dbg + self.d_vel_d_ba @ dba
        pos = self.delta_position + self.d_pos_d_bg @ dbg + self.d_pos_d_ba @ dba
        return rot, vel, pos

    def predict(self, state: NavState, gravity) -> NavState:
        """Propagate ``state`` across the interval with its own biases."""
        g = np.asarray(gravity, dtype=float)
        d_rot, d_vel, d_pos = self.corrected(state.gyro_bias, state.accel_bias)
        dt = self.delta_t
        return state.replace(
            rotation=state.rotation @ d_rot,
            velocity=state.velocity + g * dt + state.rotation @ d_vel,
            position=state.position + state.velocity * dt + 0.5 * g * dt * dt + state.rotation @ d_pos,
            stamp=self.end,
        )

    def information_sqrt(self) -> np.ndarray:
        """Upper-triangular ``L`` with ``L^T L`` the 15x15 information matrix."""
        cov = np.zeros((15, 15))
        # Floor keeps single-step intervals (rank-deficient noise) invertible.
        cov[:9, :9] = self.covariance + 1e-12 * np.eye(9)
        cov[9:, 9:] = np.diag(self.bias_covariance)
        info = np.linalg.inv(cov)
        info = 0.5 * (info + info.T)
        return np.linalg.cholesky(info).T


def _integration_grid(stream: ImuStream, t_start, t_end, scheme):
    stamps = stream.stamps
    if len(stamps) == 0:
        raise ValueError("cannot preintegrate an empty IMU sample list")
    if np.any(np.diff(stamps) <= 0):
        raise ValueError("IMU timestamps must be strictly increasing")
    t0 = stamps[0] if t_start is None else float(t_start)
    t1 = stamps[-1] if t_end is None else float(t_end)
    if not t1 > t0:
        raise ValueError("preintegration interval must have positive duration")
    inner = stamps[(stamps > t0) & (stamps < t1)]
    grid = np.concatenate([[t0], inner, [t1]])
    if scheme == "midpoint":
        gyro = np.column_stack([np.interp(grid, stamps, stream.gyro[:, k]) for k in range(3)])
        accel = np.column_stack([np.interp(grid, stamps, stream.accel[:, k]) for k in range(3)])
    else:
        # Zero-order hold: the latest sample at or before each grid point.
        idx = np.clip(np.searchsorted(stamps, grid, side="right") - 1, 0, len(stamps) - 1)
        gyro = stream.gyro[idx]
        accel = stream.accel[idx]
    return grid, gyro, accel


def preintegrate(
    samples: Sequence[ImuSample] | ImuStream,
    gyro_bias,
    accel_bias,
    noise: NoiseConfig | None = None,
    t_start: float | None = None,
    t_end: float | None = None,
    scheme: str = "midpoint",
) -> PreintegratedImu:
    """Preintegrate IMU samples over ``[t_start, t_end]``.

    The interval defaults to the first and last sample stamps.  Samples may
    extend past either end; values at the ends are linearly interpolated for
    the midpoint scheme and held for the Euler scheme.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown integration scheme {scheme!r}; choose from {SCHEMES}")
    noise = noise or NoiseConfig()
    stream = ImuStream.from_samples(samples)
    grid, gyro, accel = _integration_grid(stream, t_start, t_end, scheme)
    bg = np.asarray(gyro_bias, dtype=float).reshape(3)
    ba = np.asarray(accel_bias, dtype=float).reshape(3)

    d_rot = np.eye(3)
    d_vel = np.zeros(3)
    d_pos = np.zeros(3)
    j_rot_bg = np.zeros((3, 3))
    j_vel_bg = np.zeros((3, 3))
    j_vel_ba = np.zeros((3, 3))
    j_pos_bg = np.zeros((3, 3))
    j_pos_ba = np.zeros((3, 3))
    cov = np.zeros((9, 9))
    gyro_var = noise.gyro_noise_density**2
    accel_var = noise.accel_noise_density**2
    eye3 = np.eye(3)

    for k in range(len(grid) - 1):
        dt = grid[k + 1] - grid[k]
        a0 = accel[k] - ba
        if scheme == "midpoint":
            w = 0.5 * (gyro[k] + gyro[k + 1]) - bg
            a1 = accel[k + 1] - ba
        else:
            w = gyro[k] - bg
            a1 = a0
        theta = w * dt
        step = exp_so3(theta)
        jr = right_jacobian(theta)
        rot_next = d_rot @ step

        # Bias Jacobian of the rotation before it is overwritten.
        j_rot_next = step.T @ j_rot_bg - jr * dt
        acc_world = 0.5 * (d_rot @ a0 + rot_next @ a1)
        dacc_bg = -0.5 * (d_rot @ skew(a0) @ j_rot_bg + rot_next @ skew(a1) @ j_rot_next)
        dacc_ba = -0.5 * (d_rot + rot_next)

        # Error-state propagation, [rot, pos, vel].
        a_mid = 0.5 * (a0 + a1)
        ra = d_rot @ skew(a_mid)
        A = np.eye(9)
        A[0:3, 0:3] = step.T
        A[3:6, 0:3] = -0.5 * ra * dt * dt
        A[3:6, 6:9] = eye3 * dt
        A[6:9, 0:3] = -ra * dt
        B = np.zeros((9, 6))
        B[0:3, 0:3] = jr * dt
        B[3:6, 3:6] = 0.5 * d_rot * dt * dt
        B[6:9, 3:6] = d_rot * dt
        q = np.concatenate([np.full(3, gyro_var / dt), np.full(3, accel_var / dt)])
        cov = A @ cov @ A.T + (B * q) @ B.T

        d_pos = d_pos + d_vel * dt + 0.5 * acc_world * dt * dt
        j_pos_bg = j_pos_bg + j_vel_bg * dt + 0.5 * dacc_bg * dt * dt
        j_pos_ba = j_pos_ba + j_vel_ba * dt + 0.5 * dacc_ba * dt * dt
        d_vel = d_vel + acc_world * dt
        j_vel_bg = j_vel_bg + dacc_bg * dt
        j_vel_ba = j_vel_ba + dacc_ba * dt
        d_rot = rot_next
        j_rot_bg = j_rot_next

    total = grid[-1] - grid[0]
    bias_cov = np.concatenate(
        [
            np.full(3, noise.gyro_bias_random_walk**2 * total),
            np.full(3, noise.accel_bias_random_walk**2 * total),
        ]
    )
    cov = 0.5 * (cov + cov.T)
    return PreintegratedImu(
        delta_rotation=d_rot,
        delta_velocity=d_vel,
        delta_position=d_pos,
        delta_t=total,
        start=float(grid[0]),
        end=float(grid[-1]),
        covariance=cov,
        bias_covariance=bias_cov,
        gyro_bias=bg.copy(),
        accel_bias=ba.copy(),
        d_rot_d_bg=j_rot_bg,
        d_vel_d_bg=j_vel_bg,
        d_vel_d_ba=j_vel_ba,
        d_pos_d_bg=j_pos_bg,
        d_pos_d_ba=j_pos_ba,
    )


@dataclass
class PreintegratedBatch:
    """Many :class:`PreintegratedImu` stacked along a leading axis."""

    delta_rotation: np.ndarray
    delta_velocity: np.ndarray
    delta_position: np.ndarray
    delta_t: np.ndarray
    gyro_bias: np.ndarray
    accel_bias: np.ndarray
    d_rot_d_bg: np.ndarray
    d_vel_d_bg: np.ndarray
    d_vel_d_ba: np.ndarray
    d_pos_d_bg: np.ndarray
    d_pos_d_ba: np.ndarray

    def __len__(self) -> int:
        return len(self.delta_t)

    @classmethod
    def stack(cls, pims: Sequence[PreintegratedImu]) -> "PreintegratedBatch":
        names = [f.name for f in dataclasses.fields(cls)]
        return cls(**{n: np.array([getattr(m, n) for m in pims], dtype=float) for n in names})
