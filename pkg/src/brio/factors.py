"""Residuals and analytic Jacobians for prior, IMU, Doppler, barometer and track factors.

Jacobians are taken with respect to the 15-dim right-perturbation tangent
of each state (``[rot, pos, vel, bg, ba]``) and, for tracks, the inertial
landmark position.  Single-measurement functions return the residual together
with a dict of Jacobian blocks; ``*_batch`` variants evaluate many
measurements at once for the solver.
"""

from __future__ import annotations

import numpy as np

from brio import atmosphere
from brio.geometry import (
    BA,
    BG,
    POS,
    ROT,
    VEL,
    exp_so3,
    local_coordinates,
    log_so3,
    right_jacobian,
    right_jacobian_inv,
    skew,
)
from brio.preintegration import PreintegratedBatch, PreintegratedImu
from brio.types import Calibration, NavState, RadarDetection

STAMP_TOLERANCE = 1e-3
UNIT_TOLERANCE = 1e-9


# -- bearing Doppler ---------------------------------------------------------


def doppler_residual_batch(rotation, velocity, gyro_bias, omega, bearing, doppler, R_BR, t_BR):
    """Vectorized Doppler residual over ``n`` detections.

    Returns ``(r (n,), J_rot (n,3), J_vel (n,3), J_bg (n,3))``.
    """
    rotation = np.asarray(rotation)
    u = np.einsum("nji,nj->ni", rotation, velocity)  # R^T v
    lever = np.cross(omega - gyro_bias, t_BR)
    e_body = bearing @ R_BR.T
    r = -np.einsum("ni,ni->n", u + lever, e_body) - doppler
    j_rot = -np.cross(e_body, u)
    j_vel = -np.einsum("nij,nj->ni", rotation, e_body)
    j_bg = -np.cross(e_body, t_BR)
    return r, j_rot, j_vel, j_bg


def radar_velocity(state: NavState, omega, calib: Calibration) -> np.ndarray:
    """Radar-frame velocity of the radar origin."""
    omega = np.asarray(omega, dtype=float)
    v_ir = state.velocity + state.rotation @ np.cross(omega - state.gyro_bias, calib.t_BR)
    return (state.rotation @ calib.R_BR).T @ v_ir


def doppler_residual(state: NavState, omega, det, calib: Calibration):
    """``r = -(v_R . e) - v_d`` with Jacobians for rotation, velocity, gyro bias.

    ``det`` needs ``bearing`` and ``doppler`` attributes.  A bearing that is
    not unit length is rejected rather than renormalized.
    """
    bearing = np.asarray(det.bearing, dtype=float)
    if abs(np.linalg.norm(bearing) - 1.0) > UNIT_TOLERANCE:
        raise ValueError("bearing must be a unit vector")
    r, j_rot, j_vel, j_bg = doppler_residual_batch(
        state.rotation[None],
        state.velocity[None],
        state.gyro_bias[None],
        np.asarray(omega, dtype=float)[None],
        bearing[None],
        np.array([det.doppler], dtype=float),
        calib.R_BR,
        calib.t_BR,
    )
    return float(r[0]), {"rotation": j_rot[0], "velocity": j_vel[0], "gyro_bias": j_bg[0]}


# -- barometer ---------------------------------------------------------------


def baro_residual(state: NavState, pressure: float, h0: float):
    """``r = z + h0 - h(p)``; the Jacobian w.r.t. position is ``e_z``."""
    if not pressure > 0:
        raise ValueError("pressure must be positive")
    r = state.position[2] + h0 - float(atmosphere.altitude(pressure))
    return r, {"position": np.array([0.0, 0.0, 1.0])}


# -- zero-velocity track -----------------------------------------------------


def track_residual_batch(rotation, position, landmark, measured, R_BR, t_BR):
    """Vectorized track residual.  Returns ``(r (n,3), J_rot, J_pos, J_lm)``."""
    u = np.einsum("nji,nj->ni", rotation, landmark - position)  # R^T (l - t)
    r = (u - t_BR) @ R_BR - measured
    j_rot = np.einsum("ji,njk->nik", R_BR, skew(u))
    rot_t = np.einsum("ji,nkj->nik", R_BR, rotation)  # R_BR^T R^T
    return r, j_rot, -rot_t, rot_t


def track_residual(state: NavState, landmark, det, calib: Calibration):
    """Inertial landmark mapped into the radar frame minus the measured position."""
    measured = np.asarray(getattr(det, "position", det), dtype=float)
    r, j_rot, j_pos, j_lm = track_residual_batch(
        state.rotation[None],
        state.position[None],
        np.asarray(landmark, dtype=float)[None],
        measured[None],
        calib.R_BR,
        calib.t_BR,
    )
    return r[0], {"rotation": j_rot[0], "position": j_pos[0], "landmark": j_lm[0]}


# -- prior -------------------------------------------------------------------


def prior_residual(state: NavState, prior: NavState):
    """Tangent difference of ``state`` from ``prior`` with its 15x15 Jacobian."""
    r = local_coordinates(prior, state)
    jac = np.eye(15)
    jac[ROT, ROT] = right_jacobian_inv(r[ROT])
    return r, jac


# -- preintegrated IMU -------------------------------------------------------


def imu_residual_batch(Ri, pi, vi, bgi, bai, Rj, pj, vj, bgj, baj, pims, gravity):
    """Vectorized IMU residual over ``n`` consecutive-state pairs.

    ``pims`` is a sequence of :class:`PreintegratedImu` or a stacked
    :class:`PreintegratedBatch`.  Returns
    ``(r (n,15), J_i (n,15,15), J_j (n,15,15))``.
    """
    if not isinstance(pims, PreintegratedBatch):
        pims = PreintegratedBatch.stack(pims)
    n = len(pims)
    g = np.asarray(gravity, dtype=float)
    dt = pims.delta_t[:, None]
    j_rot_bg = pims.d_rot_d_bg
    j_vel_bg = pims.d_vel_d_bg
    j_vel_ba = pims.d_vel_d_ba
    j_pos_bg = pims.d_pos_d_bg
    j_pos_ba = pims.d_pos_d_ba
    dbg = bgi - pims.gyro_bias
    dba = bai - pims.accel_bias
    mv = lambda a, b: np.einsum("nij,nj->ni", a, b)  # noqa: E731

    phi = mv(j_rot_bg, dbg)
    d_rot = pims.delta_rotation @ exp_so3(phi)
    d_vel = pims.delta_velocity + mv(j_vel_bg, dbg) + mv(j_vel_ba, dba)
    d_pos = pims.delta_position + mv(j_pos_bg, dbg) + mv(j_pos_ba, dba)

    ri_t = np.swapaxes(Ri, 1, 2)
    r_rot = log_so3(np.swapaxes(d_rot, 1, 2) @ ri_t @ Rj)
    dp_body = mv(ri_t, pj - pi - vi * dt - 0.5 * g * dt * dt)
    dv_body = mv(ri_t, vj - vi - g * dt)
    r = np.concatenate([r_rot, dp_body - d_pos, dv_body - d_vel, bgj - bgi, baj - bai], axis=1)

    jr_inv = right_jacobian_inv(r_rot)
    eye = np.broadcast_to(np.eye(3), (n, 3, 3))
    J_i = np.zeros((n, 15, 15))
    J_j = np.zeros((n, 15, 15))
    J_i[:, ROT, ROT] = -jr_inv @ np.swapaxes(Rj, 1, 2) @ Ri
    J_j[:, ROT, ROT] = jr_inv
    J_i[:, ROT, BG] = -jr_inv @ np.swapaxes(exp_so3(r_rot), 1, 2) @ right_jacobian(phi) @ j_rot_bg

    J_i[:, POS, ROT] = skew(dp_body)
    J_i[:, POS, POS] = -ri_t
    J_i[:, POS, VEL] = -ri_t * dt[:, :, None]
    J_i[:, POS, BG] = -j_pos_bg
    J_i[:, POS, BA] = -j_pos_ba
    J_j[:, POS, POS] = ri_t

    J_i[:, VEL, ROT] = skew(dv_body)
    J_i[:, VEL, VEL] = -ri_t
    J_i[:, VEL, BG] = -j_vel_bg
    J_i[:, VEL, BA] = -j_vel_ba
    J_j[:, VEL, VEL] = ri_t

    J_i[:, BG, BG] = -eye
    J_j[:, BG, BG] = eye
    J_i[:, BA, BA] = -eye
    J_j[:, BA, BA] = eye
    return r, J_i, J_j


def imu_residual(x_i: NavState, x_j: NavState, pim: PreintegratedImu, gravity):
    """15-dim residual ``[rot, pos, vel, bg, ba]`` between consecutive states.

    Returns ``(r, J_i, J_j)`` with 15x15 Jacobians w.r.t. each state tangent.
    """
    if abs(x_i.stamp - pim.start) > STAMP_TOLERANCE or abs(x_j.stamp - pim.end) > STAMP_TOLERANCE:
        raise ValueError(
            f"state stamps ({x_i.stamp:.6f}, {x_j.stamp:.6f}) do not match the preintegrated "
            f"interval ({pim.start:.6f}, {pim.end:.6f})"
        )
    arrays = [
        a[None]
        for a in (
            x_i.rotation, x_i.position, x_i.velocity, x_i.gyro_bias, x_i.accel_bias,
            x_j.rotation, x_j.position, x_j.velocity, x_j.gyro_bias, x_j.accel_bias,
        )
    ]
    r, J_i, J_j = imu_residual_batch(*arrays, [pim], gravity)
    return r[0], J_i[0], J_j[0]


__all__ = [
    "baro_residual",
    "doppler_residual",
    "doppler_residual_batch",
    "imu_residual",
    "imu_residual_batch",
    "prior_residual",
    "radar_velocity",
    "track_residual",
    "track_residual_batch",
]
