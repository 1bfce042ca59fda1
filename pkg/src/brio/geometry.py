"""Rotations on SO(3), rigid transforms on SE(3) and the manifold update.

Rotations are plain ``(3, 3)`` arrays mapping child-frame vectors into the
parent frame.  All so(3) helpers broadcast over leading axes, so a stack of
angle-axis vectors ``(N, 3)`` maps to a stack of matrices ``(N, 3, 3)``.

Orientation perturbations are right-multiplicative everywhere in the package:
``R <- R @ exp_so3(dtheta)``.  The 15-dim tangent of a navigation state is
ordered ``[rotation, position, velocity, gyro_bias, accel_bias]``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

# Rodrigues coefficients switch to Taylor series below this angle.
SMALL_ANGLE = 1e-8
# Jacobian coefficients cancel badly earlier; series are used below this.
JACOBIAN_SERIES_ANGLE = 1e-4
# log_so3 extracts the axis from the symmetric part above pi - NEAR_PI.
NEAR_PI = 1e-2

STATE_DIM = 15
ROT = slice(0, 3)
POS = slice(3, 6)
VEL = slice(6, 9)
BG = slice(9, 12)
BA = slice(12, 15)


def skew(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def vee(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return np.stack([m[..., 2, 1], m[..., 0, 2], m[..., 1, 0]], axis=-1)


def _angle(theta: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(theta * theta, axis=-1))


def exp_so3(theta: np.ndarray) -> np.ndarray:
    """Rodrigues formula, exact to second order at the origin."""
    theta = np.asarray(theta, dtype=float)
    angle = _angle(theta)[..., None, None]
    small = angle < SMALL_ANGLE
    safe = np.where(small, 1.0, angle)
    a = np.where(small, 1.0 - angle**2 / 6.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - angle**2 / 24.0, (1.0 - np.cos(safe)) / safe**2)
    k = skew(theta)
    return np.eye(3) + a * k + b * (k @ k)


def log_so3(rot: np.ndarray) -> np.ndarray:
    """Angle-axis vector of a rotation, angle in ``[0, pi]``.

    At exactly ``pi`` the axis is ambiguous up to sign; the branch taken
    returns the axis whose dominant component is positive.
    """
    rot = np.asarray(rot, dtype=float)
    w = 0.5 * vee(rot - np.swapaxes(rot, -1, -2))
    sin_a = _angle(w)
    cos_a = 0.5 * (np.trace(rot, axis1=-2, axis2=-1) - 1.0)
    angle = np.arctan2(sin_a, cos_a)

    small = angle < SMALL_ANGLE
    near_pi = angle > np.pi - NEAR_PI
    safe_sin = np.where(small | near_pi, 1.0, sin_a)
    scale = np.where(small, 1.0 + angle**2 / 6.0, angle / safe_sin)
    out = w * scale[..., None]

    if near_pi.ndim == 0:
        if near_pi:
            out = _log_near_pi(rot, w, angle, cos_a)
    else:
        for pos in map(tuple, np.argwhere(near_pi)):
            out[pos] = _log_near_pi(rot[pos], w[pos], angle[pos], cos_a[pos])
    return out


def _log_near_pi(rot, w, angle, cos_a):
    # (R + R^T)/2 - cos(a) I = (1 - cos(a)) u u^T; use the largest diagonal entry.
    b = 0.5 * (rot + rot.T) - cos_a * np.eye(3)
    k = int(np.argmax(np.diag(b)))
    axis = b[:, k] / np.sqrt(max(b[k, k], 1e-300))
    axis /= np.linalg.norm(axis)
    if axis @ w < 0.0 or (axis @ w == 0.0 and axis[k] < 0.0):
        axis = -axis
    return angle * axis


def _jacobian_coefficients(theta):
    angle = _angle(theta)[..., None, None]
    small = angle < JACOBIAN_SERIES_ANGLE
    safe = np.where(small, 1.0, angle)
    b = np.where(small, 0.5 - angle**2 / 24.0, (1.0 - np.cos(safe)) / safe**2)
    c = np.where(small, 1.0 / 6.0 - angle**2 / 120.0, (safe - np.sin(safe)) / safe**3)
    return angle, small, safe, b, c


def right_jacobian(theta: np.ndarray) -> np.ndarray:
    """Jr with ``exp(t + d) ~= exp(t) exp(Jr(t) d)``."""
    theta = np.asarray(theta, dtype=float)
    _, _, _, b, c = _jacobian_coefficients(theta)
    k = skew(theta)
    return np.eye(3) - b * k + c * (k @ k)


def right_jacobian_inv(theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    angle, small, safe, _, _ = _jacobian_coefficients(theta)
    d = np.where(
        small,
        1.0 / 12.0 + angle**2 / 720.0,
        1.0 / safe**2 - (1.0 + np.cos(safe)) / (2.0 * safe * np.sin(safe)),
    )
    k = skew(theta)
    return np.eye(3) + 0.5 * k + d * (k @ k)


def left_jacobian(theta: np.ndarray) -> np.ndarray:
    return right_jacobian(-np.asarray(theta, dtype=float))


def left_jacobian_inv(theta: np.ndarray) -> np.ndarray:
    return right_jacobian_inv(-np.asarray(theta, dtype=float))


def orthonormalize(rot: np.ndarray) -> np.ndarray:
    """Nearest rotation in Frobenius norm (polar decomposition)."""
    u, _, vt = np.linalg.svd(rot)
    det = np.linalg.det(u @ vt)
    fix = np.ones(np.shape(rot)[:-1])
    fix[..., -1] = det
    return (u * fix[..., None, :]) @ vt


def rot_x(angle: float) -> np.ndarray:
    return exp_so3(np.array([angle, 0.0, 0.0]))


def rot_y(angle: float) -> np.ndarray:
    return exp_so3(np.array([0.0, angle, 0.0]))


def rot_z(angle: float) -> np.ndarray:
    return exp_so3(np.array([0.0, 0.0, angle]))


def euler_zyx_to_matrix(roll, pitch, yaw) -> np.ndarray:
    """``Rz(yaw) Ry(pitch) Rx(roll)``, broadcasting over array inputs."""
    roll, pitch, yaw = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (roll, pitch, yaw)))
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    out = np.empty(roll.shape + (3, 3))
    out[..., 0, 0] = cy * cp
    out[..., 0, 1] = cy * sp * sr - sy * cr
    out[..., 0, 2] = cy * sp * cr + sy * sr
    out[..., 1, 0] = sy * cp
    out[..., 1, 1] = sy * sp * sr + cy * cr
    out[..., 1, 2] = sy * sp * cr - cy * sr
    out[..., 2, 0] = -sp
    out[..., 2, 1] = cp * sr
    out[..., 2, 2] = cp * cr
    return out


def heading(rot: np.ndarray) -> np.ndarray:
    """Yaw of the body x-axis projected on the horizontal plane, radians."""
    rot = np.asarray(rot, dtype=float)
    return np.arctan2(rot[..., 1, 0], rot[..., 0, 0])


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Hamilton quaternion ``(qx, qy, qz, qw)`` to rotation matrix."""
    q = np.asarray(q, dtype=float)
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    x, y, z, w = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    out = np.empty(q.shape[:-1] + (3, 3))
    out[..., 0, 0] = 1 - 2 * (y * y + z * z)
    out[..., 0, 1] = 2 * (x * y - z * w)
    out[..., 0, 2] = 2 * (x * z + y * w)
    out[..., 1, 0] = 2 * (x * y + z * w)
    out[..., 1, 1] = 1 - 2 * (x * x + z * z)
    out[..., 1, 2] = 2 * (y * z - x * w)
    out[..., 2, 0] = 2 * (x * z - y * w)
    out[..., 2, 1] = 2 * (y * z + x * w)
    out[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return out


def matrix_to_quat(rot: np.ndarray) -> np.ndarray:
    """Rotation matrix to ``(qx, qy, qz, qw)`` with ``qw >= 0``."""
    rot = np.asarray(rot, dtype=float)
    flat = rot.reshape(-1, 3, 3)
    out = np.empty((flat.shape[0], 4))
    for i, m in enumerate(flat):
        tr = np.trace(m)
        cands = np.array([tr, m[0, 0], m[1, 1], m[2, 2]])
        k = int(np.argmax(cands))
        if k == 0:
            s = 2.0 * np.sqrt(1.0 + tr)
            q = [(m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s, 0.25 * s]
        elif k == 1:
            s = 2.0 * np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2])
            q = [0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s, (m[2, 1] - m[1, 2]) / s]
        elif k == 2:
            s = 2.0 * np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2])
            q = [(m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s, (m[0, 2] - m[2, 0]) / s]
        else:
            s = 2.0 * np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1])
            q = [(m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s, (m[1, 0] - m[0, 1]) / s]
        q = np.asarray(q)
        if q[3] < 0:
            q = -q
        out[i] = q / np.linalg.norm(q)
    return out.reshape(rot.shape[:-2] + (4,))


@dataclass(frozen=True)
class RigidTransform:
    """Pose ``T_AB``: rotation ``R_AB`` and translation ``A_t_AB`` in meters."""

    rotation: np.ndarray = dataclasses.field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = dataclasses.field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float).reshape(3, 3))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float).reshape(3))

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return RigidTransform(
            self.rotation @ other.rotation, self.rotation @ other.translation + self.translation
        )

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points) @ self.rotation.T + self.translation

    def as_matrix(self) -> np.ndarray:
        out = np.eye(4)
        out[:3, :3] = self.rotation
        out[:3, 3] = self.translation
        return out

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "RigidTransform":
        m = np.asarray(m, dtype=float)
        return cls(m[:3, :3], m[:3, 3])


def retract(state, delta: np.ndarray):
    """Apply a 15-dim tangent update to a navigation state.

    Rotation is right-multiplied by ``exp_so3(delta[0:3])``; the remaining
    blocks are added.  Works for any dataclass exposing the NavState fields.
    """
    delta = np.asarray(delta, dtype=float)
    if delta.shape != (STATE_DIM,):
        raise ValueError(f"expected a {STATE_DIM}-vector, got shape {delta.shape}")
    if not np.all(np.isfinite(delta)):
        raise ValueError("non-finite state update")
    return dataclasses.replace(
        state,
        rotation=state.rotation @ exp_so3(delta[ROT]),
        position=state.position + delta[POS],
        velocity=state.velocity + delta[VEL],
        gyro_bias=state.gyro_bias + delta[BG],
        accel_bias=state.accel_bias + delta[BA],
    )


def local_coordinates(origin, state) -> np.ndarray:
    """Inverse of :func:`retract`: ``retract(origin, d) == state``."""
    return np.concatenate(
        [
            log_so3(origin.rotation.T @ state.rotation),
            state.position - origin.position,
            state.velocity - origin.velocity,
            state.gyro_bias - origin.gyro_bias,
            state.accel_bias - origin.accel_bias,
        ]
    )
