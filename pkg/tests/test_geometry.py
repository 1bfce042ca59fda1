import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.spatial.transform import Rotation as SciRotation

from brio.geometry import (
    RigidTransform,
    euler_zyx_to_matrix,
    exp_so3,
    heading,
    left_jacobian,
    local_coordinates,
    log_so3,
    matrix_to_quat,
    orthonormalize,
    quat_to_matrix,
    retract,
    right_jacobian,
    right_jacobian_inv,
    rot_z,
    skew,
    vee,
)
from brio.types import NavState

from conftest import random_rotation, random_state

finite = st.floats(-1e3, 1e3, allow_nan=False)
vec3 = arrays(np.float64, 3, elements=st.floats(-1.0, 1.0, allow_nan=False))
ball = arrays(np.float64, 3, elements=st.floats(-1.8, 1.8, allow_nan=False)).filter(
    lambda v: np.linalg.norm(v) < np.pi - 1e-3
)


def taylor_expm(a: np.ndarray, terms: int = 20) -> np.ndarray:
    out = np.eye(3)
    term = np.eye(3)
    for k in range(1, terms):
        term = term @ a / k
        out = out + term
    return out


# -- exp / log -----------------------------------------------------------------


def test_exp_zero_is_identity():
    assert np.array_equal(exp_so3(np.zeros(3)), np.eye(3))


def test_exp_quarter_turn_maps_x_to_y():
    R = exp_so3(np.array([0.0, 0.0, np.pi / 2]))
    assert np.allclose(R @ [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], atol=1e-15)


def test_exp_matches_taylor_series():
    theta = np.array([0.3, -0.2, 0.1])
    assert np.abs(exp_so3(theta) - taylor_expm(skew(theta))).max() < 1e-12


def test_exp_small_angle_branch_continuous():
    for eps in (1e-12, 1e-9, 1e-8, 1e-7):
        theta = eps * np.array([0.6, -0.8, 0.0])
        assert np.abs(exp_so3(theta) - taylor_expm(skew(theta))).max() < 1e-15


def test_log_identity_is_zero():
    assert np.array_equal(log_so3(np.eye(3)), np.zeros(3))


def test_log_roundtrip_example():
    v = np.array([0.1, 0.2, 0.3])
    assert np.abs(log_so3(exp_so3(v)) - v).max() < 1e-10


def test_log_near_pi_matches_quaternion_oracle():
    angle = np.pi - 1e-4
    R = SciRotation.from_rotvec([0.0, 0.0, angle]).as_matrix()
    w = log_so3(R)
    assert abs(np.linalg.norm(w) - angle) < 1e-8
    assert np.abs(w - SciRotation.from_matrix(R).as_rotvec()).max() < 1e-8


def test_log_at_pi_returns_angle_pi():
    for axis in np.eye(3):
        R = exp_so3(np.pi * axis)
        w = log_so3(R)
        assert abs(np.linalg.norm(w) - np.pi) < 1e-9
        assert np.abs(exp_so3(w) - R).max() < 1e-9


@given(ball)
def test_exp_log_inverse_on_ball(v):
    assert np.abs(log_so3(exp_so3(v)) - v).max() < 1e-9


@given(arrays(np.float64, 3, elements=st.floats(-3.0, 3.0, allow_nan=False)))
def test_log_exp_inverse(v):
    if np.linalg.norm(v) >= np.pi - 1e-6:
        v = v / np.linalg.norm(v) * (np.pi - 1e-3)
    R = exp_so3(v)
    assert np.abs(exp_so3(log_so3(R)) - R).max() < 1e-9


def test_exp_log_broadcast_over_stacks(rng):
    v = rng.normal(scale=0.5, size=(7, 3))
    R = exp_so3(v)
    assert R.shape == (7, 3, 3)
    assert np.allclose(log_so3(R), v, atol=1e-12)
    assert np.allclose(R[3], exp_so3(v[3]))


def test_skew_vee_roundtrip(rng):
    v = rng.normal(size=3)
    assert np.array_equal(vee(skew(v)), v)
    w = rng.normal(size=3)
    assert np.allclose(skew(v) @ w, np.cross(v, w))


# -- group properties -----------------------------------------------------------


def test_group_axioms_on_random_rotations(rng):
    Rs = [random_rotation(rng) for _ in range(1000)]
    for a, b, c in zip(Rs[0::3], Rs[1::3], Rs[2::3]):
        ab = a @ b
        assert np.abs(ab.T @ ab - np.eye(3)).max() < 1e-9
        assert abs(np.linalg.det(ab) - 1.0) < 1e-9
        assert np.abs((a @ b) @ c - a @ (b @ c)).max() < 1e-9
        assert np.abs(a @ a.T - np.eye(3)).max() < 1e-12


@given(vec3, arrays(np.float64, 3, elements=finite))
def test_rotation_preserves_norm(theta, v):
    R = exp_so3(theta)
    assert abs(np.linalg.norm(R @ v) - np.linalg.norm(v)) <= 1e-12 * max(1.0, np.linalg.norm(v))


def test_long_composition_chain_stays_orthonormal(rng):
    R = np.eye(3)
    steps = exp_so3(rng.normal(scale=0.05, size=(10_000, 3)))
    for k, step in enumerate(steps):
        R = R @ step
        if k % 100 == 99:
            R = orthonormalize(R)
    assert np.linalg.norm(R.T @ R - np.eye(3)) < 1e-9
    assert abs(np.linalg.det(R) - 1.0) < 1e-9


def test_orthonormalize_projects_to_nearest_rotation(rng):
    R = random_rotation(rng)
    noisy = R + 1e-6 * rng.normal(size=(3, 3))
    P = orthonormalize(noisy)
    assert np.abs(P.T @ P - np.eye(3)).max() < 1e-14
    assert np.abs(P - R).max() < 1e-5


def test_rigid_transform_composition_associative(rng):
    Ts = [RigidTransform(random_rotation(rng), rng.normal(size=3)) for _ in range(3)]
    left = ((Ts[0] @ Ts[1]) @ Ts[2]).as_matrix()
    right = (Ts[0] @ (Ts[1] @ Ts[2])).as_matrix()
    assert np.abs(left - right).max() < 1e-9


def test_rigid_transform_inverse_and_apply(rng):
    T = RigidTransform(random_rotation(rng), rng.normal(size=3))
    p = rng.normal(size=(5, 3))
    assert np.allclose(T.inverse().apply(T.apply(p)), p)
    assert np.allclose((T @ T.inverse()).as_matrix(), np.eye(4))
    assert np.allclose(RigidTransform.from_matrix(T.as_matrix()).as_matrix(), T.as_matrix())


# -- Jacobians --------------------------------------------------------------------


def test_right_jacobian_first_order(rng):
    theta = rng.normal(scale=0.7, size=3)
    d = 1e-7 * rng.normal(size=3)
    lhs = exp_so3(theta + d)
    rhs = exp_so3(theta) @ exp_so3(right_jacobian(theta) @ d)
    assert np.abs(lhs - rhs).max() < 1e-12
    assert np.allclose(right_jacobian_inv(theta) @ right_jacobian(theta), np.eye(3), atol=1e-12)
    assert np.allclose(left_jacobian(theta), right_jacobian(-theta), atol=1e-14)


def test_jacobians_at_tiny_angles():
    for eps in (0.0, 1e-10, 1e-6, 1e-4, 1e-3):
        theta = eps * np.array([0.0, 0.6, 0.8])
        Jr = right_jacobian(theta)
        assert np.allclose(Jr, np.eye(3) - 0.5 * skew(theta), atol=1e-7)
        assert np.allclose(right_jacobian_inv(theta) @ Jr, np.eye(3), atol=1e-12)


# -- quaternions and Euler -----------------------------------------------------------


def test_quaternion_roundtrip_against_scipy(rng):
    for _ in range(50):
        R = random_rotation(rng)
        q = matrix_to_quat(R)
        q_ref = SciRotation.from_matrix(R).as_quat()  # (x, y, z, w)
        assert min(np.abs(q - q_ref).max(), np.abs(q + q_ref).max()) < 1e-12
        assert np.abs(quat_to_matrix(q) - R).max() < 1e-12


def test_euler_zyx_and_heading():
    R = euler_zyx_to_matrix(0.1, -0.2, 0.7)
    ref = SciRotation.from_euler("ZYX", [0.7, -0.2, 0.1]).as_matrix()
    assert np.abs(R - ref).max() < 1e-14
    assert math.isclose(float(heading(rot_z(1.2))), 1.2, abs_tol=1e-14)


# -- retraction ---------------------------------------------------------------------


def test_retract_zero_is_identity(rng):
    x = random_state(rng)
    y = retract(x, np.zeros(15))
    for name in ("rotation", "position", "velocity", "gyro_bias", "accel_bias"):
        assert np.array_equal(getattr(x, name), getattr(y, name))


def test_retract_translation():
    d = np.zeros(15)
    d[3] = 1.0
    assert np.array_equal(retract(NavState(), d).position, [1.0, 0.0, 0.0])


def test_retract_is_right_multiplicative(rng):
    x = random_state(rng)
    d = np.zeros(15)
    d[:3] = [0.1, -0.2, 0.05]
    assert np.allclose(retract(x, d).rotation, x.rotation @ exp_so3(d[:3]), atol=1e-15)


def test_retract_rejects_non_finite():
    d = np.zeros(15)
    d[4] = np.nan
    with pytest.raises(ValueError):
        retract(NavState(), d)
    with pytest.raises(ValueError):
        retract(NavState(), np.zeros(14))


@given(
    arrays(np.float64, 15, elements=st.floats(-10.0, 10.0, allow_nan=False)),
    st.integers(0, 2**31 - 1),
)
def test_local_coordinates_inverts_retract(d, seed):
    rot = d[:3]
    if np.linalg.norm(rot) >= 1.0:
        d = d.copy()
        d[:3] = rot / np.linalg.norm(rot) * 0.99
    x = random_state(np.random.default_rng(seed))
    assert np.abs(local_coordinates(x, retract(x, d)) - d).max() < 1e-9
