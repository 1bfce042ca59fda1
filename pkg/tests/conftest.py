"""Shared fixtures and hypothesis settings."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from brio.geometry import exp_so3
from brio.types import Calibration, NavState

settings.register_profile(
    "brio",
    deadline=None,
    derandomize=True,
    max_examples=100,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("brio")


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return exp_so3(axis * rng.uniform(0.0, np.pi - 1e-3))


def random_state(rng: np.random.Generator, stamp: float = 0.0) -> NavState:
    return NavState(
        rotation=random_rotation(rng),
        position=rng.normal(scale=5.0, size=3),
        velocity=rng.normal(scale=2.0, size=3),
        gyro_bias=rng.normal(scale=0.01, size=3),
        accel_bias=rng.normal(scale=0.1, size=3),
        stamp=stamp,
    )


def random_calibration(rng: np.random.Generator) -> Calibration:
    from brio.geometry import RigidTransform

    return Calibration(RigidTransform(random_rotation(rng), rng.normal(scale=0.2, size=3)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
