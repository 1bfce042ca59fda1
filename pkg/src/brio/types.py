"""Measurement and state containers shared by factors, estimator and simulator."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from brio.geometry import RigidTransform, rot_z

GRAVITY = np.array([0.0, 0.0, -9.81])


def _vec3(value) -> np.ndarray:
    out = np.asarray(value, dtype=float).reshape(3)
    return out


@dataclass(frozen=True)
class NavState:
    """IMU pose, inertial-frame velocity and IMU biases at one radar stamp."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gyro_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))
    accel_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))
    stamp: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float).reshape(3, 3))
        for name in ("position", "velocity", "gyro_bias", "accel_bias"):
            object.__setattr__(self, name, _vec3(getattr(self, name)))
        object.__setattr__(self, "stamp", float(self.stamp))

    @property
    def pose(self) -> RigidTransform:
        return RigidTransform(self.rotation, self.position)

    def replace(self, **changes) -> "NavState":
        return dataclasses.replace(self, **changes)

    def is_finite(self) -> bool:
        return all(
            np.all(np.isfinite(a))
            for a in (self.rotation, self.position, self.velocity, self.gyro_bias, self.accel_bias)
        )


@dataclass(frozen=True)
class RadarDetection:
    """One CFAR target: position in the radar frame plus Doppler, SNR, noise.

    ``doppler`` is negative for targets the radar approaches.  ``label`` is the
    simulator's hidden ground-truth class (``static``, ``mover``, ``ghost``) and
    empty for real data.
    """

    position: np.ndarray
    doppler: float
    snr: float = 0.0
    noise: float = 0.0
    stamp: float = 0.0
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "position", _vec3(self.position))
        if not np.linalg.norm(self.position) > 0:
            raise ValueError("radar detection at zero range")

    @property
    def range(self) -> float:
        return float(np.linalg.norm(self.position))

    @property
    def bearing(self) -> np.ndarray:
        return self.position / np.linalg.norm(self.position)


@dataclass(frozen=True)
class ImuSample:
    angular_velocity: np.ndarray
    linear_acceleration: np.ndarray
    stamp: float

    def __post_init__(self):
        object.__setattr__(self, "angular_velocity", _vec3(self.angular_velocity))
        object.__setattr__(self, "linear_acceleration", _vec3(self.linear_acceleration))


@dataclass(frozen=True)
class BaroSample:
    pressure: float
    stamp: float

    def __post_init__(self):
        if not self.pressure > 0:
            raise ValueError("pressure must be positive")


def forward_looking_radar_rotation() -> np.ndarray:
    """``R_BR`` for a radar whose boresight (radar y) looks along body x.

    Radar x (positive azimuth) maps to body -y and radar z (positive
    elevation) to body z.
    """
    return rot_z(-np.pi / 2)


@dataclass(frozen=True)
class Calibration:
    """IMU-to-radar extrinsics ``T_BR`` and the inertial gravity vector."""

    T_BR: RigidTransform = field(default_factory=RigidTransform)
    gravity: np.ndarray = field(default_factory=lambda: GRAVITY.copy())

    def __post_init__(self):
        object.__setattr__(self, "gravity", _vec3(self.gravity))

    @property
    def R_BR(self) -> np.ndarray:
        return self.T_BR.rotation

    @property
    def t_BR(self) -> np.ndarray:
        return self.T_BR.translation

    @classmethod
    def forward_looking(cls, lever_arm=(0.0, 0.0, 0.0)) -> "Calibration":
        return cls(RigidTransform(forward_looking_radar_rotation(), lever_arm))


@dataclass
class NoiseConfig:
    """Measurement and process noise.  All defaults are tunables.

    IMU densities are continuous-time (``rad/s/sqrt(Hz)``, ``m/s^2/sqrt(Hz)``),
    bias random walks are per ``sqrt(s)``.  Prior sigmas are per axis; the
    rotation prior is ``(roll, pitch, yaw)`` about body axes.
    """

    sigma_doppler: float = 0.05
    sigma_baro: float = 0.2
    track_covariance: np.ndarray = field(default_factory=lambda: np.diag([0.1**2] * 3))
    gyro_noise_density: float = 5e-4
    accel_noise_density: float = 2e-3
    gyro_bias_random_walk: float = 1e-5
    accel_bias_random_walk: float = 1e-4
    prior_rotation: np.ndarray = field(default_factory=lambda: np.array([0.01, 0.01, 0.01]))
    prior_position: np.ndarray = field(default_factory=lambda: np.full(3, 1e-3))
    prior_velocity: np.ndarray = field(default_factory=lambda: np.full(3, 0.05))
    prior_gyro_bias: np.ndarray = field(default_factory=lambda: np.full(3, 5e-4))
    prior_accel_bias: np.ndarray = field(default_factory=lambda: np.full(3, 0.1))

    def __post_init__(self):
        self.track_covariance = np.asarray(self.track_covariance, dtype=float)
        if self.track_covariance.shape == (3,):
            self.track_covariance = np.diag(self.track_covariance**2)
        for name in ("prior_rotation", "prior_position", "prior_velocity", "prior_gyro_bias", "prior_accel_bias"):
            value = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (3,)).copy()
            setattr(self, name, value)
        self.validate()

    def validate(self) -> None:
        scalars = (
            "sigma_doppler",
            "sigma_baro",
            "gyro_noise_density",
            "accel_noise_density",
            "gyro_bias_random_walk",
            "accel_bias_random_walk",
        )
        for name in scalars:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        cov = self.track_covariance
        if cov.shape != (3, 3) or not np.allclose(cov, cov.T) or np.any(np.linalg.eigvalsh(cov) <= 0):
            raise ValueError("track_covariance must be a symmetric positive definite 3x3 matrix")
        for name in ("prior_rotation", "prior_position", "prior_velocity", "prior_gyro_bias", "prior_accel_bias"):
            if np.any(getattr(self, name) <= 0):
                raise ValueError(f"{name} must be positive")

    def prior_sigmas(self) -> np.ndarray:
        return np.concatenate(
            [self.prior_rotation, self.prior_position, self.prior_velocity, self.prior_gyro_bias, self.prior_accel_bias]
        )


@dataclass
class ImuStream:
    """Columnar IMU log: ``stamps (N,)``, ``gyro (N, 3)``, ``accel (N, 3)``."""

    stamps: np.ndarray
    gyro: np.ndarray
    accel: np.ndarray

    def __post_init__(self):
        self.stamps = np.asarray(self.stamps, dtype=float).reshape(-1)
        self.gyro = np.asarray(self.gyro, dtype=float).reshape(-1, 3)
        self.accel = np.asarray(self.accel, dtype=float).reshape(-1, 3)
        if not (len(self.stamps) == len(self.gyro) == len(self.accel)):
            raise ValueError("IMU columns differ in length")

    def __len__(self) -> int:
        return len(self.stamps)

    def __getitem__(self, item) -> "ImuStream":
        if isinstance(item, (int, np.integer)):
            item = slice(item, item + 1 if item != -1 else None)
        return ImuStream(self.stamps[item], self.gyro[item], self.accel[item])

    @classmethod
    def from_samples(cls, samples: "Sequence[ImuSample] | ImuStream") -> "ImuStream":
        if isinstance(samples, ImuStream):
            return samples
        samples = list(samples)
        if not samples:
            return cls(np.zeros(0), np.zeros((0, 3)), np.zeros((0, 3)))
        return cls(
            np.array([s.stamp for s in samples]),
            np.array([s.angular_velocity for s in samples]),
            np.array([s.linear_acceleration for s in samples]),
        )

    def samples(self) -> list[ImuSample]:
        return [ImuSample(w, a, t) for t, w, a in zip(self.stamps, self.gyro, self.accel)]

    def covering(self, t0: float, t1: float) -> "ImuStream":
        """Samples spanning ``[t0, t1]``, plus one neighbour on each side."""
        lo = max(int(np.searchsorted(self.stamps, t0, side="right")) - 1, 0)
        hi = min(int(np.searchsorted(self.stamps, t1, side="left")) + 1, len(self))
        return self[lo:hi]

    def nearest_gyro(self, t: float) -> np.ndarray:
        """Zero-order-hold lookup: gyro sample closest in time to ``t``."""
        if len(self) == 0:
            raise ValueError("empty IMU stream")
        i = int(np.searchsorted(self.stamps, t))
        if i == len(self):
            i -= 1
        elif i > 0 and t - self.stamps[i - 1] <= self.stamps[i] - t:
            i -= 1
        return self.gyro[i]


@dataclass
class BaroStream:
    """Columnar barometer log: ``stamps (N,)`` and ``pressure (N,)`` in Pa."""

    stamps: np.ndarray
    pressure: np.ndarray

    def __post_init__(self):
        self.stamps = np.asarray(self.stamps, dtype=float).reshape(-1)
        self.pressure = np.asarray(self.pressure, dtype=float).reshape(-1)
        if len(self.stamps) != len(self.pressure):
            raise ValueError("baro columns differ in length")
        if np.any(self.pressure <= 0):
            raise ValueError("pressure must be positive")

    def __len__(self) -> int:
        return len(self.stamps)

    def nearest(self, t: float) -> int:
        """Index of the sample closest to ``t`` (ties go to the earlier one)."""
        if len(self) == 0:
            raise ValueError("empty baro stream")
        i = int(np.searchsorted(self.stamps, t))
        if i == len(self):
            return i - 1
        if i > 0 and t - self.stamps[i - 1] <= self.stamps[i] - t:
            return i - 1
        return i

    def sample(self, i: int) -> BaroSample:
        return BaroSample(float(self.pressure[i]), float(self.stamps[i]))


def detections_to_arrays(detections: Sequence[RadarDetection]):
    """Stack a frame into ``(positions (n,3), doppler (n,), snr, noise)``."""
    n = len(detections)
    pos = np.array([d.position for d in detections]).reshape(n, 3)
    dop = np.array([d.doppler for d in detections], dtype=float)
    snr = np.array([d.snr for d in detections], dtype=float)
    noise = np.array([d.noise for d in detections], dtype=float)
    return pos, dop, snr, noise


@dataclass
class RadarFrame:
    """All detections of one radar scan."""

    stamp: float
    detections: list[RadarDetection] = field(default_factory=list)
    frame_id: int = 0

    def __len__(self) -> int:
        return len(self.detections)
