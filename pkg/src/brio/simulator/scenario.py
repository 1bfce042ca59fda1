"""Scenario configuration for the synthetic sensor bed."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from brio.configio import from_dict
from brio.geometry import RigidTransform, matrix_to_quat, quat_to_matrix
from brio.simulator.trajectory import TrajectoryConfig
from brio.types import Calibration, forward_looking_radar_rotation


@dataclass
class TargetConfig:
    """Static reflectors.

    Without explicit ``points``, ``count`` targets are scattered around the
    path: each picks a random path point and sits ``min_distance`` to
    ``max_distance`` meters away, within ``max_elevation_deg`` of the horizon.
    """

    count: int = 60
    min_distance: float = 2.0
    max_distance: float = 9.0
    max_elevation_deg: float = 40.0
    rcs_db_range: list[float] = field(default_factory=lambda: [0.0, 20.0])
    points: list[list[float]] | None = None
    rcs_db: list[float] | None = None

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("target count must be non-negative")
        if self.points is not None:
            pts = np.asarray(self.points, dtype=float)
            if pts.ndim != 2 or pts.shape[1] != 3:
                raise ValueError("targets.points must be a list of [x, y, z]")
            if self.rcs_db is not None and len(self.rcs_db) != len(pts):
                raise ValueError("targets.rcs_db must match targets.points in length")


@dataclass
class MoverConfig:
    """A rigid cluster of scatterers moving at constant world velocity."""

    start: list[float]
    velocity: list[float]
    t_start: float = 0.0
    t_end: float | None = None
    points: int = 4
    extent: list[float] = field(default_factory=lambda: [2.0, 0.4, 1.0])
    rcs_db: float = 15.0


@dataclass
class RadarConfig:
    rate: float = 8.0
    max_range: float = 10.95
    min_range: float = 0.3
    max_radial_velocity: float = 2.56
    doppler_resolution: float = 0.04
    quantize: bool = False
    fov_azimuth_deg: float = 60.0
    fov_elevation_deg: float = 40.0
    cfar_threshold_db: float = 15.0
    noise_floor_db: float = 30.0
    sigma_doppler: float = 0.05
    sigma_position: float = 0.02
    elevation_bias_deg: float = 0.0
    ghost_rate: float = 0.0

    def __post_init__(self):
        if not (self.rate > 0 and self.max_range > 0 and self.max_radial_velocity > 0):
            raise ValueError("radar rate, max_range and max_radial_velocity must be positive")


@dataclass
class ImuConfig:
    rate: float = 400.0
    gyro_noise_density: float = 2.5e-4
    accel_noise_density: float = 1.8e-3
    gyro_bias: list[float] = field(default_factory=lambda: [0.002, -0.003, 0.001])
    accel_bias: list[float] = field(default_factory=lambda: [0.0, 0.0, 0.0])
    gyro_bias_random_walk: float = 0.0
    accel_bias_random_walk: float = 0.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("imu rate must be positive")


@dataclass
class BaroEvent:
    """Ground-effect style transient: raised-cosine pressure bump."""

    t: float
    duration: float
    pressure_delta_pa: float


@dataclass
class BaroConfig:
    rate: float = 50.0
    sigma_altitude: float = 0.2
    start_altitude: float = 400.0
    events: list[BaroEvent] = field(default_factory=list)

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("baro rate must be positive")


@dataclass
class CalibrationConfig:
    q_BR: list[float] = field(default_factory=lambda: matrix_to_quat(forward_looking_radar_rotation()).tolist())
    t_BR: list[float] = field(default_factory=lambda: [0.1, 0.0, -0.03])

    def calibration(self) -> Calibration:
        return Calibration(RigidTransform(quat_to_matrix(np.asarray(self.q_BR)), self.t_BR))


@dataclass
class Scenario:
    duration: float
    trajectory: TrajectoryConfig
    name: str = "scenario"
    seed: int = 0
    noiseless: bool = False
    targets: TargetConfig = field(default_factory=TargetConfig)
    movers: list[MoverConfig] = field(default_factory=list)
    radar: RadarConfig = field(default_factory=RadarConfig)
    imu: ImuConfig = field(default_factory=ImuConfig)
    baro: BaroConfig = field(default_factory=BaroConfig)
    calibration: CalibrationConfig = field(default_factory=CalibrationConfig)

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("duration must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        return from_dict(cls, data)
