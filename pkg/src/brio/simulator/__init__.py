"""Synthetic radar, IMU and barometer data with exact ground truth."""

from brio.simulator.scenario import (
    BaroConfig,
    BaroEvent,
    CalibrationConfig,
    ImuConfig,
    MoverConfig,
    RadarConfig,
    Scenario,
    TargetConfig,
)
from brio.simulator.sensors import (
    GroundTruth,
    RadarSimulator,
    SimulationResult,
    generate_baro,
    generate_ground_truth,
    generate_imu,
    generate_radar_frame,
    simulate,
    true_state,
)
from brio.simulator.trajectory import KinematicSample, Trajectory, TrajectoryConfig

__all__ = [
    "BaroConfig",
    "BaroEvent",
    "CalibrationConfig",
    "GroundTruth",
    "ImuConfig",
    "KinematicSample",
    "MoverConfig",
    "RadarConfig",
    "RadarSimulator",
    "Scenario",
    "SimulationResult",
    "TargetConfig",
    "Trajectory",
    "TrajectoryConfig",
    "generate_baro",
    "generate_ground_truth",
    "generate_imu",
    "generate_radar_frame",
    "simulate",
    "true_state",
]
