"""Radar-inertial-barometric odometry: factors, sliding-window estimator,
simulator and trajectory metrics."""

__version__ = "0.1.0"
