"""Solver and estimator configuration (JSON-loadable, unknown keys rejected)."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from brio.configio import from_dict, load_json, to_jsonable
from brio.losses import LossKind, RobustLoss
from brio.types import NoiseConfig

MARGINALIZATION_MODES = ("schur", "diagonal")


@dataclass
class SolverConfig:
    """IRLS / Levenberg-Marquardt settings.

    ``relative_tolerance`` stops the outer loop once an accepted step lowers
    the robust cost by less than this fraction or by less than
    ``absolute_tolerance`` (the cost is dimensionless, half a chi-square), or
    once the largest step component falls below ``step_tolerance``.
    Damping adds ``lambda * I`` to the whitened normal equations; scaling by
    ``diag(H)`` instead stalls on the very stiff bias random-walk blocks.
    """

    max_iterations: int = 20
    relative_tolerance: float = 1e-6
    step_tolerance: float = 1e-10
    absolute_tolerance: float = 1e-9
    initial_lambda: float = 1e-4
    lambda_up: float = 10.0
    lambda_down: float = 0.5
    max_lambda: float = 1e10
    doppler_loss: RobustLoss = field(default_factory=lambda: RobustLoss(LossKind.WELSCH))
    baro_loss: RobustLoss = field(default_factory=lambda: RobustLoss(LossKind.FAIR))
    noise: NoiseConfig = field(default_factory=NoiseConfig)

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        for name in ("relative_tolerance", "initial_lambda", "max_lambda"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not (self.lambda_up > 1 and 0 < self.lambda_down < 1):
            raise ValueError("need lambda_up > 1 and 0 < lambda_down < 1")


@dataclass
class EstimatorConfig:
    solver: SolverConfig = field(default_factory=SolverConfig)
    window_duration: float = 10.0
    discard_after: int = 5
    use_tracking: bool = True
    use_baro: bool = True
    marginalization: str = "schur"
    integration_scheme: str = "midpoint"
    init_duration: float = 1.0
    min_init_samples: int = 100
    max_init_accel_std: float = 0.3
    max_init_gyro_std: float = 0.1
    weak_condition: float = 1e3
    max_imu_gap: float = 0.1

    def __post_init__(self):
        if not self.window_duration > 0:
            raise ValueError("window_duration must be positive")
        if self.discard_after < 1:
            raise ValueError("discard_after must be at least 1")
        if self.marginalization not in MARGINALIZATION_MODES:
            raise ValueError(f"marginalization must be one of {', '.join(MARGINALIZATION_MODES)}")
        if self.min_init_samples < 1:
            raise ValueError("min_init_samples must be positive")
        if not self.max_imu_gap > 0:
            raise ValueError("max_imu_gap must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> "EstimatorConfig":
        return from_dict(cls, data)

    @classmethod
    def load(cls, path: str | Path) -> "EstimatorConfig":
        return from_dict(cls, load_json(path), "")

    def to_dict(self) -> dict:
        return to_jsonable(self)
