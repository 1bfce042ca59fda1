"""Offline driver: run the estimator over recorded IMU, radar and baro logs."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from brio.estimator.config import EstimatorConfig
from brio.estimator.core import Estimator, FrameResult
from brio.estimator.graph import EstimatorError
from brio.estimator.online import OnlineEstimator
from brio.types import BaroStream, Calibration, ImuStream, NavState, RadarFrame


@dataclass
class EstimationResult:
    """Online estimates (one per processed radar frame) plus diagnostics."""

    frames: list[FrameResult] = field(default_factory=list)
    initial_state: NavState | None = None
    h0: float = 0.0
    runtime_s: float = 0.0
    error: str | None = None
    estimator: Estimator | None = field(default=None, repr=False)

    @property
    def stamps(self) -> np.ndarray:
        return np.array([f.stamp for f in self.frames])

    @property
    def states(self) -> list[NavState]:
        return [f.state for f in self.frames]

    @property
    def positions(self) -> np.ndarray:
        return np.array([f.state.position for f in self.frames]).reshape(-1, 3)

    @property
    def velocities(self) -> np.ndarray:
        return np.array([f.state.velocity for f in self.frames]).reshape(-1, 3)

    @property
    def rotations(self) -> np.ndarray:
        return np.array([f.state.rotation for f in self.frames]).reshape(-1, 3, 3)


class EstimationFailed(RuntimeError):
    """Raised with the partial result computed before the failure."""

    def __init__(self, message: str, result: EstimationResult):
        super().__init__(message)
        self.result = result


def run_estimation(
    imu: ImuStream,
    frames: list[RadarFrame],
    baro: BaroStream | None,
    calibration: Calibration,
    config: EstimatorConfig | None = None,
    on_frame=None,
    threaded: bool = False,
) -> EstimationResult:
    """Initialize on the first ``init_duration`` seconds, then process every frame.

    The anchor state sits at the first radar frame at or after the end of
    the initialization interval; earlier frames are skipped.  ``on_frame`` is
    called with each :class:`FrameResult` after its solve.  ``threaded``
    runs the solves in a worker thread; the result is the same either way
    because frames are still solved one after another in stamp order.
    """
    config = config or EstimatorConfig()
    result = EstimationResult()
    if len(imu) == 0:
        raise EstimatorError("empty IMU log")
    frames = sorted(frames, key=lambda f: f.stamp)
    init_end = imu.stamps[0] + config.init_duration
    start = next((k for k, f in enumerate(frames) if f.stamp >= init_end - 1e-9), None)
    if start is None:
        raise EstimatorError(f"no radar frame after the {config.init_duration} s initialization interval")
    t0 = frames[start].stamp
    burst = imu[imu.stamps <= t0 + 1e-9]
    baro_burst = None
    use_baro = config.use_baro and baro is not None and len(baro) > 0
    if use_baro:
        mask = baro.stamps <= t0 + 1e-9
        idx = np.flatnonzero(mask) if np.any(mask) else [0]
        baro_burst = [baro.sample(i) for i in idx]

    est = Estimator(calibration, config)
    tic = time.perf_counter()
    try:
        result.initial_state = est.initialize(burst, baro_burst, stamp=t0)
    except EstimatorError as exc:
        raise EstimationFailed(f"initialization failed: {exc}", result) from exc
    result.h0 = est.graph.h0
    result.estimator = est

    online = OnlineEstimator(est, threaded=threaded, on_frame=on_frame)
    prev = t0
    current = frames[start]
    try:
        for frame in frames[start:]:
            current = frame
            sample = baro.sample(baro.nearest(frame.stamp)) if use_baro else None
            online.submit(frame, imu.covering(prev, frame.stamp), sample)
            prev = frame.stamp
        online.close()
    except (EstimatorError, ValueError, np.linalg.LinAlgError) as exc:
        result.runtime_s = time.perf_counter() - tic
        result.frames = [r for r in est.results if r.iterations > 0]
        failed = est.results[-1] if threaded and est.results else None
        where = failed or current
        result.error = f"frame {where.frame_id} at t={where.stamp:.3f}: {exc}"
        raise EstimationFailed(result.error, result) from exc
    result.runtime_s = time.perf_counter() - tic
    result.frames = list(est.results)
    return result
