"""Sliding-window MAP estimator: tracking, factor graph, IRLS solver, driver."""

from brio.estimator.config import EstimatorConfig, SolverConfig
from brio.estimator.core import Estimator, FrameResult, bearing_observability, initialize, predict
from brio.estimator.graph import EstimatorError, FactorGraph, FrameRecord, MarginalPrior, Problem
from brio.estimator.online import OnlineEstimator
from brio.estimator.pipeline import EstimationFailed, EstimationResult, run_estimation
from brio.estimator.solver import SolveReport, solve_problem
from brio.estimator.tracking import ZeroVelocityTrack, associate_tracks

__all__ = [
    "EstimationFailed",
    "EstimationResult",
    "Estimator",
    "EstimatorConfig",
    "EstimatorError",
    "FactorGraph",
    "FrameRecord",
    "FrameResult",
    "MarginalPrior",
    "OnlineEstimator",
    "Problem",
    "SolveReport",
    "SolverConfig",
    "ZeroVelocityTrack",
    "associate_tracks",
    "bearing_observability",
    "initialize",
    "predict",
    "run_estimation",
    "solve_problem",
]
