"""Shared helpers for the experiment runners."""

from __future__ import annotations

import argparse
import json

import numpy as np

from brio.estimator import EstimatorConfig, run_estimation


def parser(description: str, seeds: list[int]) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--seeds", type=int, nargs="+", default=seeds, help="scenario seeds")
    p.add_argument("--json", help="also write the results as JSON")
    return p


def estimate(sim, config: EstimatorConfig | None = None, frames=None):
    return run_estimation(sim.imu, sim.radar if frames is None else frames, sim.baro, sim.calibration, config or EstimatorConfig())


def dump(path: str | None, rows: list[dict]) -> None:
    if path:
        with open(path, "w") as f:
            json.dump(rows, f, indent=2, default=float)


def excursion(a, b) -> float:
    return float(np.linalg.norm(a - b, axis=1).max())
