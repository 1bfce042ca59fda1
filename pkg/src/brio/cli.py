"""``brio`` command line: simulate, estimate, evaluate, plotdata.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
Set ``BRIO_LOG_LEVEL`` (e.g. ``DEBUG``) for progress logging on stderr.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import math
import os
import re
import sys
from pathlib import Path

import numpy as np

from brio import __version__
from brio.configio import ConfigError, load_json, to_jsonable
from brio.estimator import EstimationFailed, EstimatorConfig, EstimatorError, run_estimation
from brio.io import (
    BARO_FILE,
    CALIBRATION_FILE,
    GROUNDTRUTH_FILE,
    IMU_FILE,
    MANIFEST_FILE,
    RADAR_FILE,
    FormatError,
    SensorLogBundle,
    write_baro,
    write_calibration,
    write_imu,
    write_json,
    write_radar,
)
from brio.losses import LossKind, RobustLoss
from brio.metrics import MetricsError, Trajectory, evaluate, read_tum, write_tum
from brio.simulator import Scenario, simulate
from brio.simulator.presets import PRESETS, preset

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2
PLOT_KINDS = ("residual-histogram", "velocity-trace", "pointcloud")
WEIGHT_BINS = np.linspace(0.0, 1.0, 11)
LOSS_NAMES = [k.value for k in LossKind]

log = logging.getLogger("brio")


class UsageError(Exception):
    """Bad arguments or unreadable inputs; exit code 2."""


# -- helpers -------------------------------------------------------------------------


def _locate_key(text: str, message: str) -> int:
    """Line of the key a config error is about.

    Unknown keys are searched first, then the named path from its deepest
    key upwards (a missing key is not in the file, but its parent is).
    Falls back to line 1, the root object.
    """
    keys = []
    unknown = re.search(r"unknown key\(s\) (.*)$", message)
    if unknown:
        keys += [k.strip() for k in unknown.group(1).split(",")]
    m = re.search(r"'([\w.\[\]]+)'", message) or re.match(r"([\w.\[\]]+):", message)
    if m:
        keys += reversed([k for k in re.split(r"[.\[\]]", m.group(1)) if k and not k.isdigit()])
    lines = text.splitlines()
    for key in keys:
        for lineno, line in enumerate(lines, 1):
            if f'"{key}"' in line:
                return lineno
    return 1


def _config_error(path: Path, exc: ConfigError) -> UsageError:
    msg = str(exc)
    if msg.startswith(str(path)):
        return UsageError(msg)
    try:
        return UsageError(f"{path}:{_locate_key(path.read_text(), msg)}: {msg}")
    except OSError:
        return UsageError(f"{path}: {msg}")


def _load_scenario(path: Path) -> Scenario:
    data = load_json(path)
    try:
        return Scenario.from_dict(data)
    except ConfigError as exc:
        raise _config_error(path, exc) from exc


def _load_config(path: Path | None) -> EstimatorConfig:
    if path is None:
        return EstimatorConfig()
    try:
        return EstimatorConfig.load(path)
    except ConfigError as exc:
        raise _config_error(Path(path), exc) from exc


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _finite(x):
    """JSON-safe float: non-finite values become ``null``."""
    x = float(x)
    return x if math.isfinite(x) else None


def _write_rows(out, columns, rows) -> None:
    fh = open(out, "w", newline="") if out not in (None, "-") else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([format(v, ".9g") if isinstance(v, float) else v for v in row])
    finally:
        if fh is not sys.stdout:
            fh.close()


# -- simulate ------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    if (args.scenario is None) == (args.preset is None):
        raise UsageError("give exactly one of SCENARIO or --preset")
    scenario = preset(args.preset) if args.preset else _load_scenario(Path(args.scenario))
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.duration is not None:
        changes["duration"] = args.duration
    if changes:
        try:
            scenario = dataclasses.replace(scenario, **changes)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log.info("simulating %s (%.1f s, seed %d)", scenario.name, scenario.duration, scenario.seed)
    sim = simulate(scenario)

    write_imu(out / IMU_FILE, sim.imu)
    write_radar(out / RADAR_FILE, sim.radar)
    write_baro(out / BARO_FILE, sim.baro)
    write_calibration(out / CALIBRATION_FILE, sim.calibration)
    gt = sim.ground_truth
    write_tum(out / GROUNDTRUTH_FILE, Trajectory(gt.stamps, gt.position, gt.rotation))
    files = [IMU_FILE, RADAR_FILE, BARO_FILE, CALIBRATION_FILE, GROUNDTRUTH_FILE]
    manifest = {
        "generator": f"brio {__version__}",
        "schema_version": 1,
        "seed": scenario.seed,
        "scenario": to_jsonable(scenario),
        "rates_hz": {"imu": scenario.imu.rate, "radar": scenario.radar.rate, "baro": scenario.baro.rate},
        "counts": {
            "imu_samples": len(sim.imu),
            "radar_frames": len(sim.radar),
            "radar_detections": sum(len(f) for f in sim.radar),
            "baro_samples": len(sim.baro),
        },
        "sha256": {name: _sha256(out / name) for name in files},
    }
    write_json(out / MANIFEST_FILE, manifest)
    print(f"wrote {out} ({len(sim.imu)} IMU samples, {len(sim.radar)} radar frames)")
    return EXIT_OK


# -- estimate ------------------------------------------------------------------------


def _diagnostics(result, config: EstimatorConfig, status: str, timing: bool) -> dict:
    frames = [f for f in result.frames if f.iterations > 0]
    weights = np.concatenate([f.weights for f in frames]) if frames else np.zeros(0)
    counts, _ = np.histogram(weights, bins=WEIGHT_BINS)
    per_frame = []
    for f in frames:
        per_frame.append(
            {
                "stamp": f.stamp,
                "frame_id": f.frame_id,
                "detections": f.detections,
                "tracks": f.tracks,
                "iterations": f.iterations,
                "cost": _finite(f.cost),
                "condition": _finite(f.condition),
                "weakly_observable": f.weakly_observable,
                "baro_weight": _finite(f.baro_weight),
                "velocity": [float(v) for v in f.state.velocity],
                "prefit": [float(v) for v in f.prefit],
                "weights": [float(v) for v in f.weights],
                "labels": list(f.labels),
            }
        )
    out = {
        "status": status,
        "error": result.error,
        "h0_m": result.h0,
        "config": config.to_dict(),
        "summary": {
            "frames": len(frames),
            "detections": int(sum(f.detections for f in frames)),
            "mean_iterations": float(np.mean([f.iterations for f in frames])) if frames else 0.0,
            "max_iterations": int(max((f.iterations for f in frames), default=0)),
        },
        "weight_histogram": {"edges": WEIGHT_BINS.tolist(), "counts": counts.tolist()},
        "frames": per_frame,
    }
    if timing:
        out["runtime_s"] = result.runtime_s
    return out


def cmd_estimate(args) -> int:
    bundle = SensorLogBundle(Path(args.bundle))
    config = _load_config(Path(args.config) if args.config else None)
    solver = config.solver
    if args.loss:
        solver = dataclasses.replace(solver, doppler_loss=RobustLoss.from_name(args.loss))
    if args.baro_loss:
        solver = dataclasses.replace(solver, baro_loss=RobustLoss.from_name(args.baro_loss))
    config = dataclasses.replace(config, solver=solver)
    if args.no_baro:
        config = dataclasses.replace(config, use_baro=False)
    if args.no_tracking:
        config = dataclasses.replace(config, use_tracking=False)
    imu, frames, baro, calibration = bundle.load()

    out = Path(args.out)
    diag_path = Path(args.diagnostics) if args.diagnostics else out.with_suffix(".diagnostics.json")
    log.info("estimating %d frames (%s)", len(frames), "single thread" if args.single_thread else "threaded")
    status, code = "ok", EXIT_OK
    try:
        result = run_estimation(imu, frames, baro, calibration, config, threaded=not args.single_thread)
    except EstimationFailed as exc:
        result, status, code = exc.result, "failed", EXIT_FAILURE
        print(f"brio estimate: {exc}", file=sys.stderr)
    done = [f for f in result.frames if f.iterations > 0]
    write_tum(out, Trajectory.from_states(f.state for f in done))
    write_json(diag_path, _diagnostics(result, config, status, args.timing))
    if code == EXIT_OK:
        print(f"wrote {out} ({len(done)} poses, {result.runtime_s:.1f} s)")
    else:
        print(f"wrote partial {out} ({len(done)} poses)", file=sys.stderr)
    return code


# -- evaluate --------------------------------------------------------------------------

TABLE_ROWS = (
    ("final drift [m]", "final_drift_m"),
    ("xy drift [m]", "xy_drift_m"),
    ("drift [%]", "drift_percent"),
    ("yaw drift [deg]", "yaw_drift_deg"),
    ("yaw drift [deg/m]", "yaw_drift_deg_per_m"),
    ("RPE trans [%]", "rpe_trans_percent"),
    ("RPE rot [deg]", "rpe_rot_deg"),
    ("position RMSE [m]", "position_rmse_m"),
    ("path length [m]", "path_length_m"),
)


def _read_trajectory(path: str) -> Trajectory:
    try:
        return read_tum(path)
    except MetricsError as exc:
        raise UsageError(str(exc)) from exc


def cmd_evaluate(args) -> int:
    est = _read_trajectory(args.estimate)
    ref = _read_trajectory(args.reference)
    report = evaluate(est, ref, delta=args.delta)
    if args.json:
        text = json.dumps(report, indent=2, sort_keys=True) + "\n"
        if args.json == "-":
            sys.stdout.write(text)
            return EXIT_OK
        Path(args.json).write_text(text)
    width = max(len(label) for label, _ in TABLE_ROWS)
    for label, key in TABLE_ROWS:
        if key in report:
            value = "n/a" if report[key] is None else f"{report[key]:.4f}"
            print(f"{label:<{width}}  {value}")
    return EXIT_OK


# -- plotdata ----------------------------------------------------------------------------


def _load_diagnostics(path: str) -> dict:
    try:
        data = load_json(Path(path))
    except ConfigError as exc:
        raise UsageError(str(exc)) from exc
    if not isinstance(data, dict) or "frames" not in data:
        raise UsageError(f"{path}: not a diagnostics file (no 'frames')")
    return data


def cmd_plotdata(args) -> int:
    kind = args.kind
    if kind not in PLOT_KINDS:
        raise UsageError(f"unknown plot kind {kind!r}; valid kinds: {', '.join(PLOT_KINDS)}")
    if kind == "residual-histogram":
        data = _load_diagnostics(args.input)
        rows = []
        for f in data["frames"]:
            for m, (r, w, lab) in enumerate(zip(f["prefit"], f["weights"], f["labels"])):
                outlier = "" if lab == "" else int(lab != "static")
                rows.append([f["stamp"], f["frame_id"], m, r, w, lab, outlier])
        cols = ["stamp_s", "frame_id", "detection", "normalized_residual", "weight", "label", "outlier"]
    elif kind == "velocity-trace":
        data = _load_diagnostics(args.input)
        rows = [[f["stamp"], f["frame_id"], *f["velocity"]] for f in data["frames"]]
        cols = ["stamp_s", "frame_id", "vx", "vy", "vz"]
    else:
        frames = SensorLogBundle(Path(args.input)).load()[1]
        rows = [
            [*d.position, d.doppler, d.snr, d.noise, f.stamp, f.frame_id, d.label]
            for f in frames
            for d in f.detections
        ]
        cols = ["x", "y", "z", "doppler", "snr", "noise", "stamp", "frame_id", "label"]
    _write_rows(args.out, cols, rows)
    return EXIT_OK


# -- entry point ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="brio", description="Radar-inertial-barometric odometry toolkit.")
    p.add_argument("--version", action="version", version=f"brio {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a synthetic sensor-log bundle")
    s.add_argument("scenario", nargs="?", help="scenario JSON file")
    s.add_argument("--preset", choices=sorted(PRESETS), help="use a built-in scenario instead of a file")
    s.add_argument("-o", "--out", required=True, help="output bundle directory")
    s.add_argument("--seed", type=int, help="override the scenario seed")
    s.add_argument("--duration", type=float, help="override the scenario duration [s]")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", help="run the estimator over a bundle")
    e.add_argument("bundle", help="bundle directory with imu/radar/baro CSVs and calibration.json")
    e.add_argument("-o", "--out", required=True, help="output TUM trajectory")
    e.add_argument("--config", help="estimator config JSON")
    e.add_argument("--diagnostics", help="diagnostics JSON (default: <out without suffix>.diagnostics.json)")
    e.add_argument("--no-baro", action="store_true", help="radar-inertial only (RIO)")
    e.add_argument("--no-tracking", action="store_true", help="disable zero-velocity tracks")
    e.add_argument("--loss", choices=LOSS_NAMES, help="Doppler robust loss")
    e.add_argument("--baro-loss", choices=LOSS_NAMES, help="barometer robust loss")
    e.add_argument("--single-thread", action="store_true", help="solve on the main thread (deterministic mode)")
    e.add_argument("--timing", action="store_true", help="record wall-clock runtime in the diagnostics")
    e.set_defaults(func=cmd_estimate)

    v = sub.add_parser("evaluate", help="drift and RPE of an estimate against a reference")
    v.add_argument("estimate", help="estimated TUM trajectory")
    v.add_argument("reference", help="reference TUM trajectory")
    v.add_argument("--delta", type=float, default=1.0, help="RPE segment length [m]")
    v.add_argument("--json", help="also write the report as JSON ('-' for stdout only)")
    v.set_defaults(func=cmd_evaluate)

    d = sub.add_parser("plotdata", help="export tidy CSV for external plotting")
    d.add_argument("kind", help=f"one of: {', '.join(PLOT_KINDS)}")
    d.add_argument("input", help="diagnostics JSON, or a bundle directory for pointcloud")
    d.add_argument("-o", "--out", help="output CSV (default stdout)")
    d.set_defaults(func=cmd_plotdata)
    return p


def main(argv=None) -> int:
    level = os.environ.get("BRIO_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError, FormatError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) else str(exc)
        print(f"brio {args.command}: {msg}", file=sys.stderr)
        return EXIT_USAGE
    except (EstimatorError, MetricsError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"brio {args.command}: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except BrokenPipeError:
        # Output piped into e.g. ``head``; silence the flush at exit.
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
