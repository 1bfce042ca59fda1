"""Sensor-log bundle formats: versioned CSVs, calibration JSON, manifest.

Every CSV starts with a comment line ``# brio-<kind> v<N>`` followed by the
column header.  Readers reject files whose kind or version differ, so a
schema change can never be misread silently.  Floats are written as their
shortest exact repr, which round-trips and keeps output byte-stable.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from brio.geometry import RigidTransform, matrix_to_quat, quat_to_matrix
from brio.metrics import Trajectory, read_tum
from brio.types import BaroStream, Calibration, ImuStream, RadarDetection, RadarFrame

SCHEMA_VERSION = 1
IMU_COLUMNS = ("stamp_s", "wx", "wy", "wz", "ax", "ay", "az")
RADAR_COLUMNS = ("stamp_s", "frame_id", "x", "y", "z", "doppler", "snr_db", "noise_db", "gt_label")
BARO_COLUMNS = ("stamp_s", "pressure_pa")

IMU_FILE = "imu.csv"
RADAR_FILE = "radar.csv"
BARO_FILE = "baro.csv"
CALIBRATION_FILE = "calibration.json"
GROUNDTRUTH_FILE = "groundtruth.txt"
MANIFEST_FILE = "manifest.json"


class FormatError(ValueError):
    """A log file is missing, malformed or of the wrong schema version."""


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _write_csv(path: Path, kind: str, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# brio-{kind} v{SCHEMA_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _read_csv(path: Path, kind: str, columns) -> list[list[str]]:
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise FormatError(f"{path}: cannot read ({exc.strerror})") from exc
    with fh:
        first = fh.readline().strip()
        expected = f"# brio-{kind} v{SCHEMA_VERSION}"
        if first != expected:
            raise FormatError(f"{path}:1: expected schema line '{expected}', found '{first}'")
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != tuple(columns):
            raise FormatError(f"{path}:2: expected columns {','.join(columns)}")
        rows = []
        for lineno, row in enumerate(reader, 3):
            if not row:
                continue
            if len(row) != len(columns):
                raise FormatError(f"{path}:{lineno}: expected {len(columns)} fields, got {len(row)}")
            rows.append(row)
        return rows


def _floats(path, rows, cols):
    try:
        return np.array([[float(r[c]) for c in cols] for r in rows], dtype=float).reshape(len(rows), len(cols))
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


# -- IMU ------------------------------------------------------------------------


def write_imu(path, imu: ImuStream) -> None:
    _write_csv(Path(path), "imu", IMU_COLUMNS, np.column_stack([imu.stamps, imu.gyro, imu.accel]).tolist())


def read_imu(path) -> ImuStream:
    rows = _read_csv(path, "imu", IMU_COLUMNS)
    data = _floats(path, rows, range(7))
    if np.any(np.diff(data[:, 0]) <= 0):
        raise FormatError(f"{path}: IMU stamps must be strictly increasing")
    return ImuStream(data[:, 0], data[:, 1:4], data[:, 4:7])


# -- radar ----------------------------------------------------------------------


def write_radar(path, frames: list[RadarFrame]) -> None:
    """One row per detection; frames without detections leave no row."""
    rows = []
    for f in frames:
        for d in f.detections:
            rows.append([f.stamp, f.frame_id, *d.position, d.doppler, d.snr, d.noise, d.label])
    _write_csv(Path(path), "radar", RADAR_COLUMNS, rows)


def read_radar(path) -> list[RadarFrame]:
    rows = _read_csv(path, "radar", RADAR_COLUMNS)
    frames: list[RadarFrame] = []
    for lineno, r in enumerate(rows, 3):
        try:
            stamp = float(r[0])
            fid = int(r[1])
            vals = [float(v) for v in r[2:8]]
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
        if not frames or frames[-1].frame_id != fid:
            if frames and stamp <= frames[-1].stamp:
                raise FormatError(f"{path}:{lineno}: frames must be in increasing time order")
            frames.append(RadarFrame(stamp, [], fid))
        try:
            det = RadarDetection(vals[0:3], vals[3], vals[4], vals[5], stamp, r[8])
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
        frames[-1].detections.append(det)
    return frames


# -- barometer --------------------------------------------------------------------


def write_baro(path, baro: BaroStream) -> None:
    _write_csv(Path(path), "baro", BARO_COLUMNS, np.column_stack([baro.stamps, baro.pressure]).tolist())


def read_baro(path) -> BaroStream:
    rows = _read_csv(path, "baro", BARO_COLUMNS)
    data = _floats(path, rows, range(2))
    try:
        return BaroStream(data[:, 0], data[:, 1])
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


# -- calibration and manifest ----------------------------------------------------------


def write_calibration(path, calib: Calibration) -> None:
    data = {
        "q_BR": [float(v) for v in matrix_to_quat(calib.R_BR)],
        "t_BR": [float(v) for v in calib.t_BR],
        "gravity": [float(v) for v in calib.gravity],
    }
    Path(path).write_text(json.dumps(data, indent=2) + "\n")


def read_calibration(path) -> Calibration:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise FormatError(f"{path}: cannot read ({exc.strerror})") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    unknown = set(data) - {"q_BR", "t_BR", "gravity"}
    if unknown:
        raise FormatError(f"{path}: unknown key(s) {', '.join(sorted(unknown))}")
    try:
        q = np.asarray(data["q_BR"], dtype=float).reshape(4)
        t = np.asarray(data["t_BR"], dtype=float).reshape(3)
    except KeyError as exc:
        raise FormatError(f"{path}: missing required field {exc.args[0]!r}") from exc
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if not np.linalg.norm(q) > 0:
        raise FormatError(f"{path}: q_BR must be non-zero")
    kwargs = {}
    if "gravity" in data:
        kwargs["gravity"] = np.asarray(data["gravity"], dtype=float).reshape(3)
    return Calibration(RigidTransform(quat_to_matrix(q / np.linalg.norm(q)), t), **kwargs)


def write_json(path, data) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


# -- bundle -----------------------------------------------------------------------------


@dataclass
class SensorLogBundle:
    """A directory of sensor logs as written by ``brio simulate``."""

    directory: Path

    def __post_init__(self):
        self.directory = Path(self.directory)

    def path(self, name: str) -> Path:
        return self.directory / name

    @property
    def has_groundtruth(self) -> bool:
        return self.path(GROUNDTRUTH_FILE).exists()

    def validate(self, need_calibration: bool = True) -> None:
        if not self.directory.is_dir():
            raise FormatError(f"{self.directory}: not a directory")
        required = [IMU_FILE, RADAR_FILE, BARO_FILE] + ([CALIBRATION_FILE] if need_calibration else [])
        missing = [n for n in required if not self.path(n).exists()]
        if missing:
            raise FormatError(f"{self.directory}: missing {', '.join(missing)}")

    def load(self):
        """``(imu, frames, baro, calibration)``."""
        self.validate()
        return (
            read_imu(self.path(IMU_FILE)),
            read_radar(self.path(RADAR_FILE)),
            read_baro(self.path(BARO_FILE)),
            read_calibration(self.path(CALIBRATION_FILE)),
        )

    def groundtruth(self) -> Trajectory:
        return read_tum(self.path(GROUNDTRUTH_FILE))
