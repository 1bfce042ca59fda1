"""Trajectory evaluation: closed-loop drift, drift per distance and RPE.

Poses map body to world.  Yaw is the heading of the body x-axis projected
onto the horizontal plane, which is well defined for near-level flight.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from brio.geometry import heading, log_so3, matrix_to_quat, orthonormalize, quat_to_matrix

ASSOCIATION_TOLERANCE = 0.05


class MetricsError(ValueError):
    """Input trajectories are unusable for the requested metric."""


@dataclass
class Trajectory:
    """Timestamped poses: ``stamps (N,)``, ``positions (N,3)``, ``rotations (N,3,3)``."""

    stamps: np.ndarray
    positions: np.ndarray
    rotations: np.ndarray

    def __post_init__(self):
        self.stamps = np.asarray(self.stamps, dtype=float).reshape(-1)
        n = len(self.stamps)
        self.positions = np.asarray(self.positions, dtype=float).reshape(n, 3)
        self.rotations = np.asarray(self.rotations, dtype=float).reshape(n, 3, 3)
        if np.any(np.diff(self.stamps) <= 0):
            raise MetricsError("trajectory stamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.stamps)

    def __getitem__(self, item) -> "Trajectory":
        return Trajectory(self.stamps[item], self.positions[item], self.rotations[item])

    @classmethod
    def from_states(cls, states) -> "Trajectory":
        states = list(states)
        return cls(
            np.array([s.stamp for s in states]),
            np.array([s.position for s in states]),
            np.array([s.rotation for s in states]),
        )

    def path_length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.positions, axis=0), axis=1)))

    def transformed(self, rotation, translation) -> "Trajectory":
        """Apply a global rigid transform ``x -> R x + t`` to every pose."""
        R = np.asarray(rotation, dtype=float)
        t = np.asarray(translation, dtype=float)
        return Trajectory(self.stamps, self.positions @ R.T + t, R @ self.rotations)


# -- TUM text format -----------------------------------------------------------


def write_tum(path: str | Path, traj: Trajectory) -> None:
    """``stamp tx ty tz qx qy qz qw`` per line."""
    q = matrix_to_quat(traj.rotations) if len(traj) else np.zeros((0, 4))
    lines = []
    for t, p, qq in zip(traj.stamps, traj.positions, q.reshape(-1, 4)):
        vals = [t, *p, *qq]
        lines.append(" ".join(f"{v:.9f}" for v in vals))
    Path(path).write_text("".join(line + "\n" for line in lines))


def read_tum(path: str | Path) -> Trajectory:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise MetricsError(f"{path}: cannot read ({exc.strerror})") from exc
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 8:
            raise MetricsError(f"{path}:{lineno}: expected 8 columns, got {len(parts)}")
        try:
            rows.append([float(v) for v in parts])
        except ValueError as exc:
            raise MetricsError(f"{path}:{lineno}: {exc}") from exc
    data = np.array(rows).reshape(-1, 8)
    rot = orthonormalize(quat_to_matrix(data[:, 4:8])) if len(data) else np.zeros((0, 3, 3))
    return Trajectory(data[:, 0], data[:, 1:4], rot)


# -- association -----------------------------------------------------------------


def associate(est: Trajectory, ref: Trajectory, tolerance: float = ASSOCIATION_TOLERANCE):
    """Nearest-neighbour time association; returns matched ``(est, ref)``."""
    if len(est) == 0 or len(ref) == 0:
        raise MetricsError("cannot associate an empty trajectory")
    idx = np.clip(np.searchsorted(ref.stamps, est.stamps), 1, max(len(ref) - 1, 1))
    if len(ref) == 1:
        idx = np.zeros(len(est), dtype=int)
    else:
        left = idx - 1
        pick_left = np.abs(est.stamps - ref.stamps[left]) <= np.abs(ref.stamps[idx] - est.stamps)
        idx = np.where(pick_left, left, idx)
    ok = np.abs(ref.stamps[idx] - est.stamps) <= tolerance
    if not np.any(ok):
        raise MetricsError(f"no poses associate within {tolerance * 1e3:.0f} ms; do the time spans overlap?")
    # A reference pose may only be matched once.
    ref_idx = idx[ok]
    keep = np.concatenate([[True], np.diff(ref_idx) > 0])
    return est[np.flatnonzero(ok)[keep]], ref[ref_idx[keep]]


# -- drift -------------------------------------------------------------------------


@dataclass
class Drift:
    position_m: float
    xy_m: float
    yaw_deg: float


def _wrap_deg(a):
    return (a + 180.0) % 360.0 - 180.0


def final_drift(est: Trajectory) -> Drift:
    """Final pose against start pose for a trajectory that returns to its start."""
    if len(est) < 2:
        raise MetricsError("final drift needs at least two poses")
    d = est.positions[-1] - est.positions[0]
    rel = est.rotations[0].T @ est.rotations[-1]
    yaw = float(np.degrees(heading(rel)))
    return Drift(float(np.linalg.norm(d)), float(np.linalg.norm(d[:2])), abs(_wrap_deg(yaw)))


def drift_per_distance(est: Trajectory, path_length: float | None = None) -> tuple[float, float]:
    """``(percent of path length, yaw degrees per meter)``.

    The path length defaults to the estimate's own integrated length.
    """
    length = est.path_length() if path_length is None else float(path_length)
    if not length > 0:
        raise MetricsError("path length must be positive")
    drift = final_drift(est)
    return 100.0 * drift.position_m / length, drift.yaw_deg / length


# -- relative pose error -------------------------------------------------------------


@dataclass
class RelativePoseError:
    trans_rmse_percent: float
    rot_rmse_deg: float
    segments: int


def _segment_pairs(positions: np.ndarray, delta: float):
    """Pairs ``(i, j)`` with ``j`` the first pose ``delta`` meters of path after ``i``,
    plus the path length of each segment."""
    cum = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(positions, axis=0), axis=1))])
    j = np.searchsorted(cum, cum + delta, side="left")
    i = np.arange(len(cum))
    ok = j < len(cum)
    i, j = i[ok], j[ok]
    return i, j, cum[j] - cum[i]


def relative_pose_error(
    est: Trajectory,
    ref: Trajectory,
    delta: float = 1.0,
    tolerance: float = ASSOCIATION_TOLERANCE,
) -> RelativePoseError:
    """Translational (% of segment length) and rotational (deg) RPE RMSE.

    Segments start at every associated pose and end at the first pose at
    least ``delta`` meters further along the reference path.  The error of a
    segment is ``(ref_i^-1 ref_j)^-1 (est_i^-1 est_j)``; its translation is
    expressed as a percentage of the segment's reference path length.
    """
    if not delta > 0:
        raise MetricsError("delta must be positive")
    est_a, ref_a = associate(est, ref, tolerance)
    i, j, seg_len = _segment_pairs(ref_a.positions, delta)
    if len(i) == 0:
        raise MetricsError(f"reference path is shorter than delta={delta} m")

    def rel(traj):
        Ri, Rj = traj.rotations[i], traj.rotations[j]
        RiT = np.swapaxes(Ri, 1, 2)
        dp = np.einsum("nij,nj->ni", RiT, traj.positions[j] - traj.positions[i])
        return RiT @ Rj, dp

    R_ref, p_ref = rel(ref_a)
    R_est, p_est = rel(est_a)
    R_refT = np.swapaxes(R_ref, 1, 2)
    err_t = np.einsum("nij,nj->ni", R_refT, p_est - p_ref)
    err_r = log_so3(R_refT @ R_est)
    trans_pct = 100.0 * np.linalg.norm(err_t, axis=1) / seg_len
    rot_deg = np.degrees(np.linalg.norm(err_r, axis=1))
    return RelativePoseError(
        float(np.sqrt(np.mean(trans_pct**2))),
        float(np.sqrt(np.mean(rot_deg**2))),
        int(len(i)),
    )


def position_rmse(est: Trajectory, ref: Trajectory, tolerance: float = ASSOCIATION_TOLERANCE) -> float:
    est_a, ref_a = associate(est, ref, tolerance)
    err = np.linalg.norm(est_a.positions - ref_a.positions, axis=1)
    return float(np.sqrt(np.mean(err**2)))


def evaluate(est: Trajectory, ref: Trajectory | None = None, delta: float = 1.0) -> dict:
    """All report columns: final drift, xy drift, drift %, yaw drift, yaw/m, RPE.

    RPE entries are ``None`` when the reference path is shorter than ``delta``.
    """
    drift = final_drift(est)
    length = ref.path_length() if ref is not None else est.path_length()
    pct, yaw_per_m = drift_per_distance(est, length) if length > 0 else (float("nan"), float("nan"))
    out = {
        "path_length_m": length,
        "final_drift_m": drift.position_m,
        "xy_drift_m": drift.xy_m,
        "drift_percent": pct,
        "yaw_drift_deg": drift.yaw_deg,
        "yaw_drift_deg_per_m": yaw_per_m,
    }
    if ref is not None:
        out["position_rmse_m"] = position_rmse(est, ref)
        # A hover may never cover one segment; RPE is then undefined.
        if length >= delta:
            rpe = relative_pose_error(est, ref, delta)
            out.update(rpe_trans_percent=rpe.trans_rmse_percent, rpe_rot_deg=rpe.rot_rmse_deg, rpe_segments=rpe.segments)
        else:
            out.update(rpe_trans_percent=None, rpe_rot_deg=None, rpe_segments=0)
    return out
