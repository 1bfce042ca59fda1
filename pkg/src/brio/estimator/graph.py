"""Sliding-window factor graph and its vectorized linearization.

Variables are navigation states (15-dim tangent each, keyed by an integer
id) and zero-velocity track landmarks (3-dim, inertial frame).  Factors are
the marginal prior, preintegrated IMU between consecutive states, one bearing
Doppler factor per detection, one barometer factor per state and one track
factor per associated detection.

:class:`Problem` snapshots a subset of the graph into flat arrays so the
solver and the marginalization step share one linearization routine.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from brio.estimator.config import SolverConfig
from brio.estimator.tracking import ZeroVelocityTrack
from brio.factors import doppler_residual_batch, imu_residual_batch, track_residual_batch
from brio.geometry import exp_so3, local_coordinates, orthonormalize, right_jacobian_inv
from brio.losses import loss_value, loss_weight
from brio.preintegration import PreintegratedBatch, PreintegratedImu
from brio.types import Calibration, NavState

COMPONENTS = (
    [f"rotation[{a}]" for a in "xyz"]
    + [f"position[{a}]" for a in "xyz"]
    + [f"velocity[{a}]" for a in "xyz"]
    + [f"gyro_bias[{a}]" for a in "xyz"]
    + [f"accel_bias[{a}]" for a in "xyz"]
)


@dataclass
class FrameRecord:
    """Radar, gyro and baro inputs attached to one state."""

    state_id: int
    stamp: float
    frame_id: int = -1
    positions: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    doppler: np.ndarray = field(default_factory=lambda: np.zeros(0))
    snr: np.ndarray = field(default_factory=lambda: np.zeros(0))
    noise: np.ndarray = field(default_factory=lambda: np.zeros(0))
    labels: list[str] = field(default_factory=list)
    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))
    altitude: float | None = None
    track_obs: list[tuple[int, int]] = field(default_factory=list)
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    baro_weight: float = 1.0

    @property
    def bearings(self) -> np.ndarray:
        return self.positions / np.linalg.norm(self.positions, axis=1, keepdims=True)


@dataclass
class MarginalPrior:
    """Gaussian prior ``r = L (x [-] x_bar) + d`` over one state and some tracks."""

    state_id: int
    state: NavState
    sqrt_info: np.ndarray
    offset: np.ndarray
    track_ids: list[int] = field(default_factory=list)
    track_points: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))

    @classmethod
    def diagonal(cls, state_id: int, state: NavState, sigmas) -> "MarginalPrior":
        sigmas = np.asarray(sigmas, dtype=float)
        return cls(state_id, state, np.diag(1.0 / sigmas), np.zeros(len(sigmas)))

    @property
    def dim(self) -> int:
        return 15 + 3 * len(self.track_ids)


@dataclass
class FactorGraph:
    calibration: Calibration
    h0: float = 0.0
    states: dict[int, NavState] = field(default_factory=dict)
    order: list[int] = field(default_factory=list)
    frames: dict[int, FrameRecord] = field(default_factory=dict)
    imu: dict[int, tuple[PreintegratedImu, np.ndarray]] = field(default_factory=dict)
    tracks: dict[int, ZeroVelocityTrack] = field(default_factory=dict)
    live_tracks: set[int] = field(default_factory=set)
    prior: MarginalPrior | None = None
    next_state_id: int = 0
    next_track_id: int = 0

    def __len__(self) -> int:
        return len(self.order)

    @property
    def latest(self) -> NavState:
        return self.states[self.order[-1]]

    def problem(self, config: SolverConfig) -> "Problem":
        return Problem.from_graph(self, config)

    def check(self) -> None:
        """Raise if a factor references a variable that is not in the graph."""
        ids = set(self.order)
        if self.prior is None or self.prior.state_id != self.order[0]:
            raise AssertionError("the prior must anchor the oldest state")
        for j in self.imu:
            if j not in ids or self.order.index(j) == 0:
                raise AssertionError(f"dangling IMU factor into state {j}")
        for sid, rec in self.frames.items():
            if sid not in ids:
                raise AssertionError(f"frame attached to removed state {sid}")
            for tid, _ in rec.track_obs:
                if tid not in self.tracks:
                    raise AssertionError(f"observation of removed track {tid}")
        stamps = [self.states[i].stamp for i in self.order]
        if any(b <= a for a, b in zip(stamps, stamps[1:])):
            raise AssertionError("states are not sorted by stamp")


class EstimatorError(RuntimeError):
    """The estimation problem is ill-posed or the solver failed."""


@dataclass
class Values:
    """Flat variable arrays for the states and tracks of a :class:`Problem`."""

    R: np.ndarray
    p: np.ndarray
    v: np.ndarray
    bg: np.ndarray
    ba: np.ndarray
    lm: np.ndarray

    def retract(self, delta: np.ndarray) -> "Values":
        S = len(self.p)
        d = delta[: 15 * S].reshape(S, 15)
        return Values(
            orthonormalize(self.R @ exp_so3(d[:, 0:3])),
            self.p + d[:, 3:6],
            self.v + d[:, 6:9],
            self.bg + d[:, 9:12],
            self.ba + d[:, 12:15],
            self.lm + delta[15 * S :].reshape(-1, 3),
        )

    def state(self, i: int, stamp: float) -> NavState:
        return NavState(self.R[i], self.p[i], self.v[i], self.bg[i], self.ba[i], stamp)


@dataclass
class Evaluation:
    cost: float
    doppler_x: np.ndarray  # normalized Doppler residuals
    baro_x: np.ndarray
    parts: dict


def _accumulate(target: np.ndarray, idx: np.ndarray, vals: np.ndarray) -> None:
    """``target[idx] += vals`` with repeated indices summed.

    Sorted indices (the common case: factors grouped by state) use
    ``reduceat``, which is much faster than ``np.add.at``.
    """
    if len(idx) == 0:
        return
    steps = np.diff(idx)
    if np.all(steps > 0):
        target[idx] += vals
    elif np.all(steps >= 0):
        starts = np.flatnonzero(np.concatenate([[True], steps > 0]))
        target[idx[starts]] += np.add.reduceat(vals, starts, axis=0)
    else:
        np.add.at(target, idx, vals)


class Problem:
    """Flat, vectorized view of (a subset of) a factor graph."""

    def __init__(self, config: SolverConfig, calibration: Calibration, h0: float):
        self.config = config
        self.calib = calibration
        self.h0 = h0
        noise = config.noise
        self.sigma_d = noise.sigma_doppler
        self.sigma_b = noise.sigma_baro
        self.track_sqrt = np.linalg.cholesky(np.linalg.inv(noise.track_covariance)).T

    @classmethod
    def from_graph(
        cls,
        graph: FactorGraph,
        config: SolverConfig,
        state_ids: list[int] | None = None,
        frame_ids: list[int] | None = None,
        imu_ids: list[int] | None = None,
        track_ids: list[int] | None = None,
        with_prior: bool = True,
    ) -> "Problem":
        prob = cls(config, graph.calibration, graph.h0)
        state_ids = list(graph.order) if state_ids is None else state_ids
        frame_ids = [i for i in state_ids if i in graph.frames] if frame_ids is None else frame_ids
        imu_ids = [j for j in state_ids if j in graph.imu] if imu_ids is None else imu_ids
        track_ids = sorted(graph.tracks) if track_ids is None else track_ids
        prob.state_ids = state_ids
        prob.track_ids = track_ids
        prob.stamps = np.array([graph.states[i].stamp for i in state_ids])
        sidx = {sid: k for k, sid in enumerate(state_ids)}
        tidx = {tid: k for k, tid in enumerate(track_ids)}
        prob.sidx, prob.tidx = sidx, tidx
        S, T = len(state_ids), len(track_ids)
        prob.S, prob.T = S, T
        prob.dim = 15 * S + 3 * T

        states = [graph.states[i] for i in state_ids]
        prob.values = Values(
            np.array([x.rotation for x in states]).reshape(S, 3, 3),
            np.array([x.position for x in states]).reshape(S, 3),
            np.array([x.velocity for x in states]).reshape(S, 3),
            np.array([x.gyro_bias for x in states]).reshape(S, 3),
            np.array([x.accel_bias for x in states]).reshape(S, 3),
            np.array([graph.tracks[t].position for t in track_ids]).reshape(T, 3),
        )

        recs = [graph.frames[i] for i in frame_ids]
        prob.frame_ids = frame_ids
        counts = [len(r.doppler) for r in recs]
        prob.frame_slices = np.cumsum([0] + counts)
        prob.d_sidx = np.repeat([sidx[r.state_id] for r in recs], counts).astype(int)
        prob.d_bearing = np.concatenate([r.bearings for r in recs] + [np.zeros((0, 3))])
        prob.d_doppler = np.concatenate([r.doppler for r in recs] + [np.zeros(0)])
        prob.d_omega = np.repeat(np.array([r.omega for r in recs]).reshape(-1, 3), counts, axis=0)

        baro = [r for r in recs if r.altitude is not None]
        prob.b_frame = [frame_ids.index(r.state_id) for r in baro]
        prob.b_sidx = np.array([sidx[r.state_id] for r in baro], dtype=int)
        prob.b_alt = np.array([r.altitude for r in baro], dtype=float)

        obs = [(sidx[r.state_id], tidx[t], r.positions[m]) for r in recs for t, m in r.track_obs if t in tidx]
        prob.t_sidx = np.array([o[0] for o in obs], dtype=int)
        prob.t_tidx = np.array([o[1] for o in obs], dtype=int)
        prob.t_meas = np.array([o[2] for o in obs]).reshape(-1, 3)

        prob.i_j = np.array([sidx[j] for j in imu_ids], dtype=int)
        # IMU factors connect each state to its predecessor in the graph order.
        order_pos = {sid: k for k, sid in enumerate(graph.order)}
        prob.i_i = np.array([sidx[graph.order[order_pos[j] - 1]] for j in imu_ids], dtype=int)
        pims = [graph.imu[j][0] for j in imu_ids]
        prob.i_pims = PreintegratedBatch.stack(pims) if pims else None
        prob.i_sqrt = np.array([graph.imu[j][1] for j in imu_ids]).reshape(-1, 15, 15)

        prob.prior = graph.prior if with_prior and graph.prior is not None and graph.prior.state_id in sidx else None
        if prob.prior is not None:
            pr = prob.prior
            prob.p_sidx = sidx[pr.state_id]
            prob.p_tidx = np.array([tidx[t] for t in pr.track_ids], dtype=int)
            prob.p_index = np.concatenate(
                [15 * prob.p_sidx + np.arange(15)] + [15 * S + 3 * k + np.arange(3) for k in prob.p_tidx]
            ).astype(int)
        return prob

    # -- evaluation ---------------------------------------------------------

    def evaluate(self, x: Values, jacobians: bool = False) -> Evaluation:
        cfg = self.config
        calib = self.calib
        parts = {}
        cost = 0.0

        if self.prior is not None:
            pr = self.prior
            k = self.p_sidx
            xs = NavState(x.R[k], x.p[k], x.v[k], x.bg[k], x.ba[k])
            delta = np.concatenate([local_coordinates(pr.state, xs), (x.lm[self.p_tidx] - pr.track_points).ravel()])
            r = pr.sqrt_info @ delta + pr.offset
            cost += 0.5 * float(r @ r)
            if jacobians:
                J = pr.sqrt_info.copy()
                J[:, 0:3] = J[:, 0:3] @ right_jacobian_inv(delta[0:3])
                parts["prior"] = (r, J)

        if len(self.i_j):
            i, j = self.i_i, self.i_j
            r, Ji, Jj = imu_residual_batch(
                x.R[i], x.p[i], x.v[i], x.bg[i], x.ba[i],
                x.R[j], x.p[j], x.v[j], x.bg[j], x.ba[j],
                self.i_pims, calib.gravity,
            )
            rw = np.einsum("nij,nj->ni", self.i_sqrt, r)
            cost += 0.5 * float(np.sum(rw * rw))
            if jacobians:
                parts["imu"] = (rw, self.i_sqrt @ Ji, self.i_sqrt @ Jj)

        doppler_x = np.zeros(0)
        if len(self.d_sidx):
            s = self.d_sidx
            r, j_rot, j_vel, j_bg = doppler_residual_batch(
                x.R[s], x.v[s], x.bg[s], self.d_omega, self.d_bearing, self.d_doppler, calib.R_BR, calib.t_BR
            )
            doppler_x = r / self.sigma_d
            cost += float(np.sum(loss_value(cfg.doppler_loss, doppler_x)))
            if jacobians:
                parts["doppler"] = (r, j_rot, j_vel, j_bg)

        baro_x = np.zeros(0)
        if len(self.b_sidx):
            r = x.p[self.b_sidx, 2] + self.h0 - self.b_alt
            baro_x = r / self.sigma_b
            cost += float(np.sum(loss_value(cfg.baro_loss, baro_x)))
            if jacobians:
                parts["baro"] = r

        if len(self.t_sidx):
            s, t = self.t_sidx, self.t_tidx
            r, j_rot, j_pos, j_lm = track_residual_batch(x.R[s], x.p[s], x.lm[t], self.t_meas, calib.R_BR, calib.t_BR)
            rw = r @ self.track_sqrt.T
            cost += 0.5 * float(np.sum(rw * rw))
            if jacobians:
                L = self.track_sqrt
                parts["track"] = (rw, L @ j_rot, L @ j_pos, L @ j_lm)

        return Evaluation(cost, doppler_x, baro_x, parts)

    # -- normal equations ---------------------------------------------------

    def weights(self, ev: Evaluation):
        return (
            loss_weight(self.config.doppler_loss, ev.doppler_x),
            loss_weight(self.config.baro_loss, ev.baro_x),
        )

    def normal_equations(self, ev: Evaluation, w_dop=None, w_baro=None, dense: bool = False):
        """Weighted Gauss-Newton system ``(H, g)`` with ``g`` the cost gradient."""
        S, T = self.S, self.T
        if w_dop is None or w_baro is None:
            w_dop, w_baro = self.weights(ev)
        diag = np.zeros((S, 15, 15))
        g_s = np.zeros((S, 15))
        g_t = np.zeros((T, 3))
        track_diag = np.zeros((T, 3, 3))
        rows, cols, vals = [], [], []

        def block(r_idx, c_idx, b):
            rows.append(np.broadcast_to(r_idx[:, :, None], b.shape).ravel())
            cols.append(np.broadcast_to(c_idx[:, None, :], b.shape).ravel())
            vals.append(b.ravel())

        sblk = lambda k: 15 * np.asarray(k)[:, None] + np.arange(15)  # noqa: E731
        tblk = lambda k: 15 * S + 3 * np.asarray(k)[:, None] + np.arange(3)  # noqa: E731
        parts = ev.parts

        if "imu" in parts:
            rw, Ai, Aj = parts["imu"]
            AiT = np.swapaxes(Ai, 1, 2)
            AjT = np.swapaxes(Aj, 1, 2)
            _accumulate(diag, self.i_i, AiT @ Ai)
            _accumulate(diag, self.i_j, AjT @ Aj)
            off = AiT @ Aj
            block(sblk(self.i_i), sblk(self.i_j), off)
            block(sblk(self.i_j), sblk(self.i_i), np.swapaxes(off, 1, 2))
            _accumulate(g_s, self.i_i, np.einsum("nji,nj->ni", Ai, rw))
            _accumulate(g_s, self.i_j, np.einsum("nji,nj->ni", Aj, rw))

        if "doppler" in parts:
            r, j_rot, j_vel, j_bg = parts["doppler"]
            n = len(r)
            J = np.zeros((n, 15))
            J[:, 0:3] = j_rot
            J[:, 6:9] = j_vel
            J[:, 9:12] = j_bg
            scale = w_dop / self.sigma_d**2
            _accumulate(diag, self.d_sidx, (scale[:, None, None] * J[:, :, None]) * J[:, None, :])
            _accumulate(g_s, self.d_sidx, (scale * r)[:, None] * J)

        if "baro" in parts:
            r = parts["baro"]
            scale = w_baro / self.sigma_b**2
            _accumulate(diag[:, 5, 5], self.b_sidx, scale)
            _accumulate(g_s[:, 5], self.b_sidx, scale * r)

        if "track" in parts:
            rw, j_rot, j_pos, j_lm = parts["track"]
            A = np.zeros((len(rw), 3, 15))
            A[:, :, 0:3] = j_rot
            A[:, :, 3:6] = j_pos
            AT = np.swapaxes(A, 1, 2)
            BT = np.swapaxes(j_lm, 1, 2)
            _accumulate(diag, self.t_sidx, AT @ A)
            _accumulate(track_diag, self.t_tidx, BT @ j_lm)
            off = AT @ j_lm
            block(sblk(self.t_sidx), tblk(self.t_tidx), off)
            block(tblk(self.t_tidx), sblk(self.t_sidx), np.swapaxes(off, 1, 2))
            _accumulate(g_s, self.t_sidx, np.einsum("nji,nj->ni", A, rw))
            _accumulate(g_t, self.t_tidx, np.einsum("nji,nj->ni", j_lm, rw))

        g = np.concatenate([g_s.ravel(), g_t.ravel()])
        if "prior" in parts:
            r, J = parts["prior"]
            idx = self.p_index
            block(idx[None, :], idx[None, :], (J.T @ J)[None])
            g[idx] += J.T @ r

        block(sblk(np.arange(S)), sblk(np.arange(S)), diag)
        if T:
            block(tblk(np.arange(T)), tblk(np.arange(T)), track_diag)
        H = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(self.dim, self.dim)
        )
        H = H.toarray() if dense else H.tocsc()
        return H, g

    def describe(self, index: int) -> str:
        """Human-readable name of a tangent coordinate."""
        if index < 15 * self.S:
            k, c = divmod(index, 15)
            return f"state {self.state_ids[k]} (t={self.stamps[k]:.3f}) {COMPONENTS[c]}"
        k, c = divmod(index - 15 * self.S, 3)
        return f"track {self.track_ids[k]} landmark[{'xyz'[c]}]"
