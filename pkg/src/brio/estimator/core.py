"""Sliding-window radar-inertial-barometric estimator."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from brio import atmosphere
from brio.estimator.config import EstimatorConfig
from brio.estimator.graph import EstimatorError, FactorGraph, FrameRecord, MarginalPrior, Problem
from brio.estimator.solver import SolveReport, solve_problem
from brio.estimator.tracking import age_tracks, associate_tracks
from brio.factors import doppler_residual_batch
from brio.geometry import euler_zyx_to_matrix
from brio.preintegration import preintegrate
from brio.types import BaroSample, Calibration, ImuSample, ImuStream, NavState, NoiseConfig, RadarFrame

# Eigenvalues of the marginal information below this fraction of the largest
# are treated as zero when factoring it into a square-root prior.
MARGINAL_EIG_FLOOR = 1e-12
FRAME_STAMP_TOLERANCE = 1e-6


def initialize(
    imu_burst: Sequence[ImuSample] | ImuStream,
    first_baro: BaroSample | Sequence[BaroSample] | None = None,
    min_samples: int = 100,
    max_accel_std: float = 0.3,
    max_gyro_std: float = 0.1,
    stamp: float | None = None,
) -> tuple[NavState, float]:
    """Static alignment from a turn-on IMU burst.

    Gyro bias is the mean angular velocity, roll and pitch level the mean
    specific force with gravity and yaw is zero.  ``h0`` is the altitude of
    the barometer sample, or the mean altitude when several are given.
    """
    imu = ImuStream.from_samples(imu_burst)
    if len(imu) < min_samples:
        raise EstimatorError(f"initialization needs at least {min_samples} IMU samples, got {len(imu)}")
    accel_std = float(np.max(np.std(imu.accel, axis=0)))
    gyro_std = float(np.max(np.std(imu.gyro, axis=0)))
    if accel_std > max_accel_std or gyro_std > max_gyro_std:
        raise EstimatorError(
            f"motion detected during initialization (accel std {accel_std:.3g} m/s^2, gyro std {gyro_std:.3g} rad/s)"
        )
    f = imu.accel.mean(axis=0)
    roll = np.arctan2(f[1], f[2])
    pitch = np.arctan2(-f[0], np.hypot(f[1], f[2]))
    state = NavState(
        rotation=euler_zyx_to_matrix(roll, pitch, 0.0),
        gyro_bias=imu.gyro.mean(axis=0),
        stamp=imu.stamps[-1] if stamp is None else stamp,
    )
    h0 = 0.0
    if first_baro is not None:
        samples = [first_baro] if isinstance(first_baro, BaroSample) else list(first_baro)
        if samples:
            h0 = float(np.mean(atmosphere.altitude(np.array([s.pressure for s in samples]))))
    return state, h0


def predict(latest: NavState, imu_since: Sequence[ImuSample] | ImuStream, gravity, scheme: str = "midpoint") -> NavState:
    """Forward-integrate ``latest`` to the last IMU stamp with its own biases."""
    imu = ImuStream.from_samples(imu_since)
    if len(imu) == 0 or imu.stamps[-1] <= latest.stamp:
        return latest
    pim = preintegrate(imu, latest.gyro_bias, latest.accel_bias, t_start=latest.stamp, t_end=imu.stamps[-1], scheme=scheme)
    return pim.predict(latest, gravity)


def bearing_observability(bearings_body: np.ndarray) -> tuple[float, np.ndarray]:
    """Condition number of ``sum e e^T`` and its weakest direction (body frame)."""
    if len(bearings_body) == 0:
        return float("inf"), np.array([np.nan] * 3)
    M = bearings_body.T @ bearings_body
    w, V = np.linalg.eigh(M)
    cond = float("inf") if w[0] <= 1e-12 * w[-1] else float(w[-1] / w[0])
    return cond, V[:, 0]


@dataclass
class FrameResult:
    """Per-frame diagnostics; ``weights`` keep updating while the frame is in the window."""

    stamp: float
    frame_id: int
    detections: int
    state: NavState
    iterations: int
    cost: float
    prefit: np.ndarray
    labels: list[str]
    weights: np.ndarray
    condition: float
    weak_direction: np.ndarray
    weakly_observable: bool
    tracks: int
    baro_weight: float = 1.0
    costs: list[float] = field(default_factory=list)


class Estimator:
    """Fixed-lag smoother over a ``window_duration`` window of radar states."""

    def __init__(self, calibration: Calibration, config: EstimatorConfig | None = None):
        self.calibration = calibration
        self.config = config or EstimatorConfig()
        self.graph = FactorGraph(calibration)
        self.results: list[FrameResult] = []
        self._result_of: dict[int, FrameResult] = {}
        self.last_report: SolveReport | None = None

    @property
    def noise(self) -> NoiseConfig:
        return self.config.solver.noise

    @property
    def initialized(self) -> bool:
        return len(self.graph) > 0

    @property
    def latest_state(self) -> NavState:
        if not self.initialized:
            raise EstimatorError("estimator is not initialized")
        return self.graph.latest

    def states(self) -> list[NavState]:
        return [self.graph.states[i] for i in self.graph.order]

    # -- setup --------------------------------------------------------------

    def start(self, prior: NavState, h0: float = 0.0, sigmas=None) -> None:
        """Anchor the first state at ``prior`` with diagonal ``sigmas`` (config default)."""
        if self.initialized:
            raise EstimatorError("estimator already initialized")
        sigmas = self.noise.prior_sigmas() if sigmas is None else np.asarray(sigmas, dtype=float)
        g = self.graph
        g.h0 = h0
        sid = g.next_state_id
        g.next_state_id += 1
        g.states[sid] = prior
        g.order.append(sid)
        g.prior = MarginalPrior.diagonal(sid, prior, sigmas)

    def initialize(self, imu_burst, baro=None, stamp: float | None = None) -> NavState:
        cfg = self.config
        state, h0 = initialize(
            imu_burst, baro, cfg.min_init_samples, cfg.max_init_accel_std, cfg.max_init_gyro_std, stamp
        )
        self.start(state, h0)
        return state

    # -- graph growth -------------------------------------------------------

    def add_radar_frame(
        self,
        frame: RadarFrame,
        imu_between: Sequence[ImuSample] | ImuStream,
        baro: BaroSample | None = None,
    ) -> int:
        """Attach ``frame`` to a new state predicted through the IMU interval.

        A frame stamped at the anchor state's stamp attaches to that state
        instead.  Returns the state id.
        """
        if not self.initialized:
            raise EstimatorError("call initialize() or start() before adding frames")
        g = self.graph
        cfg = self.config
        imu = ImuStream.from_samples(imu_between)
        last = g.latest
        t = float(frame.stamp)
        if abs(t - last.stamp) <= FRAME_STAMP_TOLERANCE and g.order[-1] not in g.frames:
            sid = g.order[-1]
            state = last
        else:
            if t <= last.stamp:
                raise EstimatorError(f"out-of-order radar frame at t={t:.6f} (latest state t={last.stamp:.6f})")
            if len(imu) == 0:
                raise EstimatorError(f"no IMU samples between t={last.stamp:.6f} and t={t:.6f}")
            if imu.stamps[0] > last.stamp + 1e-3 or imu.stamps[-1] < t - 1e-3:
                raise EstimatorError(
                    f"IMU samples span [{imu.stamps[0]:.6f}, {imu.stamps[-1]:.6f}] but must cover "
                    f"[{last.stamp:.6f}, {t:.6f}]"
                )
            gaps = np.diff(imu.stamps)
            if len(gaps) and gaps.max() > cfg.max_imu_gap:
                k = int(np.argmax(gaps))
                raise EstimatorError(
                    f"IMU samples have a {gaps[k]:.3f} s gap after t={imu.stamps[k]:.6f} "
                    f"(max_imu_gap {cfg.max_imu_gap} s)"
                )
            pim = preintegrate(
                imu, last.gyro_bias, last.accel_bias, self.noise, last.stamp, t, cfg.integration_scheme
            )
            state = pim.predict(last, self.calibration.gravity)
            sid = g.next_state_id
            g.next_state_id += 1
            g.states[sid] = state
            g.order.append(sid)
            g.imu[sid] = (pim, pim.information_sqrt())

        rec = self._frame_record(sid, state, frame, imu, baro)
        g.frames[sid] = rec
        if cfg.use_tracking:
            self._associate(sid, state, frame, rec)
        self._record_result(sid, state, frame, rec)
        return sid

    def _frame_record(self, sid, state, frame, imu, baro) -> FrameRecord:
        dets = frame.detections
        n = len(dets)
        omega = imu.nearest_gyro(frame.stamp) if len(imu) else state.gyro_bias.copy()
        rec = FrameRecord(
            state_id=sid,
            stamp=float(frame.stamp),
            frame_id=frame.frame_id,
            positions=np.array([d.position for d in dets], dtype=float).reshape(n, 3),
            doppler=np.array([d.doppler for d in dets], dtype=float),
            snr=np.array([d.snr for d in dets], dtype=float),
            noise=np.array([d.noise for d in dets], dtype=float),
            labels=[d.label for d in dets],
            omega=np.asarray(omega, dtype=float).copy(),
            weights=np.ones(n),
        )
        if baro is not None and self.config.use_baro:
            rec.altitude = float(atmosphere.altitude(baro.pressure))
        return rec

    def _associate(self, sid, state, frame, rec) -> None:
        g = self.graph
        live = {t: g.tracks[t] for t in g.live_tracks}
        assoc, new = associate_tracks(frame.detections, live, g.next_track_id)
        calib = self.calibration
        for track in new:
            m = next(m for m, tid in assoc if tid == track.id)
            p_body = calib.R_BR @ rec.positions[m] + calib.t_BR
            track.position = state.position + state.rotation @ p_body
            g.tracks[track.id] = track
            g.live_tracks.add(track.id)
            g.next_track_id = track.id + 1
        for m, tid in assoc:
            g.tracks[tid].observations.append((sid, m))
        rec.track_obs = [(tid, m) for m, tid in assoc]
        seen = {tid for _, tid in assoc}
        for tid in age_tracks(live, seen, self.config.discard_after):
            g.live_tracks.discard(tid)

    def _record_result(self, sid, state, frame, rec) -> None:
        n = len(rec.doppler)
        prefit = np.zeros(n)
        if n:
            calib = self.calibration
            r, *_ = doppler_residual_batch(
                np.broadcast_to(state.rotation, (n, 3, 3)),
                np.broadcast_to(state.velocity, (n, 3)),
                np.broadcast_to(state.gyro_bias, (n, 3)),
                np.broadcast_to(rec.omega, (n, 3)),
                rec.bearings,
                rec.doppler,
                calib.R_BR,
                calib.t_BR,
            )
            prefit = np.abs(r) / self.noise.sigma_doppler
        cond, weak_dir = bearing_observability(rec.bearings @ self.calibration.R_BR.T if n else np.zeros((0, 3)))
        result = FrameResult(
            stamp=rec.stamp,
            frame_id=rec.frame_id,
            detections=n,
            state=state,
            iterations=0,
            cost=float("nan"),
            prefit=prefit,
            labels=list(rec.labels),
            weights=rec.weights,
            condition=cond,
            weak_direction=weak_dir,
            weakly_observable=bool(n < 3 or cond > self.config.weak_condition),
            tracks=len(rec.track_obs),
        )
        self.results.append(result)
        self._result_of[sid] = result

    # -- optimization -------------------------------------------------------

    def solve(self) -> SolveReport:
        g = self.graph
        problem = Problem.from_graph(g, self.config.solver)
        values, report = solve_problem(problem)
        for k, sid in enumerate(problem.state_ids):
            g.states[sid] = values.state(k, g.states[sid].stamp)
        for k, tid in enumerate(problem.track_ids):
            g.tracks[tid].position = values.lm[k].copy()
        ev = problem.last_evaluation
        w_dop, w_baro = problem.weights(ev)
        for k, sid in enumerate(problem.frame_ids):
            rec = g.frames[sid]
            rec.weights[:] = w_dop[problem.frame_slices[k] : problem.frame_slices[k + 1]]
        for k, fi in enumerate(problem.b_frame):
            sid = problem.frame_ids[fi]
            g.frames[sid].baro_weight = float(w_baro[k])
            self._result_of[sid].baro_weight = float(w_baro[k])
        latest = self._result_of.get(g.order[-1])
        if latest is not None and latest.iterations == 0:
            latest.state = g.latest
            latest.iterations = report.iterations
            latest.cost = report.final_cost
            latest.costs = list(report.costs)
        self.last_report = report
        return report

    def process(self, frame: RadarFrame, imu_between, baro: BaroSample | None = None) -> NavState:
        """Add a frame, slide the window, solve; returns the new latest state."""
        self.add_radar_frame(frame, imu_between, baro)
        self.slide_window()
        self.solve()
        return self.latest_state

    # -- marginalization ----------------------------------------------------

    def slide_window(self) -> None:
        g = self.graph
        t_new = g.latest.stamp
        while len(g) > 1 and g.states[g.order[0]].stamp < t_new - self.config.window_duration - 1e-9:
            self.marginalize_oldest()

    def marginalize_oldest(self) -> None:
        """Drop the oldest state, folding its factors into a new prior."""
        g = self.graph
        s0, s1 = g.order[0], g.order[1]
        rec0 = g.frames.get(s0)
        obs0 = {tid for tid, _ in rec0.track_obs} if rec0 is not None else set()
        involved = sorted(obs0 | set(g.prior.track_ids))
        problem = Problem.from_graph(
            g,
            self.config.solver,
            state_ids=[s0, s1],
            frame_ids=[s0] if rec0 is not None else [],
            imu_ids=[s1],
            track_ids=involved,
        )
        ev = problem.evaluate(problem.values, jacobians=True)
        H, grad = problem.normal_equations(ev, dense=True)

        kept_tracks = [tid for tid in involved if any(sid != s0 for sid, _ in g.tracks[tid].observations)]
        if self.config.marginalization == "diagonal":
            kept_tracks = []
        keep = list(range(15, 30)) + [30 + 3 * involved.index(t) + c for t in kept_tracks for c in range(3)]
        marg = [i for i in range(H.shape[0]) if i not in set(keep)]
        Hkk = H[np.ix_(keep, keep)]
        Hkm = H[np.ix_(keep, marg)]
        Hmm = H[np.ix_(marg, marg)]
        Hmm_inv = np.linalg.pinv(0.5 * (Hmm + Hmm.T), hermitian=True)
        Hs = Hkk - Hkm @ Hmm_inv @ Hkm.T
        gs = grad[keep] - Hkm @ Hmm_inv @ grad[marg]
        Hs = 0.5 * (Hs + Hs.T)

        x1 = g.states[s1]
        if self.config.marginalization == "diagonal":
            cov = np.linalg.pinv(Hs, hermitian=True)
            sig = np.sqrt(np.maximum(np.diag(cov), 1e-18))
            prior = MarginalPrior.diagonal(s1, x1, sig)
        else:
            w, V = np.linalg.eigh(Hs)
            ok = w > MARGINAL_EIG_FLOOR * max(w[-1], 1e-300)
            w, V = w[ok], V[:, ok]
            L = np.sqrt(w)[:, None] * V.T
            d = (V.T @ gs) / np.sqrt(w)
            prior = MarginalPrior(
                s1,
                x1,
                L,
                d,
                list(kept_tracks),
                np.array([g.tracks[t].position for t in kept_tracks]).reshape(-1, 3),
            )

        g.prior = prior
        g.order.pop(0)
        del g.states[s0]
        g.frames.pop(s0, None)
        g.imu.pop(s1, None)
        for tid in involved:
            track = g.tracks[tid]
            track.observations = [o for o in track.observations if o[0] != s0]
            if tid not in kept_tracks and not track.observations:
                del g.tracks[tid]
                g.live_tracks.discard(tid)
        # Tracks dropped from the diagonal prior keep any later observations.
        self._result_of.pop(s0, None)
