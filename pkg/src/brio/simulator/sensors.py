"""Sensor synthesis: IMU, post-CFAR radar point clouds and barometer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from brio import atmosphere
from brio.simulator.scenario import BaroConfig, ImuConfig, RadarConfig, Scenario
from brio.simulator.trajectory import Trajectory
from brio.types import GRAVITY, BaroStream, Calibration, ImuStream, NavState, RadarDetection, RadarFrame

LABELS = ("static", "mover", "ghost")


@dataclass
class GroundTruth:
    """Kinematics and biases sampled at the IMU rate."""

    stamps: np.ndarray
    position: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    rotation: np.ndarray
    body_rate: np.ndarray
    gyro_bias: np.ndarray
    accel_bias: np.ndarray

    def __len__(self) -> int:
        return len(self.stamps)

    def state(self, i: int) -> NavState:
        return NavState(
            self.rotation[i],
            self.position[i],
            self.velocity[i],
            self.gyro_bias[i],
            self.accel_bias[i],
            self.stamps[i],
        )

    def index_of(self, t: float, tolerance: float = 1e-9) -> int:
        i = int(np.argmin(np.abs(self.stamps - t)))
        if abs(self.stamps[i] - t) > tolerance:
            raise ValueError(f"no ground-truth sample at t={t}")
        return i


@dataclass
class SimulationResult:
    scenario: Scenario
    calibration: Calibration
    ground_truth: GroundTruth
    imu: ImuStream
    radar: list[RadarFrame]
    baro: BaroStream

    def true_state(self, t: float) -> NavState:
        return true_state(self.scenario, self.ground_truth, t)


def _stamps(duration: float, rate: float) -> np.ndarray:
    n = int(np.floor(duration * rate + 1e-9)) + 1
    return np.arange(n) / rate


def true_state(scenario: Scenario, gt: GroundTruth, t: float) -> NavState:
    """Ground-truth navigation state at an arbitrary stamp."""
    k = Trajectory(scenario.trajectory).sample([t])
    bg = np.array([np.interp(t, gt.stamps, gt.gyro_bias[:, i]) for i in range(3)])
    ba = np.array([np.interp(t, gt.stamps, gt.accel_bias[:, i]) for i in range(3)])
    return NavState(k.rotation[0], k.position[0], k.velocity[0], bg, ba, t)


def generate_ground_truth(scenario: Scenario, rng: np.random.Generator | None = None) -> GroundTruth:
    imu = scenario.imu
    stamps = _stamps(scenario.duration, imu.rate)
    k = Trajectory(scenario.trajectory).sample(stamps)
    n = len(stamps)
    gyro_bias = np.tile(np.asarray(imu.gyro_bias, dtype=float), (n, 1))
    accel_bias = np.tile(np.asarray(imu.accel_bias, dtype=float), (n, 1))
    if rng is not None and not scenario.noiseless:
        dt = 1.0 / imu.rate
        for bias, density in ((gyro_bias, imu.gyro_bias_random_walk), (accel_bias, imu.accel_bias_random_walk)):
            if density > 0:
                steps = rng.normal(0.0, density * np.sqrt(dt), size=(n, 3))
                steps[0] = 0.0
                bias += np.cumsum(steps, axis=0)
    return GroundTruth(stamps, k.position, k.velocity, k.acceleration, k.rotation, k.body_rate, gyro_bias, accel_bias)


def generate_imu(
    gt: GroundTruth,
    config: ImuConfig,
    rng: np.random.Generator | None = None,
    gravity=GRAVITY,
) -> ImuStream:
    """Gyro = body rate + bias + noise; accel = body specific force + bias + noise.

    Pass ``rng=None`` for a noiseless stream.
    """
    g = np.asarray(gravity, dtype=float)
    specific = np.einsum("nji,nj->ni", gt.rotation, gt.acceleration - g)
    gyro = gt.body_rate + gt.gyro_bias
    accel = specific + gt.accel_bias
    if rng is not None:
        sq = np.sqrt(config.rate)
        gyro = gyro + rng.normal(0.0, config.gyro_noise_density * sq, size=gyro.shape)
        accel = accel + rng.normal(0.0, config.accel_noise_density * sq, size=accel.shape)
    return ImuStream(gt.stamps.copy(), gyro, accel)


def baro_event_offset(config: BaroConfig, stamps) -> np.ndarray:
    stamps = np.asarray(stamps, dtype=float)
    out = np.zeros_like(stamps)
    for ev in config.events:
        inside = (stamps >= ev.t) & (stamps <= ev.t + ev.duration)
        phase = (stamps[inside] - ev.t) / ev.duration
        out[inside] += ev.pressure_delta_pa * np.sin(np.pi * phase) ** 2
    return out


def generate_baro(
    scenario: Scenario,
    rng: np.random.Generator | None = None,
) -> BaroStream:
    """Pressure from the inverse atmosphere model at the true altitude.

    Gaussian noise is added in altitude units before conversion; configured
    ground-effect events are added directly in pascal.
    """
    cfg = scenario.baro
    stamps = _stamps(scenario.duration, cfg.rate)
    z = Trajectory(scenario.trajectory).sample(stamps).position[:, 2]
    alt = cfg.start_altitude + z
    if rng is not None:
        alt = alt + rng.normal(0.0, cfg.sigma_altitude, size=alt.shape)
    p = atmosphere.pressure(alt) + baro_event_offset(cfg, stamps)
    return BaroStream(stamps, p)


def _wrap_velocity(v, vmax):
    return (v + vmax) % (2 * vmax) - vmax


class RadarSimulator:
    """Post-CFAR detection generator with repeatable static detections.

    A static target whose true radar-frame position is bitwise unchanged from
    the previous frame re-emits the previous detection, and a target with zero
    true radial velocity lands in the zero-Doppler bin.  Together these make
    a resting sensor produce identical consecutive detections.
    """

    def __init__(
        self,
        scenario: Scenario,
        calibration: Calibration | None = None,
        rng: np.random.Generator | None = None,
        target_rng: np.random.Generator | None = None,
    ):
        self.scenario = scenario
        self.config: RadarConfig = scenario.radar
        self.calibration = calibration or scenario.calibration.calibration()
        self.rng = rng
        self.noisy = rng is not None and not scenario.noiseless
        target_rng = target_rng or np.random.default_rng(scenario.seed)
        self.targets, self.target_rcs = self._place_targets(target_rng)
        self.mover_offsets = [
            (np.asarray(m.extent) * (target_rng.random((m.points, 3)) - 0.5)) for m in scenario.movers
        ]
        self._cache: dict[int, tuple[bytes, RadarDetection]] = {}
        self._snr_offset = self.config.cfar_threshold_db + 40 * np.log10(self.config.max_range)

    def _place_targets(self, rng):
        cfg = self.scenario.targets
        if cfg.points is not None:
            pts = np.asarray(cfg.points, dtype=float).reshape(-1, 3)
            rcs = np.asarray(cfg.rcs_db if cfg.rcs_db is not None else np.full(len(pts), 10.0), dtype=float)
            return pts, rcs
        traj = Trajectory(self.scenario.trajectory)
        anchors = traj.sample(np.linspace(0.0, self.scenario.duration, 200)).position
        n = cfg.count
        base = anchors[rng.integers(0, len(anchors), size=n)]
        dist = rng.uniform(cfg.min_distance, cfg.max_distance, size=n)
        az = rng.uniform(-np.pi, np.pi, size=n)
        max_el = np.deg2rad(cfg.max_elevation_deg)
        el = np.arcsin(rng.uniform(-np.sin(max_el), np.sin(max_el), size=n))
        offset = np.column_stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)]) * dist[:, None]
        lo, hi = cfg.rcs_db_range
        return base + offset, rng.uniform(lo, hi, size=n)

    def _visible(self, p_r, rcs):
        cfg = self.config
        rng_ = np.linalg.norm(p_r, axis=1)
        az = np.arctan2(p_r[:, 0], p_r[:, 1])
        el = np.arcsin(np.clip(p_r[:, 2] / np.maximum(rng_, 1e-12), -1, 1))
        snr = rcs + self._snr_offset - 40 * np.log10(np.maximum(rng_, 1e-12))
        ok = (
            (rng_ >= cfg.min_range)
            & (rng_ <= cfg.max_range)
            & (np.abs(az) <= np.deg2rad(cfg.fov_azimuth_deg))
            & (np.abs(el) <= np.deg2rad(cfg.fov_elevation_deg))
            & (snr >= cfg.cfar_threshold_db)
        )
        return ok, np.round(snr, 1)

    def _measure(self, p_true, v_true, snr, stamp, label):
        cfg = self.config
        p = p_true.copy()
        v = float(v_true)
        if self.noisy:
            p = p + self.rng.normal(0.0, cfg.sigma_position, size=3)
        if cfg.elevation_bias_deg:
            r = np.linalg.norm(p)
            az = np.arctan2(p[0], p[1])
            el = np.arcsin(p[2] / r) + np.deg2rad(cfg.elevation_bias_deg)
            p = r * np.array([np.cos(el) * np.sin(az), np.cos(el) * np.cos(az), np.sin(el)])
        if v == 0.0:
            doppler = 0.0
        else:
            if self.noisy:
                v += self.rng.normal(0.0, cfg.sigma_doppler)
            v = float(_wrap_velocity(v, cfg.max_radial_velocity))
            if cfg.quantize:
                v = round(v / cfg.doppler_resolution) * cfg.doppler_resolution
            doppler = v + 0.0
        return RadarDetection(p, doppler, float(snr), cfg.noise_floor_db, stamp, label)

    def frame(self, t: float, state: NavState, omega=np.zeros(3), frame_id: int = 0) -> RadarFrame:
        """Detections at ``t`` given the true state and true body rate."""
        cfg = self.config
        calib = self.calibration
        r_ir = state.rotation @ calib.R_BR
        t_ir = state.position + state.rotation @ calib.t_BR
        v_ir = state.velocity + state.rotation @ np.cross(np.asarray(omega, dtype=float), calib.t_BR)
        v_r = r_ir.T @ v_ir
        detections: list[RadarDetection] = []

        p_r = (self.targets - t_ir) @ r_ir
        ok, snr = self._visible(p_r, self.target_rcs)
        for i in np.flatnonzero(ok):
            key = p_r[i].tobytes()
            cached = self._cache.get(int(i))
            if cached is not None and cached[0] == key:
                det = cached[1]
                det = RadarDetection(det.position, det.doppler, det.snr, det.noise, t, det.label)
            else:
                e = p_r[i] / np.linalg.norm(p_r[i])
                v_true = -(e @ v_r)
                if abs(v_true) < 1e-12:
                    v_true = 0.0
                det = self._measure(p_r[i], v_true, snr[i], t, "static")
            self._cache[int(i)] = (key, det)
            detections.append(det)
        for i in set(self._cache) - set(int(j) for j in np.flatnonzero(ok)):
            del self._cache[i]

        for mover, offsets in zip(self.scenario.movers, self.mover_offsets):
            if t < mover.t_start or (mover.t_end is not None and t > mover.t_end):
                continue
            u = np.asarray(mover.velocity, dtype=float)
            pts = np.asarray(mover.start, dtype=float) + offsets + u * (t - mover.t_start)
            pm = (pts - t_ir) @ r_ir
            okm, snrm = self._visible(pm, np.full(len(pm), mover.rcs_db))
            rel = r_ir.T @ (u - v_ir)
            for i in np.flatnonzero(okm):
                e = pm[i] / np.linalg.norm(pm[i])
                detections.append(self._measure(pm[i], e @ rel, snrm[i], t, "mover"))

        if self.noisy and cfg.ghost_rate > 0:
            for _ in range(self.rng.poisson(cfg.ghost_rate)):
                az = self.rng.uniform(-1, 1) * np.deg2rad(cfg.fov_azimuth_deg)
                el = self.rng.uniform(-1, 1) * np.deg2rad(cfg.fov_elevation_deg)
                rr = self.rng.uniform(max(cfg.min_range, 0.5), cfg.max_range)
                p = rr * np.array([np.cos(el) * np.sin(az), np.cos(el) * np.cos(az), np.sin(el)])
                dop = self.rng.uniform(-cfg.max_radial_velocity, cfg.max_radial_velocity)
                snr_g = round(cfg.cfar_threshold_db + self.rng.uniform(0, 10), 1)
                detections.append(RadarDetection(p, dop, snr_g, cfg.noise_floor_db, t, "ghost"))
        return RadarFrame(t, detections, frame_id)


def generate_radar_frame(scenario: Scenario, t: float, true_state: NavState, omega=np.zeros(3)) -> RadarFrame:
    """One noiseless frame; use :class:`RadarSimulator` for sequences."""
    return RadarSimulator(scenario).frame(t, true_state, omega)


def simulate(scenario: Scenario) -> SimulationResult:
    """Generate every sensor stream for ``scenario``; deterministic in its seed."""
    seeds = np.random.SeedSequence(scenario.seed).spawn(5)
    rng_target, rng_bias, rng_imu, rng_radar, rng_baro = (np.random.default_rng(s) for s in seeds)
    noisy = not scenario.noiseless
    calib = scenario.calibration.calibration()
    gt = generate_ground_truth(scenario, rng_bias)
    imu = generate_imu(gt, scenario.imu, rng_imu if noisy else None, calib.gravity)
    baro = generate_baro(scenario, rng_baro if noisy else None)

    sim = RadarSimulator(scenario, calib, rng_radar if noisy else None, rng_target)
    stamps = _stamps(scenario.duration, scenario.radar.rate)
    kin = Trajectory(scenario.trajectory).sample(stamps)
    frames = []
    for j, t in enumerate(stamps):
        bg = np.array([np.interp(t, gt.stamps, gt.gyro_bias[:, i]) for i in range(3)])
        ba = np.array([np.interp(t, gt.stamps, gt.accel_bias[:, i]) for i in range(3)])
        state = NavState(kin.rotation[j], kin.position[j], kin.velocity[j], bg, ba, t)
        frames.append(sim.frame(t, state, kin.body_rate[j], frame_id=j))
    return SimulationResult(scenario, calib, gt, imu, frames, baro)
