import threading

import numpy as np
import pytest

from brio import atmosphere
from brio.estimator import (
    Estimator,
    EstimatorConfig,
    EstimatorError,
    OnlineEstimator,
    associate_tracks,
    bearing_observability,
    initialize,
    predict,
    run_estimation,
)
from brio.estimator.config import SolverConfig
from brio.geometry import euler_zyx_to_matrix, log_so3
from brio.preintegration import preintegrate
from brio.simulator import Scenario, TargetConfig, TrajectoryConfig, simulate
from brio.simulator.presets import noiseless
from brio.types import BaroSample, Calibration, ImuStream, NavState, RadarDetection, RadarFrame

G = 9.81
RATE = 400.0


def static_burst(n=400, accel=(0.0, 0.0, G), gyro=(0.0, 0.0, 0.0), rng=None, sigma_g=0.0, sigma_a=0.0):
    stamps = np.arange(n) / RATE
    w = np.tile(gyro, (n, 1)).astype(float)
    a = np.tile(accel, (n, 1)).astype(float)
    if rng is not None:
        w = w + rng.normal(scale=sigma_g, size=w.shape)
        a = a + rng.normal(scale=sigma_a, size=a.shape)
    return ImuStream(stamps, w, a)


def hover_imu(t0, t1):
    n = int(round((t1 - t0) * RATE)) + 1
    return ImuStream(t0 + np.arange(n) / RATE, np.zeros((n, 3)), np.tile([0.0, 0.0, G], (n, 1)))


def det(p, doppler=0.0, snr=20.0, noise=30.0):
    return RadarDetection(np.asarray(p, dtype=float), doppler, snr, noise)


# -- initialization --------------------------------------------------------------------


def test_initialize_noiseless_level():
    state, h0 = initialize(static_burst())
    assert np.allclose(state.rotation, np.eye(3), atol=1e-15)
    assert np.array_equal(state.gyro_bias, np.zeros(3))
    assert np.array_equal(state.position, np.zeros(3))
    assert np.array_equal(state.velocity, np.zeros(3))
    assert h0 == 0.0


def test_initialize_tilted_roll():
    roll = np.deg2rad(10.0)
    R = euler_zyx_to_matrix(roll, 0.0, 0.0)
    f = R.T @ [0.0, 0.0, G]
    state, _ = initialize(static_burst(accel=f))
    assert abs(np.arctan2(state.rotation[2, 1], state.rotation[2, 2]) - roll) < 1e-6
    assert np.abs(log_so3(state.rotation.T @ R)).max() < 1e-6


def test_initialize_gyro_bias_monte_carlo():
    # The sample mean has std sigma / sqrt(N); every trial lands within 3 of those.
    bg = np.array([0.01, -0.02, 0.005])
    sigma, n = 0.005, 400
    rng = np.random.default_rng(5)
    for _ in range(20):
        state, _ = initialize(static_burst(n=n, gyro=bg, rng=rng, sigma_g=sigma, sigma_a=0.01))
        assert np.all(np.abs(state.gyro_bias - bg) < 3 * sigma / np.sqrt(n))


def test_initialize_h0_from_baro():
    p = 96000.0
    _, h0 = initialize(static_burst(), BaroSample(p, 0.0))
    assert h0 == pytest.approx(float(atmosphere.altitude(p)))
    _, h_mean = initialize(static_burst(), [BaroSample(p, 0.0), BaroSample(p - 10.0, 0.1)])
    assert h_mean == pytest.approx(float(np.mean(atmosphere.altitude(np.array([p, p - 10.0])))))


def test_initialize_errors():
    with pytest.raises(EstimatorError, match="at least 100"):
        initialize(static_burst(n=99))
    moving = static_burst(n=400)
    moving.accel[:, 0] = np.linspace(-3.0, 3.0, 400)
    with pytest.raises(EstimatorError, match="motion detected"):
        initialize(moving)


# -- track association -----------------------------------------------------------------


def test_identical_frames_make_one_track():
    est = Estimator(Calibration())
    est.start(NavState(stamp=0.0))
    frame = [det([4.0, 1.0, 0.5])]
    for k in (1, 2):
        est.add_radar_frame(RadarFrame(k * 0.125, list(frame), k), hover_imu((k - 1) * 0.125, k * 0.125))
    assert len(est.graph.tracks) == 1
    (track,) = est.graph.tracks.values()
    assert len(track.observations) == 2


def test_one_doppler_bin_is_not_associated():
    assoc, new = associate_tracks([det([4.0, 1.0, 0.5], doppler=0.04)], {})
    assert assoc == [] and new == []


def test_different_snr_is_not_associated():
    _, first = associate_tracks([det([4.0, 1.0, 0.5], snr=20.0)], {})
    tracks = {t.id: t for t in first}
    assoc, new = associate_tracks([det([4.0, 1.0, 0.5], snr=20.5)], tracks, next_id=1)
    assert len(new) == 1 and new[0].id == 1
    assert assoc == [(0, 1)]


def test_duplicate_detections_associate_once():
    d = det([4.0, 1.0, 0.5])
    assoc, new = associate_tracks([d, d], {})
    assert len(new) == 1 and assoc == [(0, 0)]


def test_tracks_dropped_after_discard_threshold():
    est = Estimator(Calibration(), EstimatorConfig(discard_after=5))
    est.start(NavState(stamp=0.0))
    dt = 0.125
    est.add_radar_frame(RadarFrame(dt, [det([4.0, 1.0, 0.5])], 1), hover_imu(0.0, dt))
    for k in range(2, 7):
        est.add_radar_frame(RadarFrame(k * dt, [det([5.0, 0.0, 0.0], doppler=-0.1)], k), hover_imu((k - 1) * dt, k * dt))
    assert 0 not in est.graph.live_tracks
    # Its factors remain in the window.
    assert 0 in est.graph.tracks


# -- graph construction --------------------------------------------------------------


def test_add_radar_frame_errors():
    est = Estimator(Calibration())
    with pytest.raises(EstimatorError, match="initialize"):
        est.add_radar_frame(RadarFrame(0.1), hover_imu(0.0, 0.1))
    est.start(NavState(stamp=1.0))
    with pytest.raises(EstimatorError, match="out-of-order"):
        est.add_radar_frame(RadarFrame(0.5), hover_imu(0.0, 1.0))
    with pytest.raises(EstimatorError, match="no IMU samples"):
        est.add_radar_frame(RadarFrame(1.2), ImuStream(np.zeros(0), np.zeros((0, 3)), np.zeros((0, 3))))
    with pytest.raises(EstimatorError, match="must cover"):
        est.add_radar_frame(RadarFrame(1.5), hover_imu(1.2, 1.5))


def test_imu_gap_rejected():
    est = Estimator(Calibration(), EstimatorConfig(max_imu_gap=0.05))
    est.start(NavState(stamp=0.0))
    imu = hover_imu(0.0, 0.5)
    gappy = imu[(imu.stamps < 0.2) | (imu.stamps > 0.3)]
    with pytest.raises(EstimatorError, match="gap"):
        est.add_radar_frame(RadarFrame(0.5), gappy)


def test_first_frame_attaches_to_anchor():
    est = Estimator(Calibration())
    est.start(NavState(stamp=0.0))
    sid = est.add_radar_frame(RadarFrame(0.0, [det([4.0, 1.0, 0.5], doppler=0.0)]), hover_imu(0.0, 0.0))
    assert len(est.graph) == 1
    assert sid == est.graph.order[0]
    assert len(est.graph.frames[sid].doppler) == 1


def test_zero_detection_frame_still_creates_state():
    est = Estimator(Calibration())
    est.start(NavState(stamp=0.0))
    est.process(RadarFrame(0.125, [], 1), hover_imu(0.0, 0.125), BaroSample(atmosphere.pressure(0.0), 0.125))
    assert len(est.graph) == 2
    assert est.results[-1].detections == 0
    assert est.results[-1].weakly_observable
    assert np.abs(est.latest_state.velocity).max() < 1e-9


def test_window_holds_about_eighty_states():
    sim = simulate(noiseless("hover", duration=14.0))
    res = run_estimation(sim.imu, sim.radar, sim.baro, sim.calibration)
    g = res.estimator.graph
    span = g.states[g.order[-1]].stamp - g.states[g.order[0]].stamp
    assert 79 <= len(g) <= 82
    assert span <= 10.0 + 1e-9


def test_prior_only_solve_returns_prior():
    rng = np.random.default_rng(3)
    prior = NavState(rotation=euler_zyx_to_matrix(0.1, -0.05, 0.3), position=rng.normal(size=3), velocity=rng.normal(size=3), stamp=0.0)
    est = Estimator(Calibration())
    est.start(prior)
    est.solve()
    x = est.latest_state
    assert np.array_equal(x.position, prior.position)
    assert np.array_equal(x.rotation, prior.rotation)


# -- solver ----------------------------------------------------------------------------


@pytest.fixture(scope="module")
def noisy_run():
    scenario = Scenario(duration=6.0, seed=21, trajectory=TrajectoryConfig(kind="slalom"), targets=TargetConfig(count=40))
    sim = simulate(scenario)
    return sim, run_estimation(sim.imu, sim.radar, sim.baro, sim.calibration)


def test_cost_non_increasing(noisy_run):
    _, res = noisy_run
    for fr in res.frames:
        assert all(b <= a for a, b in zip(fr.costs, fr.costs[1:])), fr.frame_id


def test_noiseless_line_positions():
    sim = simulate(noiseless("line"))
    res = run_estimation(sim.imu, sim.radar, sim.baro, sim.calibration)
    for fr in res.frames:
        truth = sim.true_state(fr.stamp)
        assert np.abs(fr.state.position - truth.position).max() < 1e-4
        assert np.abs(fr.state.velocity - truth.velocity).max() < 1e-6


def test_window_invariance_batch_vs_sliding(noisy_run):
    sim, _ = noisy_run
    cfg = EstimatorConfig(window_duration=100.0)
    cfg.solver.relative_tolerance = 1e-12
    cfg.solver.absolute_tolerance = 1e-14
    cfg.solver.max_iterations = 50
    online = run_estimation(sim.imu, sim.radar, sim.baro, sim.calibration, cfg)
    # Batch: build the whole graph first, then solve once.
    est = Estimator(sim.calibration, cfg)
    t0 = online.frames[0].stamp
    est.initialize(sim.imu[sim.imu.stamps <= t0 + 1e-9], [sim.baro.sample(i) for i in np.flatnonzero(sim.baro.stamps <= t0 + 1e-9)], stamp=t0)
    prev = t0
    for frame in [f for f in sim.radar if f.stamp >= t0 - 1e-9]:
        est.add_radar_frame(frame, sim.imu.covering(prev, frame.stamp), sim.baro.sample(sim.baro.nearest(frame.stamp)))
        prev = frame.stamp
    est.solve()
    a, b = online.estimator.latest_state, est.latest_state
    assert np.abs(a.position - b.position).max() < 1e-6
    assert np.abs(a.velocity - b.velocity).max() < 1e-6


def test_unconstrained_subspace_reported():
    est = Estimator(Calibration())
    est.start(NavState(stamp=0.0), sigmas=np.r_[np.full(3, 0.1), np.full(3, 0.1), np.full(3, 0.1), np.full(3, 0.1), np.full(3, np.inf)])
    with pytest.raises(EstimatorError, match="unconstrained"):
        est.solve()


def test_coplanar_bearings_flagged():
    bearings = np.array([[1.0, 0.0, 0.0], [0.8, 0.6, 0.0], [0.6, -0.8, 0.0], [0.0, 1.0, 0.0]])
    cond, weak = bearing_observability(bearings)
    assert cond == float("inf")
    assert abs(abs(weak[2]) - 1.0) < 1e-12
    cond3, _ = bearing_observability(np.eye(3))
    assert cond3 == 1.0


def test_noiseless_velocity_exact_with_independent_bearings():
    sim = simulate(noiseless("circle"))
    res = run_estimation(sim.imu, sim.radar, sim.baro, sim.calibration)
    ok = [fr for fr in res.frames if fr.detections >= 3 and not fr.weakly_observable]
    assert len(ok) > 50
    for fr in ok:
        assert np.abs(fr.state.velocity - sim.true_state(fr.stamp).velocity).max() < 1e-6


# -- prediction and online use -----------------------------------------------------------


def test_predict_empty_returns_input():
    x = NavState(velocity=[1.0, 2.0, 3.0], stamp=4.0)
    assert predict(x, [], Calibration().gravity) is x


def test_predict_static_hover():
    x = NavState(stamp=0.0)
    y = predict(x, hover_imu(0.0, 2.0), Calibration().gravity)
    assert y.stamp == 2.0
    assert np.abs(y.velocity).max() < 1e-6


def test_predict_matches_preintegration(rng):
    imu = ImuStream(np.arange(81) / RATE, rng.normal(scale=0.3, size=(81, 3)), [0, 0, G] + rng.normal(size=(81, 3)))
    x = NavState(rotation=euler_zyx_to_matrix(0.1, 0.2, 0.3), velocity=[1.0, 0.0, 0.5], gyro_bias=[0.01, 0, 0], stamp=0.0)
    y = predict(x, imu, Calibration().gravity)
    z = preintegrate(imu, x.gyro_bias, x.accel_bias, t_start=0.0, t_end=imu.stamps[-1]).predict(x, Calibration().gravity)
    assert np.abs(y.position - z.position).max() < 1e-9
    assert np.abs(y.velocity - z.velocity).max() < 1e-9
    assert np.abs(y.rotation - z.rotation).max() < 1e-9


def _online_positions(sim, threaded):
    res = run_estimation(sim.imu, sim.radar, sim.baro, sim.calibration, threaded=threaded)
    return res.positions, res.velocities


def test_threaded_equals_single_threaded(noisy_run):
    sim, res = noisy_run
    p, v = _online_positions(sim, threaded=True)
    assert np.array_equal(p, res.positions)
    assert np.array_equal(v, res.velocities)


def test_single_threaded_is_deterministic(noisy_run):
    sim, res = noisy_run
    p, v = _online_positions(sim, threaded=False)
    assert np.array_equal(p, res.positions)
    assert np.array_equal(v, res.velocities)


def test_snapshot_stamp_is_monotonic():
    sim = simulate(noiseless("hover", duration=4.0))
    est = Estimator(sim.calibration)
    t0 = sim.radar[8].stamp
    est.initialize(sim.imu[sim.imu.stamps <= t0], stamp=t0)
    online = OnlineEstimator(est, threaded=True)
    seen = []
    stop = threading.Event()

    def reader():
        while not stop.is_set():
            seen.append(online.snapshot().stamp)
            online.predict(sim.imu.covering(seen[-1], seen[-1] + 0.05))

    thread = threading.Thread(target=reader)
    thread.start()
    prev = t0
    for frame in sim.radar[9:]:
        online.submit(frame, sim.imu.covering(prev, frame.stamp))
        prev = frame.stamp
    online.close()
    stop.set()
    thread.join()
    assert len(seen) > 0
    assert all(b >= a for a, b in zip(seen, seen[1:]))
    assert online.snapshot().stamp == sim.radar[-1].stamp


def test_online_requires_initialized_estimator():
    with pytest.raises(EstimatorError):
        OnlineEstimator(Estimator(Calibration()))


def test_online_surfaces_worker_errors():
    est = Estimator(Calibration())
    est.start(NavState(stamp=1.0))
    online = OnlineEstimator(est, threaded=True)
    online.submit(RadarFrame(0.5), hover_imu(0.0, 1.0))
    with pytest.raises(EstimatorError, match="out-of-order"):
        online.close()


def test_config_validation():
    with pytest.raises(ValueError):
        EstimatorConfig(window_duration=0.0)
    with pytest.raises(ValueError):
        EstimatorConfig(marginalization="isam")
    with pytest.raises(ValueError):
        SolverConfig(lambda_up=0.5)
    cfg = EstimatorConfig.from_dict({"window_duration": 5.0, "solver": {"doppler_loss": {"kind": "cauchy"}}})
    assert cfg.window_duration == 5.0
    assert EstimatorConfig.from_dict(cfg.to_dict()).to_dict() == cfg.to_dict()
