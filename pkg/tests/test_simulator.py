import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from brio import atmosphere
from brio.simulator import (
    BaroConfig,
    BaroEvent,
    GroundTruth,
    ImuConfig,
    RadarConfig,
    Scenario,
    TargetConfig,
    Trajectory,
    TrajectoryConfig,
    generate_baro,
    generate_imu,
    generate_radar_frame,
    simulate,
)
from brio.simulator.presets import PRESETS, ghosts_slalom, mover_hover, noiseless, preset, static_tracks
from brio.simulator.sensors import LABELS
from brio.types import GRAVITY, NavState

G = float(-GRAVITY[2])


def single_target_scenario(distance):
    sc = Scenario(duration=1.0, noiseless=True, trajectory=TrajectoryConfig(kind="static"))
    calib = sc.calibration.calibration()
    # On the radar boresight, which is body x.
    sc.targets = TargetConfig(points=[list(calib.t_BR + [distance, 0.0, 0.0])], rcs_db=[20.0])
    return sc


# -- radar ------------------------------------------------------------------------------


def test_target_straight_ahead_zero_doppler():
    frame = generate_radar_frame(single_target_scenario(5.0), 0.0, NavState())
    assert len(frame) == 1
    d = frame.detections[0]
    assert d.doppler == 0.0
    assert np.allclose(d.position, [0.0, 5.0, 0.0], atol=1e-12)
    assert d.label == "static"


def test_approaching_target_negative_doppler():
    frame = generate_radar_frame(single_target_scenario(5.0), 0.0, NavState(velocity=[1.0, 0.0, 0.0]))
    assert frame.detections[0].doppler == pytest.approx(-1.0, abs=1e-12)


def test_target_beyond_max_range_absent():
    assert len(generate_radar_frame(single_target_scenario(12.0), 0.0, NavState())) == 0
    assert len(generate_radar_frame(single_target_scenario(10.9), 0.0, NavState())) == 1


def test_target_outside_field_of_view_absent():
    sc = single_target_scenario(5.0)
    sc.targets.points = [[-5.0, 0.0, 0.0]]
    assert len(generate_radar_frame(sc, 0.0, NavState())) == 0


def test_doppler_quantization():
    sc = single_target_scenario(5.0)
    sc.radar = RadarConfig(quantize=True)
    frame = generate_radar_frame(sc, 0.0, NavState(velocity=[0.53, 0.0, 0.0]))
    assert frame.detections[0].doppler == pytest.approx(-0.52, abs=1e-12)


def test_static_sensor_repeats_detections_bitwise():
    sim = simulate(static_tracks(duration=3.0))
    a, b = sim.radar[-2].detections, sim.radar[-1].detections
    assert len(a) == 2
    for x, y in zip(a, b):
        assert x.position.tobytes() == y.position.tobytes()
        assert (x.doppler, x.snr, x.noise) == (y.doppler, y.snr, y.noise) == (0.0, x.snr, x.noise)


def test_labels_cover_outlier_classes():
    mover = {d.label for f in simulate(mover_hover()).radar for d in f.detections}
    ghosts = {d.label for f in simulate(ghosts_slalom()).radar[:40] for d in f.detections}
    assert mover == {"static", "mover"}
    assert "ghost" in ghosts and ghosts <= set(LABELS)


@settings(max_examples=10)
@given(seed=st.integers(0, 10_000))
def test_detections_respect_radar_limits(seed):
    sc = Scenario(duration=2.0, seed=seed, trajectory=TrajectoryConfig(kind="slalom", start_delay=0.0))
    sc.radar.ghost_rate = 1.0
    cfg = sc.radar
    for frame in simulate(sc).radar:
        for d in frame.detections:
            assert cfg.min_range - 0.1 <= d.range <= cfg.max_range + 0.1
            assert abs(d.doppler) <= cfg.max_radial_velocity


# -- IMU --------------------------------------------------------------------------------


def _gt(n, acceleration, rotation=np.eye(3), body_rate=(0.0, 0.0, 0.0)):
    z = np.zeros((n, 3))
    return GroundTruth(
        np.arange(n) / 400.0,
        z,
        z,
        np.tile(acceleration, (n, 1)),
        np.tile(rotation, (n, 1, 1)),
        np.tile(body_rate, (n, 1)),
        z,
        z,
    )


def test_static_level_imu():
    imu = generate_imu(_gt(10, [0.0, 0.0, 0.0]), ImuConfig())
    assert np.array_equal(imu.gyro, np.zeros((10, 3)))
    assert np.allclose(imu.accel, [0.0, 0.0, G])


def test_forward_acceleration_imu():
    imu = generate_imu(_gt(10, [1.0, 0.0, 0.0]), ImuConfig())
    assert np.allclose(imu.accel, [1.0, 0.0, G])


def test_circle_centripetal_acceleration():
    cfg = TrajectoryConfig(kind="circle", radius=3.0, speed=1.5)
    sc = Scenario(duration=12.0, noiseless=True, trajectory=cfg)
    sim = simulate(sc)
    settled = sim.imu.stamps > cfg.start_delay + cfg.ramp + 0.1
    f = sim.imu.accel[settled]
    R = sim.ground_truth.rotation[settled]
    a = np.einsum("nij,nj->ni", R, f) + GRAVITY
    omega = cfg.speed / cfg.radius
    assert np.abs(np.linalg.norm(a, axis=1) - omega**2 * cfg.radius).max() < 1e-6
    gyro = sim.imu.gyro[settled] - sim.ground_truth.gyro_bias[settled]
    assert np.abs(gyro[:, 2] - omega).max() < 1e-12


def test_ground_truth_kinematically_consistent():
    sim = simulate(noiseless("slalom"))
    gt = sim.ground_truth
    dt = gt.stamps[1] - gt.stamps[0]
    v_fd = np.gradient(gt.position, dt, axis=0)
    a_fd = np.gradient(gt.velocity, dt, axis=0)
    assert np.abs(v_fd - gt.velocity)[1:-1].max() < 1e-5
    assert np.abs(a_fd - gt.acceleration)[1:-1].max() < 1e-4


def test_trajectories_start_at_rest_at_origin():
    for kind in ("static", "hover", "line", "circle", "slalom"):
        k = Trajectory(TrajectoryConfig(kind=kind)).sample([0.0])
        assert np.allclose(k.position, 0.0, atol=1e-12)
        assert np.allclose(k.velocity, 0.0, atol=1e-12)
        assert np.allclose(k.rotation[0], np.eye(3))


# -- barometer ---------------------------------------------------------------------------


def test_altitude_pressure_round_trip():
    for z in (-500.0, 0.0, 400.0, 2500.0, 9000.0):
        assert abs(float(atmosphere.altitude(atmosphere.pressure(z))) - z) < 1e-6


def test_altitude_outside_model_raises():
    with pytest.raises(ValueError):
        atmosphere.pressure(12000.0)
    with pytest.raises(ValueError):
        generate_baro(Scenario(duration=1.0, trajectory=TrajectoryConfig(kind="static"), baro=BaroConfig(start_altitude=20000.0)))


def test_constant_altitude_constant_pressure():
    baro = generate_baro(Scenario(duration=2.0, trajectory=TrajectoryConfig(kind="static")))
    assert len(baro) == 101
    assert np.all(baro.pressure == baro.pressure[0])


def test_ground_effect_event_transient():
    sc = Scenario(
        duration=3.0,
        trajectory=TrajectoryConfig(kind="static"),
        baro=BaroConfig(events=[BaroEvent(t=1.0, duration=0.4, pressure_delta_pa=30.0)]),
    )
    p = generate_baro(sc).pressure
    base = p[0]
    stamps = np.arange(len(p)) / 50.0
    delta = p - base
    assert np.all(delta[(stamps < 1.0) | (stamps > 1.4)] == 0.0)
    assert delta.max() == pytest.approx(30.0)
    assert stamps[np.argmax(delta)] == pytest.approx(1.2)


# -- whole scenarios ---------------------------------------------------------------------


def test_hover_rates():
    sim = simulate(noiseless("hover"))
    assert len(sim.imu) == 4001
    assert len(sim.radar) == 81
    assert len(sim.baro) == 501


def test_simulation_deterministic():
    a, b = simulate(mover_hover()), simulate(mover_hover())
    assert np.array_equal(a.imu.accel, b.imu.accel)
    assert np.array_equal(a.baro.pressure, b.baro.pressure)
    for fa, fb in zip(a.radar, b.radar):
        assert [d.position.tobytes() for d in fa.detections] == [d.position.tobytes() for d in fb.detections]
        assert [d.doppler for d in fa.detections] == [d.doppler for d in fb.detections]


def test_seed_changes_output():
    a = simulate(Scenario(duration=1.0, seed=1, trajectory=TrajectoryConfig(kind="hover")))
    b = simulate(Scenario(duration=1.0, seed=2, trajectory=TrajectoryConfig(kind="hover")))
    assert not np.array_equal(a.imu.accel, b.imu.accel)


def test_detection_density_in_typical_range():
    sim = simulate(preset("ghosts-slalom"))
    counts = [len(f) for f in sim.radar]
    assert 5 <= np.median(counts) <= 15


def test_presets_resolve():
    for name in PRESETS:
        assert preset(name).name == name
    with pytest.raises(KeyError):
        preset("nope")


def test_scenario_validation():
    with pytest.raises(ValueError):
        TrajectoryConfig(kind="spiral")
    with pytest.raises(ValueError):
        RadarConfig(rate=0.0)
