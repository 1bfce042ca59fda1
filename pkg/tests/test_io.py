import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from brio.configio import ConfigError, from_dict, to_jsonable
from brio.estimator import EstimatorConfig
from brio.io import (
    IMU_COLUMNS,
    RADAR_COLUMNS,
    FormatError,
    SensorLogBundle,
    _fmt,
    read_baro,
    read_calibration,
    read_imu,
    read_radar,
    write_baro,
    write_calibration,
    write_imu,
    write_radar,
)
from brio.simulator import Scenario, simulate
from brio.simulator.presets import mover_hover
from brio.types import BaroStream, Calibration, ImuStream, RadarDetection, RadarFrame

from conftest import random_calibration


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_format_round_trips_exactly(v):
    assert float(_fmt(v)) == v


def test_imu_round_trip(tmp_path, rng):
    imu = ImuStream(np.arange(50) / 400.0, rng.normal(size=(50, 3)), rng.normal(size=(50, 3)))
    write_imu(tmp_path / "imu.csv", imu)
    lines = (tmp_path / "imu.csv").read_text().splitlines()
    assert lines[0] == "# brio-imu v1"
    assert lines[1] == ",".join(IMU_COLUMNS)
    back = read_imu(tmp_path / "imu.csv")
    assert np.array_equal(back.stamps, imu.stamps)
    assert np.array_equal(back.gyro, imu.gyro)
    assert np.array_equal(back.accel, imu.accel)


def test_radar_round_trip(tmp_path):
    sim = simulate(mover_hover())
    write_radar(tmp_path / "radar.csv", sim.radar)
    assert (tmp_path / "radar.csv").read_text().splitlines()[1] == ",".join(RADAR_COLUMNS)
    back = read_radar(tmp_path / "radar.csv")
    nonempty = [f for f in sim.radar if len(f)]
    assert len(back) == len(nonempty)
    for a, b in zip(nonempty, back):
        assert (a.stamp, a.frame_id, len(a)) == (b.stamp, b.frame_id, len(b))
        for da, db in zip(a.detections, b.detections):
            assert da.position.tobytes() == db.position.tobytes()
            assert (da.doppler, da.snr, da.noise, da.label) == (db.doppler, db.snr, db.noise, db.label)


def test_baro_and_calibration_round_trip(tmp_path, rng):
    baro = BaroStream(np.arange(10) / 50.0, 96000.0 + rng.normal(size=10))
    write_baro(tmp_path / "baro.csv", baro)
    back = read_baro(tmp_path / "baro.csv")
    assert np.array_equal(back.pressure, baro.pressure)
    calib = random_calibration(rng)
    write_calibration(tmp_path / "calibration.json", calib)
    c2 = read_calibration(tmp_path / "calibration.json")
    assert np.abs(c2.R_BR - calib.R_BR).max() < 1e-15
    assert np.array_equal(c2.t_BR, calib.t_BR)


def test_schema_version_mismatch_rejected(tmp_path):
    write_imu(tmp_path / "imu.csv", ImuStream(np.arange(3.0), np.zeros((3, 3)), np.zeros((3, 3))))
    text = (tmp_path / "imu.csv").read_text().replace("v1", "v2", 1)
    (tmp_path / "imu.csv").write_text(text)
    with pytest.raises(FormatError, match=r"imu.csv:1: expected schema line"):
        read_imu(tmp_path / "imu.csv")


def test_wrong_kind_rejected(tmp_path):
    write_baro(tmp_path / "baro.csv", BaroStream([0.0], [96000.0]))
    with pytest.raises(FormatError, match="brio-imu"):
        read_imu(tmp_path / "baro.csv")


def test_line_precise_errors(tmp_path):
    p = tmp_path / "imu.csv"
    p.write_text("# brio-imu v1\n" + ",".join(IMU_COLUMNS) + "\n0,0,0,0,0,0,9.81\n0.1,0,0\n")
    with pytest.raises(FormatError, match=r"imu.csv:4: expected 7 fields"):
        read_imu(p)
    p.write_text("# brio-imu v1\nstamp,wx\n")
    with pytest.raises(FormatError, match=r"imu.csv:2: expected columns"):
        read_imu(p)
    r = tmp_path / "radar.csv"
    r.write_text("# brio-radar v1\n" + ",".join(RADAR_COLUMNS) + "\n0.0,0,1,1,1,0,10,30,\n0.1,1,x,1,1,0,10,30,\n")
    with pytest.raises(FormatError, match=r"radar.csv:4"):
        read_radar(r)
    r.write_text("# brio-radar v1\n" + ",".join(RADAR_COLUMNS) + "\n0.0,0,0,0,0,0,10,30,\n")
    with pytest.raises(FormatError, match=r"radar.csv:3: radar detection at zero range"):
        read_radar(r)


def test_non_monotone_imu_rejected(tmp_path):
    write_imu(tmp_path / "imu.csv", ImuStream([0.0, 0.2, 0.1], np.zeros((3, 3)), np.zeros((3, 3))))
    with pytest.raises(FormatError, match="strictly increasing"):
        read_imu(tmp_path / "imu.csv")


def test_calibration_errors(tmp_path):
    p = tmp_path / "calibration.json"
    p.write_text('{"q_BR": [0, 0, 0, 1]}')
    with pytest.raises(FormatError, match="missing required field 't_BR'"):
        read_calibration(p)
    p.write_text('{"q_BR": [0, 0, 0, 1], "t_BR": [0, 0, 0], "extra": 1}')
    with pytest.raises(FormatError, match="unknown key"):
        read_calibration(p)
    p.write_text('{"q_BR": [0, 0, 0, 1],\n "t_BR": [0, 0, 0]\n,,}')
    with pytest.raises(FormatError, match=r"calibration.json:3:"):
        read_calibration(p)


def test_bundle_validation(tmp_path):
    with pytest.raises(FormatError, match="not a directory"):
        SensorLogBundle(tmp_path / "nope").validate()
    write_imu(tmp_path / "imu.csv", ImuStream([0.0], np.zeros((1, 3)), np.zeros((1, 3))))
    with pytest.raises(FormatError, match="missing radar.csv, baro.csv, calibration.json"):
        SensorLogBundle(tmp_path).validate()


# -- config parsing -------------------------------------------------------------------


def test_config_unknown_key_rejected():
    with pytest.raises(ConfigError, match=r"solver: unknown key\(s\) bogus"):
        EstimatorConfig.from_dict({"solver": {"bogus": 1}})


def test_config_type_errors():
    with pytest.raises(ConfigError, match="window_duration: expected a number"):
        EstimatorConfig.from_dict({"window_duration": "ten"})
    with pytest.raises(ConfigError, match="use_baro: expected true/false"):
        EstimatorConfig.from_dict({"use_baro": 1})
    with pytest.raises(ConfigError, match="is not one of"):
        EstimatorConfig.from_dict({"solver": {"doppler_loss": {"kind": "tukey"}}})


def test_scenario_missing_required_field():
    with pytest.raises(ConfigError, match="missing required field 'trajectory'"):
        from_dict(Scenario, {"duration": 5.0})
    with pytest.raises(ConfigError, match="missing required field 'trajectory.kind'"):
        from_dict(Scenario, {"duration": 5.0, "trajectory": {}})


def test_scenario_dict_round_trip():
    sc = mover_hover()
    data = json.loads(json.dumps(to_jsonable(sc)))
    again = Scenario.from_dict(data)
    a, b = simulate(sc), simulate(again)
    assert np.array_equal(a.imu.accel, b.imu.accel)


def test_radar_detection_validation():
    with pytest.raises(ValueError):
        RadarDetection([0.0, 0.0, 0.0], 0.0)
    d = RadarDetection([3.0, 4.0, 0.0], -0.5)
    assert d.range == 5.0
    assert np.allclose(d.bearing, [0.6, 0.8, 0.0])


def test_baro_stream_nearest_ties_go_earlier():
    b = BaroStream([0.0, 0.02, 0.04], [1e5, 1e5, 1e5])
    assert b.nearest(-1.0) == 0
    assert b.nearest(0.01) == 0
    assert b.nearest(0.011) == 1
    assert b.nearest(5.0) == 2
    with pytest.raises(ValueError):
        BaroStream([0.0], [-1.0])


def test_calibration_default_is_forward_looking():
    c = Calibration.forward_looking()
    # Radar boresight (y) is body x.
    assert np.allclose(c.R_BR @ [0.0, 1.0, 0.0], [1.0, 0.0, 0.0])
    assert len(RadarFrame(0.0, [RadarDetection([0, 1, 0], 0.0)])) == 1
