"""Named scenarios used by the acceptance suite, the scripts and the CLI."""

from __future__ import annotations

from brio.simulator.scenario import (
    BaroConfig,
    BaroEvent,
    ImuConfig,
    MoverConfig,
    RadarConfig,
    Scenario,
    TargetConfig,
)
from brio.simulator.trajectory import TrajectoryConfig

NOISELESS_KINDS = ("hover", "line", "circle", "slalom")


def noiseless(kind: str, duration: float = 10.0, seed: int = 1) -> Scenario:
    """Level flight with perfect sensors, for oracle consistency checks.

    The gentle 3 s ramp keeps the midpoint-rule IMU error well under 1e-6.
    """
    return Scenario(
        name=f"noiseless-{kind}",
        duration=duration,
        seed=seed,
        noiseless=True,
        trajectory=TrajectoryConfig(kind=kind, ramp=3.0),
    )


def mover_hover(seed: int = 3) -> Scenario:
    """Hover while a walking person approaches the radar for 3 s."""
    return Scenario(
        name="mover-hover",
        duration=12.0,
        seed=seed,
        trajectory=TrajectoryConfig(kind="hover"),
        targets=TargetConfig(count=45),
        movers=[
            MoverConfig(
                start=[8.0, -0.5, 0.0],
                velocity=[-2.0, 0.1, 0.0],
                t_start=5.0,
                t_end=8.0,
                points=7,
                extent=[0.4, 0.6, 1.6],
                rcs_db=18.0,
            )
        ],
    )


def ground_effect(seed: int = 5) -> Scenario:
    """Hover with a 1 s ground-effect pressure transient (about 2.5 m of
    apparent altitude).  Reflectors stay within 15 degrees of the horizon so
    Doppler constrains vertical velocity only moderately."""
    return Scenario(
        name="ground-effect",
        duration=12.0,
        seed=seed,
        trajectory=TrajectoryConfig(kind="hover", sway_amplitude=[0.02, 0.02, 0.0]),
        targets=TargetConfig(count=45, max_elevation_deg=15.0),
        baro=BaroConfig(events=[BaroEvent(t=5.0, duration=1.0, pressure_delta_pa=30.0)]),
    )


def static_tracks(seed: int = 7, duration: float = 30.0) -> Scenario:
    """Sensor at rest seeing two repeatable reflectors.

    Both reflectors lie in the body x-z plane, so Doppler leaves lateral
    velocity unobserved; only zero-velocity tracks can stop lateral drift.
    The line through them is horizontal, so the one rotation the two tracks
    cannot see is a roll, which gravity observes.
    """
    return Scenario(
        name="static-tracks",
        duration=duration,
        seed=seed,
        trajectory=TrajectoryConfig(kind="static"),
        targets=TargetConfig(points=[[3.0, 0.0, 1.0], [5.0, 0.0, 1.0]], rcs_db=[15.0, 15.0]),
    )


def elevation_bias(seed: int = 11, duration: float = 100.0) -> Scenario:
    """Closed circles with a +0.5 degree elevation bias on every detection."""
    return Scenario(
        name="elevation-bias",
        duration=duration,
        seed=seed,
        trajectory=TrajectoryConfig(kind="circle", radius=4.0, speed=1.5),
        targets=TargetConfig(count=120),
        radar=RadarConfig(elevation_bias_deg=0.5),
    )


def ghosts_slalom(seed: int = 13) -> Scenario:
    """Slalom with quantized Doppler and ghost detections."""
    return Scenario(
        name="ghosts-slalom",
        duration=20.0,
        seed=seed,
        trajectory=TrajectoryConfig(kind="slalom"),
        radar=RadarConfig(ghost_rate=2.0, quantize=True),
    )


PRESETS = {
    **{f"noiseless-{k}": (lambda k=k: noiseless(k)) for k in NOISELESS_KINDS},
    "mover-hover": mover_hover,
    "ground-effect": ground_effect,
    "static-tracks": static_tracks,
    "elevation-bias": elevation_bias,
    "ghosts-slalom": ghosts_slalom,
}


def preset(name: str) -> Scenario:
    try:
        return PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
