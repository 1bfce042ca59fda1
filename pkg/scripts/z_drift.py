"""Vertical drift with and without the barometer under a radar elevation bias."""

from __future__ import annotations

from _common import dump, estimate, parser

from brio.estimator import EstimatorConfig
from brio.simulator import simulate
from brio.simulator.presets import elevation_bias


def z_drift(sim, est) -> float:
    d = est.positions[-1] - est.positions[0]
    t = sim.true_state(est.stamps[-1]).position[2] - sim.true_state(est.stamps[0]).position[2]
    return float(abs(d[2] - t))


def main() -> None:
    p = parser(__doc__.splitlines()[0], [11])
    p.add_argument("--duration", type=float, default=100.0)
    args = p.parse_args()
    rows = []
    for seed in args.seeds:
        sim = simulate(elevation_bias(seed, duration=args.duration))
        brio = z_drift(sim, estimate(sim, EstimatorConfig(use_baro=True)))
        rio = z_drift(sim, estimate(sim, EstimatorConfig(use_baro=False)))
        rows.append({"seed": seed, "brio_m": brio, "rio_m": rio, "ratio": brio / rio})
        print(f"seed {seed} BRIO {brio:.4f} m RIO {rio:.4f} m ratio {brio / rio:.1%}", flush=True)
    dump(args.json, rows)


if __name__ == "__main__":
    main()
