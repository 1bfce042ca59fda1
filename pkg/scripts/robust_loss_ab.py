"""Velocity excursion of each Doppler loss while a person walks past the radar.

Each loss runs twice: on all detections and with the mover's detections
removed.  The excursion is the largest velocity difference between the two.
"""

from __future__ import annotations

from _common import dump, estimate, excursion, parser

from brio.estimator import EstimatorConfig
from brio.losses import RobustLoss
from brio.simulator import simulate
from brio.simulator.presets import mover_hover
from brio.types import RadarFrame

LOSSES = ("quadratic", "fair", "huber", "cauchy", "welsch")


def main() -> None:
    args = parser(__doc__.splitlines()[0], [3]).parse_args()
    rows = []
    for seed in args.seeds:
        sim = simulate(mover_hover(seed))
        clean = [RadarFrame(f.stamp, [d for d in f.detections if d.label != "mover"], f.frame_id) for f in sim.radar]
        for name in LOSSES:
            cfg = EstimatorConfig()
            cfg.solver.doppler_loss = RobustLoss(name)
            e = excursion(estimate(sim, cfg).velocities, estimate(sim, cfg, clean).velocities)
            rows.append({"seed": seed, "loss": name, "excursion_mps": e})
            print(f"seed {seed} {name:9s} excursion {e:.5f} m/s", flush=True)
    dump(args.json, rows)


if __name__ == "__main__":
    main()
