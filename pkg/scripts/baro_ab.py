"""Vertical-velocity excursion under a ground-effect pressure transient.

The reference run re-simulates the same scenario without the transient.
"""

from __future__ import annotations

import numpy as np
from _common import dump, estimate, parser

from brio.estimator import EstimatorConfig
from brio.losses import RobustLoss
from brio.simulator import simulate
from brio.simulator.presets import ground_effect


def main() -> None:
    args = parser(__doc__.splitlines()[0], [5, 6, 7, 8]).parse_args()
    rows = []
    for seed in args.seeds:
        sc = ground_effect(seed)
        sim = simulate(sc)
        sc.baro.events = []
        ref = simulate(sc)
        out = {"seed": seed}
        for name in ("quadratic", "fair"):
            cfg = EstimatorConfig()
            cfg.solver.baro_loss = RobustLoss(name)
            a, b = estimate(sim, cfg), estimate(ref, cfg)
            out[name] = float(np.abs(a.velocities[:, 2] - b.velocities[:, 2]).max())
        out["ratio"] = out["fair"] / out["quadratic"]
        rows.append(out)
        print(f"seed {seed} quadratic {out['quadratic']:.3f} fair {out['fair']:.3f} ratio {out['ratio']:.2f}", flush=True)
    dump(args.json, rows)


if __name__ == "__main__":
    main()
