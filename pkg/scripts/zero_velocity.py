"""Position drift of a sensor at rest, with and without zero-velocity tracks."""

from __future__ import annotations

import numpy as np
from _common import dump, estimate, parser

from brio.estimator import EstimatorConfig
from brio.simulator import simulate
from brio.simulator.presets import static_tracks


def main() -> None:
    p = parser(__doc__.splitlines()[0], [7])
    p.add_argument("--track-sigma", type=float, default=3e-4, help="track position sigma [m]")
    p.add_argument("--duration", type=float, default=30.0)
    args = p.parse_args()
    rows = []
    for seed in args.seeds:
        sim = simulate(static_tracks(seed, duration=args.duration))
        for tracking in (True, False):
            cfg = EstimatorConfig(use_tracking=tracking)
            cfg.solver.noise.track_covariance = np.eye(3) * args.track_sigma**2
            est = estimate(sim, cfg)
            drift = float(np.linalg.norm(est.positions[-1] - est.positions[0]))
            rows.append({"seed": seed, "tracking": tracking, "drift_m": drift})
            print(f"seed {seed} tracking {str(tracking):5s} drift {drift:.6f} m", flush=True)
    dump(args.json, rows)


if __name__ == "__main__":
    main()
