"""Follow a lane-changing car from 150 m with the camera in the loop.

Runs the lane-change scenario in vision mode, prints how well the aircraft
held the car in view and matched its speed and heading, and writes the CSV
logs and charts to ``--out``.

    python demos/01_lane_change_closed_loop.py --seconds 60 --out /tmp/lane
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from visguide.harness import RunConfig, emit_plots, run

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seconds", type=float, default=60.0)
    ap.add_argument("--out", type=Path, default=Path("demo_lane_change"))
    args = ap.parse_args()

    lg = run(RunConfig(SCENARIOS / "lane_change.yaml", duration=args.seconds, out_dir=args.out))
    t = lg.column("t")
    dv = np.abs(lg.column("uas_speed") - lg.column("veh_speed"))
    dh = np.degrees(np.abs(np.angle(np.exp(1j * (lg.column("uas_heading") - lg.column("veh_heading"))))))
    occ = lg.column("occlusion")
    late = t > min(40.0, t[-1] / 2)

    print(f"frames logged        : {len(lg)}")
    print(f"car inside the image : {100 * lg.column('in_fov').mean():.1f} % of frames")
    print(f"frames per state     : " + ", ".join(f"{s}={int((occ == s).sum())}" for s in "NPT"))
    print(f"|speed gap| late     : max {dv[late].max():.2f} m/s")
    print(f"|heading gap| late   : max {dh[late].max():.2f} deg")
    paths = emit_plots(lg, args.out / "plots")
    print(f"{len(paths)} charts in {args.out / 'plots'}")


if __name__ == "__main__":
    main()
