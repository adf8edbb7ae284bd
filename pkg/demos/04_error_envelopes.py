"""Check the guidance law against its own promise, with perfect sensing.

With the true relative state fed straight to the guidance law, the cone
error and the speed-matching error should each decay exponentially at the
chosen gain.  This script runs the lane change in truth mode for a few gain
pairs and reports the fitted decay rates next to the gains.

    python demos/04_error_envelopes.py --seconds 40
"""

from __future__ import annotations

import argparse
from dataclasses import replace
from pathlib import Path

from visguide.guidance import GuidanceConfig, error_dynamics_check
from visguide.harness import RunConfig, load_scenario, run

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seconds", type=float, default=40.0)
    args = ap.parse_args()
    sc = load_scenario(SCENARIOS / "lane_change.yaml")
    print("  k1    k2   fitted k1  fitted k2  worst ratio e1/e2  within 5%")
    for k1, k2 in [(0.75, 0.5), (2.0, 0.5), (3.0, 0.75)]:
        lg = run(RunConfig(replace(sc, guidance=replace(sc.guidance, k1=k1, k2=k2)),
                           mode="truth", duration=args.seconds))
        exact = (lg.column("saturated") == 0) & (lg.column("regularized") == 0)
        rep = error_dynamics_check(lg.column("t"), lg.column("e1"), lg.column("e2"),
                                   GuidanceConfig(k1=k1, k2=k2), exact)
        print(f"{k1:5.2f} {k2:5.2f}   {rep.k1_fit:8.3f}  {rep.k2_fit:8.3f}     "
              f"{rep.e1_worst_ratio:6.4f}/{rep.e2_worst_ratio:6.4f}     {rep.passed}")


if __name__ == "__main__":
    main()
