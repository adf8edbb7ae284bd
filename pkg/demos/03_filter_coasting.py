"""Coast a Singer-model filter through a two-second blackout.

A car drives straight at 20 m/s while position fixes arrive at 30 Hz with
one ground-sample distance of noise.  Fixes stop for 60 frames.  While they
are missing the filter feeds itself its own prediction with a measurement
noise that grows fivefold per frame, so the estimate keeps moving and its
uncertainty grows.  When the fixes return the error collapses again.

    python demos/03_filter_coasting.py
"""

from __future__ import annotations

import math

import numpy as np

from visguide.estimator import FilterConfig, TargetFilter


def main() -> None:
    cfg = FilterConfig()
    sigma = math.sqrt(cfg.R0[0, 0])
    rng = np.random.default_rng(0)
    filt = TargetFilter(cfg)
    print("frame  fix?  pos err [m]  sqrt(P_xx) [m]")
    for k in range(300):
        truth = np.array([20.0 * k * cfg.dt, 3.0 * k * cfg.dt])
        blind = 150 <= k < 210
        est = filt.step(None if blind else truth + rng.normal(scale=sigma, size=2))
        if est is not None and (k % 15 == 0 or k in (209, 210, 215)):
            err = np.hypot(*(est.position - truth))
            print(f"{k:5d}  {'no ' if blind else 'yes'}   {err:9.3f}    {math.sqrt(est.P[0, 0]):9.3f}")


if __name__ == "__main__":
    main()
