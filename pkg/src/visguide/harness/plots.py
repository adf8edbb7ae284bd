"""PNG line charts of a run log."""

from __future__ import annotations

from pathlib import Path
from typing import List

import numpy as np

from .runlog import RunLog

BAND_COLORS = {"P": "tab:orange", "T": "tab:red"}

PLOT_FILES = [
    "r.png", "theta.png", "V_r.png", "V_theta.png",
    "accel.png",
    "speeds.png", "speed_delta.png", "headings.png", "heading_delta.png",
    "y1.png", "y2.png",
    "trajectory_world.png", "trajectory_camera.png",
]


def _occlusion_bands(ax, t: np.ndarray, occ: np.ndarray) -> int:
    """Thick segments along y=0 where the tracker was partially/totally occluded."""
    drawn = 0
    for state, color in BAND_COLORS.items():
        mask = occ == state
        if not mask.any():
            continue
        edges = np.flatnonzero(np.diff(np.r_[0, mask.astype(int), 0]))
        for a, b in zip(edges[::2], edges[1::2]):
            ax.plot([t[a], t[b - 1]], [0.0, 0.0], color=color, linewidth=6, alpha=0.6,
                    solid_capstyle="butt", label=f"occlusion {state}" if drawn == 0 else None)
            drawn += 1
    return drawn


def _series_plot(path, t, series, title, ylabel, occ=None):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(8, 3.6))
    for label, y, style in series:
        if np.all(np.isnan(y)):
            continue
        ax.plot(t, y, style, label=label, linewidth=1.0, markersize=1.5)
    if occ is not None:
        _occlusion_bands(ax, t, occ)
    ax.set_xlabel("t [s]")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def _wrap(a: np.ndarray) -> np.ndarray:
    return np.angle(np.exp(1j * a))


def emit_plots(runlog: RunLog, outdir) -> List[Path]:
    """Write the standard chart set; returns the file paths in a fixed order."""
    if len(runlog) == 0:
        raise ValueError("empty run log")
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    c = runlog.column
    t = c("t")
    occ = c("occlusion")
    paths = [out / name for name in PLOT_FILES]

    for path, key, unit in zip(paths[:4], ("r", "theta", "V_r", "V_theta"),
                               ("m", "rad", "m/s", "m/s")):
        series = [("true", c(key), "-")]
        if key in ("r", "theta"):
            series.append(("measured", c(key + "_meas"), "."))
        series.append(("estimated", c(key + "_est"), "--"))
        _series_plot(path, t, series, key, unit, occ)

    _series_plot(paths[4], t, [("a_lat", c("a_lat"), "-"), ("a_long", c("a_long"), "-")],
                 "acceleration commands", "m/s^2", occ)
    _series_plot(paths[5], t, [("aircraft", c("uas_speed"), "-"), ("vehicle", c("veh_speed"), "-")],
                 "speeds", "m/s", occ)
    _series_plot(paths[6], t, [("V_A - V_B", c("uas_speed") - c("veh_speed"), "-")],
                 "speed difference", "m/s", occ)
    _series_plot(paths[7], t, [("aircraft", np.degrees(c("uas_heading")), "-"),
                               ("vehicle", np.degrees(c("veh_heading")), "-")],
                 "headings", "deg", occ)
    _series_plot(paths[8], t, [("alpha - beta", np.degrees(_wrap(c("uas_heading") - c("veh_heading"))), "-")],
                 "heading difference", "deg", occ)
    _series_plot(paths[9], t, [("y1", c("y1"), "-"), ("y1 estimated", c("y1_hat"), "--")],
                 "cone function y1", "m^4/s^2", occ)
    _series_plot(paths[10], t, [("y2", c("y2"), "-"), ("y2 estimated", c("y2_hat"), "--")],
                 "speed matching y2", "m^2/s^2", occ)

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 6))
    ax.plot(c("uas_x"), c("uas_y"), "-", label="aircraft", linewidth=1.0)
    ax.plot(c("veh_x"), c("veh_y"), "-", label="vehicle", linewidth=1.0)
    ax.plot(c("est_x"), c("est_y"), "--", label="vehicle estimated", linewidth=1.0)
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title("world trajectories")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(paths[11], dpi=100)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.plot(c("truth_u"), c("truth_v"), "-", label="vehicle (true)", linewidth=1.0)
    ax.plot(c("meas_u"), c("meas_v"), ".", label="measured centroid", markersize=1.5)
    ax.invert_yaxis()
    ax.set_xlabel("u [px]")
    ax.set_ylabel("v [px]")
    ax.set_title("camera-frame trajectory")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(paths[12], dpi=100)
    plt.close(fig)
    return paths
