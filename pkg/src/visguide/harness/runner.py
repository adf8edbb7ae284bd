"""Closed-loop orchestration: render, track, estimate, guide, step."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from .. import render
from ..estimator import FilterConfig, TargetFilter, predict, to_guidance_frame
from ..guidance import compute_commands, compute_objectives
from ..simcore import (CoincidentAgentsError, EntityState, UasCommand, relative_state,
                       step_uas, step_vehicle)
from ..tracker import build_pyramid, init_tracker, track_step
from .runlog import ESTIMATOR_COLUMNS, GUIDANCE_COLUMNS, TRACKER_COLUMNS, RunLog
from .scenario import Scenario, load_scenario, with_overrides

log = logging.getLogger(__name__)

MODES = ("vision", "truth")

# Signature of a frame source: (frame index, time, camera, scene objects) -> Frame
FrameSource = Callable[[int, float, render.CameraModel, list], render.Frame]


@dataclass
class RunConfig:
    scenario: Union[str, Path, Scenario]
    mode: str = "vision"
    seed: Optional[int] = None
    out_dir: Optional[Union[str, Path]] = None
    dump_frames: bool = False
    log_every: int = 1
    duration: Optional[float] = None
    dt: Optional[float] = None
    frame_source: Optional[FrameSource] = field(default=None, repr=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.log_every < 1:
            raise ValueError("log_every must be >= 1")


def _scene(sc: Scenario, cam: render.CameraModel, vehicle: EntityState, t: float) -> list:
    objs = [render.vehicle_object(vehicle.x, vehicle.y, vehicle.heading, *sc.vehicle_size)]
    for tb in sc.bars:
        if tb.active(t):
            objs.append(render.bar_object(*tb.bar.bounds(t)))
    if sc.lane_ys:
        objs.extend(render.lane_marking_objects(cam, sc.lane_ys))
    return objs


def _vehicle_box(sc: Scenario, cam: render.CameraModel, vehicle: EntityState):
    """Pixel bounding box of the vehicle rectangle (the initial detection)."""
    L, W = sc.vehicle_size
    c, s = math.cos(vehicle.heading), math.sin(vehicle.heading)
    corners = np.array([[vehicle.x + c * a - s * b, vehicle.y + s * a + c * b]
                        for a in (-L / 2, L / 2) for b in (-W / 2, W / 2)])
    uv = render.world_to_pixel(cam, corners)
    return (uv[:, 0].min(), uv[:, 1].min(), uv[:, 0].max(), uv[:, 1].max())


def _in_frame(cam: render.CameraModel, uv) -> bool:
    return 0.0 <= uv[0] < cam.width_px and 0.0 <= uv[1] < cam.height_px


def run(cfg: RunConfig) -> RunLog:
    """Execute one scenario and return its per-frame log (also written to ``out_dir``)."""
    sc = cfg.scenario if isinstance(cfg.scenario, Scenario) else load_scenario(cfg.scenario)
    sc = with_overrides(sc, cfg.duration, cfg.dt)
    seed = sc.seed if cfg.seed is None else int(cfg.seed)
    program = sc.make_program(seed)
    gcfg = sc.guidance
    cam0 = sc.camera_model()
    vision = cfg.mode == "vision"
    fcfg = FilterConfig.for_camera(cam0.gsd, dt=sc.dt, **sc.filter)
    tcfg = sc.tracker
    levels = tcfg.flow.levels
    out_dir = Path(cfg.out_dir) if cfg.out_dir is not None else None
    frame_dir = out_dir / "frames" if (out_dir is not None and cfg.dump_frames) else None

    A, B = sc.uas, sc.vehicle
    filt = TargetFilter(fcfg)
    tracker = None
    prev_frame = prev_pyr = None
    runlog = RunLog(meta={"scenario": sc.name, "mode": cfg.mode, "seed": seed, "dt": sc.dt})
    n_frames = sc.frames
    log.info("running %s (%s mode, seed %d, %d frames)", sc.name, cfg.mode, seed, n_frames)

    for k in range(n_frames):
        t = k * sc.dt
        events = []
        vc = program(t, B)
        rel = relative_state(A, B)
        cam = cam0.centred_on(A.x, A.y)
        truth_uv = render.world_to_pixel(cam, B.position)
        row = {
            "frame": k, "t": t,
            "uas_x": A.x, "uas_y": A.y, "uas_speed": A.speed, "uas_heading": A.heading,
            "veh_x": B.x, "veh_y": B.y, "veh_speed": B.speed, "veh_heading": B.heading,
            "veh_a": vc.a_B, "veh_delta": vc.delta_B,
            "r": rel.r, "theta": rel.theta, "V_r": rel.V_r, "V_theta": rel.V_theta,
            "truth_u": truth_uv[0], "truth_v": truth_uv[1], "in_fov": _in_frame(cam, truth_uv),
        }
        obj = compute_objectives(rel, gcfg.R, gcfg.y1d)
        row.update(y1=obj.y1, y2=obj.y2, e1=obj.e1, e2=obj.e2)

        if vision:
            scene = _scene(sc, cam, B, t)
            if cfg.frame_source is not None:
                frame = cfg.frame_source(k, t, cam, scene)
            else:
                frame = render.rasterize(scene, cam, t, k)
            if frame_dir is not None:
                render.dump_frame(frame, frame_dir)
            pyr = build_pyramid(frame.image, levels)
            meas_px = None
            if tracker is None:
                tracker = init_tracker(frame, _vehicle_box(sc, cam, B), tcfg, frame_index=k)
                meas_px = tracker.adjusted_centroid.copy()
                row.update(occlusion="N", case="", good_count=int(tracker.features.good.sum()),
                           naive_u=meas_px[0], naive_v=meas_px[1])
            else:
                hint = None
                if filt.ready:
                    p = predict(filt.estimate, fcfg, filt.F, filt.Q).position
                    hint = render.world_to_pixel(cam, p)
                meas_px, tracker, info = track_step(prev_frame, frame, tracker, tcfg, hint,
                                                    prev_pyr, pyr)
                row.update(occlusion=info.state.value, case=info.case.label,
                           good_count=info.good_count)
                if info.naive_centroid is not None:
                    row.update(naive_u=info.naive_centroid[0], naive_v=info.naive_centroid[1])
            prev_frame, prev_pyr = frame, pyr
            z = None
            if meas_px is not None:
                z = render.pixel_to_world(cam, meas_px)
                row.update(has_measurement=True, meas_u=meas_px[0], meas_v=meas_px[1],
                           meas_x=z[0], meas_y=z[1],
                           r_meas=math.hypot(z[0] - A.x, z[1] - A.y),
                           theta_meas=math.atan2(z[1] - A.y, z[0] - A.x))
            else:
                row["has_measurement"] = False
            est = filt.step(z)
            cmd = UasCommand()
            if est is not None:
                chi = est.chi
                row.update(est_x=chi[0], est_y=chi[3], est_vx=chi[1], est_vy=chi[4],
                           est_ax=chi[2], est_ay=chi[5])
                try:
                    g = to_guidance_frame(est, A)
                except CoincidentAgentsError:
                    events.append("coincident_estimate")
                else:
                    ghat = compute_objectives(g, gcfg.R, gcfg.y1d)
                    row.update(r_est=g.r, theta_est=g.theta, V_r_est=g.V_r, V_theta_est=g.V_theta,
                               a_B_est=g.a_B, delta_B_est=g.delta_B, y1_hat=ghat.y1, y2_hat=ghat.y2)
                    cmd = compute_commands(g, g.a_B, g.delta_B, A.heading, gcfg)
            else:
                events.append("no_estimate")
        else:
            cmd = compute_commands(rel, vc.a_B, vc.delta_B, A.heading, gcfg)

        row.update(a_lat=cmd.a_lat, a_long=cmd.a_long, saturated=cmd.saturated,
                   regularized=cmd.regularized)
        A_next = step_uas(A, cmd, sc.dt, events=events)
        B_next = step_vehicle(B, vc, sc.dt, events=events)
        row["events"] = ";".join(events) if events else None
        if k % cfg.log_every == 0:
            runlog.append(row)
        A, B = A_next, B_next

    if out_dir is not None:
        write_outputs(runlog, out_dir)
    return runlog


def write_outputs(runlog: RunLog, out_dir) -> None:
    out_dir = Path(out_dir)
    runlog.to_csv(out_dir / "run.csv")
    runlog.to_csv(out_dir / "tracker.csv", TRACKER_COLUMNS)
    runlog.to_csv(out_dir / "estimator.csv", ESTIMATOR_COLUMNS)
    runlog.to_csv(out_dir / "guidance.csv", GUIDANCE_COLUMNS)
