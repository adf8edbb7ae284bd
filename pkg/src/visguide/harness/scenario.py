"""Scenario files (YAML) and their in-memory form."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import yaml

from ..guidance import GuidanceConfig
from ..render import CameraModel
from ..simcore import (EntityState, LaneChangeProgram, OcclusionBar, SquircleProgram,
                       VehicleCommand, WaypointProgram)
from ..tracker import FlowParams, TrackerConfig


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario description."""


@dataclass(frozen=True)
class TimedBar:
    """Occluding bar present during ``[t_start, t_end)``."""

    bar: OcclusionBar
    t_start: float = -math.inf
    t_end: float = math.inf

    def active(self, t: float) -> bool:
        return self.t_start <= t < self.t_end


@dataclass
class Scenario:
    name: str
    duration: float
    uas: EntityState
    vehicle: EntityState
    program: Dict[str, Any]
    altitude: float = 150.0
    dt: float = 1.0 / 30.0
    vehicle_size: Tuple[float, float] = (5.0, 2.0)
    camera: Dict[str, Any] = field(default_factory=dict)
    guidance: GuidanceConfig = field(default_factory=GuidanceConfig)
    filter: Dict[str, Any] = field(default_factory=dict)
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    bars: List[TimedBar] = field(default_factory=list)
    lane_ys: List[float] = field(default_factory=list)
    seed: int = 0

    @property
    def frames(self) -> int:
        return int(round(self.duration / self.dt))

    def camera_model(self) -> CameraModel:
        return CameraModel(altitude=self.altitude, **self.camera)

    def make_program(self, seed: Optional[int] = None) -> Callable[[float, EntityState], VehicleCommand]:
        return build_program(self.program, self.seed if seed is None else seed)


def build_program(spec: Dict[str, Any], seed: int):
    spec = dict(spec)
    kind = spec.pop("type", None)
    try:
        if kind == "lane_change":
            spec.setdefault("seed", seed)
            for key in ("first_window", "gap_window"):
                if key in spec:
                    spec[key] = tuple(spec[key])
            return LaneChangeProgram(**spec)
        if kind == "squircle":
            if "start" in spec:
                spec["start"] = tuple(spec["start"])
            return SquircleProgram(**spec)
        if kind == "waypoints":
            spec["waypoints"] = [tuple(p) for p in spec.get("waypoints", [])]
            return WaypointProgram(**spec)
        if kind == "cruise":
            if spec:
                raise TypeError(f"unexpected keys {sorted(spec)}")
            return lambda t, state=None: VehicleCommand(0.0, 0.0)
    except TypeError as exc:
        raise ScenarioError(f"program '{kind}': {exc}") from exc
    raise ScenarioError(f"unknown vehicle program type {kind!r}")


def _entity(d: Dict[str, Any], where: str, altitude: float = 0.0) -> EntityState:
    unknown = set(d) - {"x", "y", "speed", "heading_deg"}
    if unknown:
        raise ScenarioError(f"{where}: unknown keys {sorted(unknown)}")
    try:
        return EntityState(float(d["x"]), float(d["y"]), float(d["speed"]),
                           math.radians(float(d.get("heading_deg", 0.0))), altitude)
    except KeyError as exc:
        raise ScenarioError(f"{where}: missing key {exc.args[0]!r}") from None


def _dataclass_from(cls, d: Dict[str, Any], where: str, **extra):
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ScenarioError(f"{where}: unknown keys {sorted(unknown)}")
    try:
        return cls(**{**d, **extra})
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{where}: {exc}") from exc


_TOP_KEYS = {"name", "duration", "dt", "altitude", "uas", "vehicle", "camera", "guidance",
             "filter", "tracker", "bars", "lane_markings", "seed"}


def scenario_from_dict(raw: Dict[str, Any]) -> Scenario:
    if not isinstance(raw, dict):
        raise ScenarioError("scenario must be a mapping")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ScenarioError(f"unknown top-level keys {sorted(unknown)}")
    for key in ("name", "duration", "uas", "vehicle"):
        if key not in raw:
            raise ScenarioError(f"missing required key {key!r}")
    altitude = float(raw.get("altitude", 150.0))
    veh = dict(raw["vehicle"])
    program = veh.pop("program", {"type": "cruise"})
    size = tuple(float(v) for v in veh.pop("size", (5.0, 2.0)))
    if len(size) != 2 or min(size) <= 0:
        raise ScenarioError("vehicle.size must be two positive numbers")
    if program.get("type") == "squircle" and "start" not in veh:
        vehicle = build_program(program, 0).initial_state()
    else:
        vehicle = _entity(veh.pop("start", {}), "vehicle.start")
    if veh:
        raise ScenarioError(f"vehicle: unknown keys {sorted(veh)}")

    tr = dict(raw.get("tracker", {}))
    flow = _dataclass_from(FlowParams, tr.pop("flow", {}), "tracker.flow")
    tracker = _dataclass_from(TrackerConfig, tr, "tracker", flow=flow)

    bars = []
    for i, b in enumerate(raw.get("bars", []) or []):
        b = dict(b)
        t0 = float(b.pop("t_start", -math.inf))
        t1 = float(b.pop("t_end", math.inf))
        bars.append(TimedBar(_dataclass_from(OcclusionBar, b, f"bars[{i}]"), t0, t1))

    lanes = raw.get("lane_markings", {}) or {}
    lane_ys = [float(y) for y in lanes.get("ys", [])]

    duration = float(raw["duration"])
    dt = float(raw.get("dt", 1.0 / 30.0))
    if not (duration > 0 and dt > 0):
        raise ScenarioError("duration and dt must be positive")
    camera = dict(raw.get("camera", {}))
    unknown_cam = set(camera) - {"fov_deg", "sensor_width_mm", "pixel_size_um", "height_px"}
    if unknown_cam:
        raise ScenarioError(f"camera: unknown keys {sorted(unknown_cam)}")
    sc = Scenario(
        name=str(raw["name"]), duration=duration, dt=dt, altitude=altitude,
        uas=_entity(raw["uas"], "uas", altitude), vehicle=vehicle, program=program,
        vehicle_size=size, camera=camera,
        guidance=_dataclass_from(GuidanceConfig, raw.get("guidance", {}), "guidance"),
        filter=dict(raw.get("filter", {})), tracker=tracker, bars=bars, lane_ys=lane_ys,
        seed=int(raw.get("seed", 0)))
    sc.make_program()  # validate program keys early
    return sc


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ScenarioError(f"invalid YAML in {path}: {exc}") from exc
    return scenario_from_dict(raw)


def with_overrides(sc: Scenario, duration: Optional[float] = None,
                   dt: Optional[float] = None) -> Scenario:
    changes = {}
    if duration is not None:
        changes["duration"] = float(duration)
    if dt is not None:
        changes["dt"] = float(dt)
    return replace(sc, **changes) if changes else sc
