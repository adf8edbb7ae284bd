"""Ground-truth world for the pursuit simulation.

Point kinematics for the aircraft (A) and the ground vehicle (B), the scripted
vehicle maneuver programs, occlusion bars, and the exact line-of-sight state
between the two agents.

Angles are radians, measured counter-clockwise from world +x (east).  A
positive lateral acceleration turns the aircraft to the left.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

log = logging.getLogger(__name__)

SPEED_FLOOR = 0.1  # m/s, keeps heading rates a/V finite


def wrap_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = math.remainder(angle, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


class CoincidentAgentsError(ValueError):
    """Raised when the line of sight is undefined (r == 0)."""


@dataclass(frozen=True)
class EntityState:
    """Planar state of one agent.  ``altitude`` is only meaningful for the aircraft."""

    x: float
    y: float
    speed: float
    heading: float
    altitude: float = 0.0

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def velocity(self) -> np.ndarray:
        return self.speed * np.array([math.cos(self.heading), math.sin(self.heading)])


@dataclass(frozen=True)
class VehicleCommand:
    a_B: float = 0.0
    delta_B: float = 0.0


@dataclass(frozen=True)
class UasCommand:
    a_lat: float = 0.0
    a_long: float = 0.0
    saturated: bool = False
    regularized: bool = False


@dataclass(frozen=True)
class RelativeState:
    """Line-of-sight range/bearing and the relative velocity split along/across it."""

    r: float
    theta: float
    V_r: float
    V_theta: float


# ---------------------------------------------------------------------------
# Integration

def _rk4(deriv: Callable[[np.ndarray], np.ndarray], s: np.ndarray, dt: float) -> np.ndarray:
    k1 = deriv(s)
    k2 = deriv(s + 0.5 * dt * k1)
    k3 = deriv(s + 0.5 * dt * k2)
    k4 = deriv(s + dt * k3)
    return s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _finish(state: EntityState, s: np.ndarray, speed_floor: float,
            events: Optional[List[str]], who: str) -> EntityState:
    speed = float(s[2])
    if speed < speed_floor:
        log.debug("%s speed clamped at floor %.3g (was %.3g)", who, speed_floor, speed)
        if events is not None:
            events.append(f"{who}_speed_floor")
        speed = speed_floor
    return replace(state, x=float(s[0]), y=float(s[1]), speed=speed,
                   heading=wrap_angle(float(s[3])))


def step_uas(state: EntityState, cmd: UasCommand, dt: float,
             speed_floor: float = SPEED_FLOOR,
             events: Optional[List[str]] = None) -> EntityState:
    """Advance the aircraft by one RK4 step with the command held constant.

    If the speed would drop below ``speed_floor`` it is clamped there and
    ``"uas_speed_floor"`` is appended to ``events``.
    """
    a_lat, a_long = cmd.a_lat, cmd.a_long

    def deriv(s):
        v = max(s[2], speed_floor)
        return np.array([s[2] * math.cos(s[3]), s[2] * math.sin(s[3]), a_long, a_lat / v])

    s0 = np.array([state.x, state.y, state.speed, state.heading])
    return _finish(state, _rk4(deriv, s0, dt), speed_floor, events, "uas")


def step_vehicle(state: EntityState, cmd: VehicleCommand, dt: float,
                 speed_floor: float = SPEED_FLOOR,
                 events: Optional[List[str]] = None) -> EntityState:
    """Advance the vehicle by one RK4 step.

    The vehicle acceleration has magnitude ``a_B`` along the world direction
    ``delta_B``; it splits into a speed change ``a_B cos(delta_B - beta)``
    and a turn rate ``a_B sin(delta_B - beta) / V_B``.
    """
    a, d = cmd.a_B, cmd.delta_B

    def deriv(s):
        v = max(s[2], speed_floor)
        return np.array([s[2] * math.cos(s[3]), s[2] * math.sin(s[3]),
                         a * math.cos(d - s[3]), a * math.sin(d - s[3]) / v])

    s0 = np.array([state.x, state.y, state.speed, state.heading])
    return _finish(state, _rk4(deriv, s0, dt), speed_floor, events, "vehicle")


def relative_state(uas: EntityState, vehicle: EntityState) -> RelativeState:
    """Exact LOS state from aircraft to vehicle."""
    dx = vehicle.x - uas.x
    dy = vehicle.y - uas.y
    r = math.hypot(dx, dy)
    if r == 0.0:
        raise CoincidentAgentsError("coincident agents")
    theta = math.atan2(dy, dx)
    V_r = vehicle.speed * math.cos(vehicle.heading - theta) - uas.speed * math.cos(uas.heading - theta)
    V_theta = vehicle.speed * math.sin(vehicle.heading - theta) - uas.speed * math.sin(uas.heading - theta)
    return RelativeState(r=r, theta=theta, V_r=V_r, V_theta=V_theta)


# ---------------------------------------------------------------------------
# Vehicle programs

@dataclass
class LaneChangeProgram:
    """Eastbound cruise with lateral lane changes at seeded random instants.

    Each maneuver applies a world-frame lateral acceleration whose integral
    is a smooth step of ``displacement`` meters over ``maneuver_time``
    seconds (zero lateral velocity and acceleration at both ends).  Successive
    maneuvers alternate direction so the vehicle shuttles between two lanes.
    Between maneuvers ``a_B`` is exactly zero.
    """

    seed: int = 0
    displacement: float = 4.0
    maneuver_time: float = 4.0
    first_window: Tuple[float, float] = (8.0, 16.0)
    gap_window: Tuple[float, float] = (10.0, 22.0)
    horizon: float = 600.0
    first_direction: int = 1
    starts: List[float] = field(default_factory=list)

    def __post_init__(self):
        if not self.starts:
            rng = np.random.default_rng(self.seed)
            t = float(rng.uniform(*self.first_window))
            while t < self.horizon:
                self.starts.append(t)
                t += self.maneuver_time + float(rng.uniform(*self.gap_window))

    def lateral_accel(self, t: float) -> float:
        """World-frame y acceleration at time ``t``."""
        T = self.maneuver_time
        for i, t0 in enumerate(self.starts):
            if t0 <= t < t0 + T:
                sign = self.first_direction * (1 if i % 2 == 0 else -1)
                u = (t - t0) / T
                return sign * self.displacement * 2.0 * math.pi / T**2 * math.sin(2.0 * math.pi * u)
            if t0 > t:
                break
        return 0.0

    def __call__(self, t: float, state: Optional[EntityState] = None) -> VehicleCommand:
        ay = self.lateral_accel(t)
        if ay == 0.0:
            return VehicleCommand(0.0, 0.0)
        return VehicleCommand(abs(ay), math.copysign(math.pi / 2.0, ay))


def lane_change_program(t: float, seed: int = 0) -> VehicleCommand:
    """Functional form of :class:`LaneChangeProgram` with default settings."""
    return LaneChangeProgram(seed=seed)(t)


def superellipse_point(psi: float, half_side: float, exponent: float = 4.0) -> np.ndarray:
    """Point of ``|x/s|^p + |y/s|^p = 1`` (origin-centred) at polar angle ``psi``."""
    c, s = math.cos(psi), math.sin(psi)
    rho = half_side / (abs(c) ** exponent + abs(s) ** exponent) ** (1.0 / exponent)
    return rho * np.array([c, s])


@dataclass
class SquircleProgram:
    """Pursuit of a reference point sweeping a squircle at constant parameter rate.

    The parameter ``phi`` advances at ``2*pi/period`` rad/s and is mapped to
    the polar angle ``psi = phi + warp*sin(4*phi)/4`` of the superellipse
    point.  With ``warp > 0`` the reference moves faster along the flat sides
    than around the corners.  The vehicle follows with velocity feed-forward
    plus position feedback, ``a = k_vel * (v_ref + k_pos*(ref - p) - v)``,
    limited to ``a_max``.

    ``start`` is the bottom-centre point of the curve, where ``phi = -pi/2``;
    the curve is traversed counter-clockwise (eastward along the bottom).
    """

    half_side: float = 1005.0
    period: float = 360.0
    exponent: float = 4.0
    warp: float = 0.29
    start: Tuple[float, float] = (0.0, -20.0)
    k_pos: float = 0.5
    k_vel: float = 2.0
    a_max: float = 5.0

    @property
    def center(self) -> np.ndarray:
        return np.array([self.start[0], self.start[1] + self.half_side])

    def _phi(self, t: float) -> float:
        return -math.pi / 2.0 + 2.0 * math.pi * t / self.period

    def reference(self, t: float) -> np.ndarray:
        phi = self._phi(t)
        psi = phi + self.warp * math.sin(4.0 * phi) / 4.0
        return self.center + superellipse_point(psi, self.half_side, self.exponent)

    def reference_velocity(self, t: float, h: float = 1e-3) -> np.ndarray:
        return (self.reference(t + h) - self.reference(t - h)) / (2.0 * h)

    def initial_state(self) -> EntityState:
        """Vehicle state sitting on the reference at t=0 with the reference velocity."""
        p = self.reference(0.0)
        v = self.reference_velocity(0.0)
        return EntityState(float(p[0]), float(p[1]), float(np.hypot(*v)),
                           math.atan2(v[1], v[0]))

    def __call__(self, t: float, state: EntityState) -> VehicleCommand:
        err = self.reference(t) - state.position
        acc = self.k_vel * (self.reference_velocity(t) + self.k_pos * err - state.velocity)
        mag = float(np.hypot(*acc))
        if mag > self.a_max:
            acc *= self.a_max / mag
            mag = self.a_max
        if mag == 0.0:
            return VehicleCommand(0.0, 0.0)
        return VehicleCommand(mag, math.atan2(acc[1], acc[0]))


def squircle_program(t: float, state: EntityState, **kwargs) -> VehicleCommand:
    """Functional form of :class:`SquircleProgram`."""
    return SquircleProgram(**kwargs)(t, state)


@dataclass
class WaypointProgram:
    """Constant-speed pursuit of a list of world waypoints (scripted scenes)."""

    waypoints: Sequence[Tuple[float, float]] = ()
    speed: float = 10.0
    k_vel: float = 1.0
    a_max: float = 5.0
    capture_radius: float = 2.0
    _index: int = 0

    def __call__(self, t: float, state: EntityState) -> VehicleCommand:
        while self._index < len(self.waypoints) - 1 and math.dist(
                state.position, self.waypoints[self._index]) < self.capture_radius:
            self._index += 1
        if not self.waypoints:
            return VehicleCommand(0.0, 0.0)
        d = np.asarray(self.waypoints[self._index], dtype=float) - state.position
        n = float(np.hypot(*d))
        v_des = self.speed * d / n if n > 1e-9 else np.zeros(2)
        acc = self.k_vel * (v_des - state.velocity)
        mag = float(np.hypot(*acc))
        if mag > self.a_max:
            acc *= self.a_max / mag
            mag = self.a_max
        if mag == 0.0:
            return VehicleCommand(0.0, 0.0)
        return VehicleCommand(mag, math.atan2(acc[1], acc[0]))


# ---------------------------------------------------------------------------
# Scene objects

@dataclass(frozen=True)
class OcclusionBar:
    """Axis-aligned dark rectangle drawn above the vehicle.

    ``x, y`` is the centre at t=0; ``vx, vy`` an optional constant drift.
    """

    x: float
    y: float
    width: float
    height: float
    vx: float = 0.0
    vy: float = 0.0

    def center(self, t: float) -> Tuple[float, float]:
        return self.x + self.vx * t, self.y + self.vy * t

    def bounds(self, t: float) -> Tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) in world meters at time ``t``."""
        cx, cy = self.center(t)
        return (cx - self.width / 2, cy - self.height / 2,
                cx + self.width / 2, cy + self.height / 2)

    def covers(self, x: float, y: float, t: float) -> bool:
        x0, y0, x1, y1 = self.bounds(t)
        return x0 <= x <= x1 and y0 <= y <= y1
