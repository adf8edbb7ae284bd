"""Rendezvous-cone guidance by dynamic inversion.

Two outputs are regulated: the cone function

    y1 = r^2 V_theta^2 - R^2 (V_theta^2 + V_r^2)

which is negative when the relative velocity points into the cone of
directions that hit a disc of radius R around the vehicle, and the velocity
matching error ``y2 = V_r^2 + V_theta^2``.  The commands force
``e1 = y1d - y1`` and ``e2 = -y2`` to decay as ``exp(-k1 t)`` and
``exp(-k2 t)``.

:func:`compute_commands` evaluates the closed-form inverse;
:func:`solve_commands_linear` solves the underlying 2x2 system numerically and
exists as an independent check.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .simcore import UasCommand


class InversionSingularityError(ArithmeticError):
    pass


@dataclass(frozen=True)
class GuidanceConfig:
    k1: float = 2.0
    k2: float = 0.5
    y1d: float = -1.0
    R: float = 10.0
    a_lat_max: float = 10.0
    a_long_max: float = 10.0
    epsilon_v: float = 0.1
    r_floor: float = 1.0

    def __post_init__(self):
        if not (self.k1 > 0 and self.k2 > 0):
            raise ValueError("k1 and k2 must be positive")
        if not self.y1d < 0:
            raise ValueError("y1d must be negative")
        if not self.R > 0:
            raise ValueError("R must be positive")


@dataclass(frozen=True)
class Objectives:
    y1: float
    y2: float
    e1: float
    e2: float


class ConeMembership(enum.Enum):
    INSIDE = "inside"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"


def cone_y1(r: float, V_r: float, V_theta: float, R: float) -> float:
    return r * r * V_theta * V_theta - R * R * (V_theta * V_theta + V_r * V_r)


def compute_objectives(rel, R: float, y1d: float = 0.0) -> Objectives:
    """Cone function, speed-matching function and their errors.

    ``rel`` is anything with ``r``, ``V_r`` and ``V_theta`` attributes (true
    relative state or filter estimates).
    """
    y1 = cone_y1(rel.r, rel.V_r, rel.V_theta, R)
    y2 = rel.V_r * rel.V_r + rel.V_theta * rel.V_theta
    return Objectives(y1=y1, y2=y2, e1=y1d - y1, e2=-y2)


def cone_membership(rel, R: float, tol: float = 1e-9) -> ConeMembership:
    y1 = cone_y1(rel.r, rel.V_r, rel.V_theta, R)
    if rel.V_r < 0 and abs(y1) <= tol:
        return ConeMembership.BOUNDARY
    if rel.V_r < 0 and y1 < 0:
        return ConeMembership.INSIDE
    return ConeMembership.OUTSIDE


def _floor_signed(value: float, floor: float) -> float:
    if abs(value) >= floor:
        return value
    return floor if value >= 0 else -floor


def raw_commands(r, theta, V_r, V_theta, a_B, delta_B, alpha, cfg: GuidanceConfig,
                 regularize: bool = True):
    """Unsaturated closed-form commands.

    Returns ``(a_lat, a_long, regularized)``.  With ``regularize`` the factors
    of the denominator ``2 V_r V_theta r^2`` are floored in magnitude
    (``epsilon_v`` for the velocities, ``r_floor`` for the range, sign kept,
    zero treated as positive); the numerators always use the given values.
    """
    R2 = cfg.R * cfg.R
    y1 = cone_y1(r, V_r, V_theta, cfg.R)
    y2 = V_r * V_r + V_theta * V_theta
    c, s = math.cos(alpha - theta), math.sin(alpha - theta)
    g1 = cfg.k1 * (y1 - cfg.y1d)
    g2 = cfg.k2 * y2
    w = 2.0 * V_r * V_theta * r * r
    num_lat = (g1 * (V_r * c + V_theta * s)
               + g2 * (V_r * R2 * c - V_theta * (r * r - R2) * s)
               - w * math.sin(alpha - delta_B) * a_B)
    num_long = (g1 * (V_r * s - V_theta * c)
                + g2 * (V_r * R2 * s + V_theta * (r * r - R2) * c)
                + w * math.cos(alpha - delta_B) * a_B)
    regularized = False
    den = w
    if regularize:
        vr = _floor_signed(V_r, cfg.epsilon_v)
        vt = _floor_signed(V_theta, cfg.epsilon_v)
        rr = max(r, cfg.r_floor)
        if (vr, vt, rr) != (V_r, V_theta, r):
            regularized = True
            den = 2.0 * vr * vt * rr * rr
    return num_lat / den, num_long / den, regularized


def saturate(a_lat: float, a_long: float, cfg: GuidanceConfig):
    lat = min(max(a_lat, -cfg.a_lat_max), cfg.a_lat_max)
    lon = min(max(a_long, -cfg.a_long_max), cfg.a_long_max)
    return lat, lon, (lat != a_lat or lon != a_long)


def compute_commands(rel, a_B: float, delta_B: float, alpha: float,
                     cfg: GuidanceConfig) -> UasCommand:
    """Dynamic-inversion acceleration commands for the aircraft.

    ``alpha`` is the aircraft heading.  ``a_B``/``delta_B`` are the vehicle
    acceleration magnitude and world direction (estimates in vision mode).
    The result is saturated to the configured limits; samples that were
    neither regularized nor saturated carry the raw closed-form values.
    """
    lat, lon, reg = raw_commands(rel.r, rel.theta, rel.V_r, rel.V_theta,
                                 a_B, delta_B, alpha, cfg)
    if not (math.isfinite(lat) and math.isfinite(lon)):
        lat, lon, reg = 0.0, 0.0, True
    lat, lon, sat = saturate(lat, lon, cfg)
    return UasCommand(a_lat=lat, a_long=lon, saturated=sat, regularized=reg)


def coefficient_matrix(r, theta, V_r, V_theta, alpha, R):
    """Matrix A and vector b of ``A [a_lat, a_long]^T = rhs - b a_B``.

    Derived from the LOS kinematics: ``d(y1, y2)/dt = -2 (A u + b a_B)``.
    """
    R2 = R * R
    c, s = math.cos(alpha - theta), math.sin(alpha - theta)
    A = np.array([
        [V_theta * (r * r - R2) * c + R2 * V_r * s, V_theta * (r * r - R2) * s - R2 * V_r * c],
        [V_theta * c - V_r * s, V_theta * s + V_r * c],
    ])
    return A


def forcing_vector(r, theta, V_r, V_theta, delta_B, R):
    R2 = R * R
    cd, sd = math.cos(delta_B - theta), math.sin(delta_B - theta)
    return np.array([V_r * R2 * cd - V_theta * (r * r - R2) * sd,
                     -V_r * cd - V_theta * sd])


def solve_commands_linear(rel, a_B: float, delta_B: float, alpha: float,
                          cfg: GuidanceConfig, max_cond: float = 1e12) -> UasCommand:
    """Solve the 2x2 inversion system directly (verification path, unsaturated)."""
    r, theta, V_r, V_theta = rel.r, rel.theta, rel.V_r, rel.V_theta
    A = coefficient_matrix(r, theta, V_r, V_theta, alpha, cfg.R)
    b = forcing_vector(r, theta, V_r, V_theta, delta_B, cfg.R)
    obj = compute_objectives(rel, cfg.R, cfg.y1d)
    rhs = np.array([-cfg.k1 * (cfg.y1d - obj.y1) / 2.0, cfg.k2 * obj.y2 / 2.0]) - b * a_B
    if np.linalg.det(A) == 0.0 or np.linalg.cond(A) > max_cond:
        raise InversionSingularityError("inversion singularity")
    u = np.linalg.solve(A, rhs)
    return UasCommand(a_lat=float(u[0]), a_long=float(u[1]))


# ---------------------------------------------------------------------------
# Error-dynamics verification

@dataclass
class ErrorDynamicsReport:
    passed: bool
    e1_worst_ratio: float
    e2_worst_ratio: float
    samples: int
    segments: int = 0
    longest_segment_s: float = 0.0
    k1_fit: Optional[float] = None
    k2_fit: Optional[float] = None
    e1_excess: float = 0.0   # worst |e1| above the (1 + tol) envelope, absolute units
    e2_excess: float = 0.0


def exact_segments(exact: Sequence[bool], min_len: int = 3):
    """Half-open index ranges of contiguous runs where ``exact`` holds."""
    exact = np.asarray(exact, bool)
    runs, start = [], None
    for i, ok in enumerate(exact):
        if ok and start is None:
            start = i
        elif not ok and start is not None:
            if i - start >= min_len:
                runs.append((start, i))
            start = None
    if start is not None and len(exact) - start >= min_len:
        runs.append((start, len(exact)))
    return runs


def _envelope_ratio(t, e, k, floor):
    """Worst ``|e| / (|e0| exp(-k (t - t0)))`` once ``floor`` is subtracted from ``|e|``."""
    t = np.asarray(t, float)
    e = np.asarray(e, float)
    if len(e) == 0:
        return 0.0
    e0 = abs(e[0])
    if e0 == 0.0:
        return 0.0 if np.all(e == 0.0) else math.inf
    bound = e0 * np.exp(-k * (t - t[0]))
    # below the floor the signal is integration noise, not error dynamics
    excess = np.maximum(np.abs(e) - floor, 0.0)
    return float(np.max(excess / bound))


def _envelope_excess(t, e, k, tol):
    """Worst absolute amount by which ``|e|`` leaves ``(1 + tol) |e0| exp(-k (t - t0))``."""
    if len(e) == 0:
        return 0.0
    t = np.asarray(t, float)
    bound = (1.0 + tol) * abs(e[0]) * np.exp(-k * (t - t[0]))
    return float(max(np.max(np.abs(e) - bound), 0.0))


def _decay_rate(t, e, floor):
    t = np.asarray(t, float)
    a = np.abs(np.asarray(e, float))
    mask = a > floor
    if mask.sum() < 3:
        return None
    slope = np.polyfit(t[mask], np.log(a[mask]), 1)[0]
    return float(-slope)


def error_dynamics_check(t: Sequence[float], e1: Sequence[float], e2: Sequence[float],
                         cfg: GuidanceConfig, exact: Optional[Sequence[bool]] = None,
                         tol: float = 0.05, rel_floor: float = 1e-6,
                         min_len: int = 3) -> ErrorDynamicsReport:
    """Check that errors stay inside ``(1 + tol) |e(t0)| exp(-k (t - t0))``.

    ``exact`` marks samples whose command was neither saturated nor
    regularized (all samples if omitted).  Each contiguous exact run is
    checked from its own start time.  Deviations smaller than ``rel_floor``
    times the largest error of the whole record are ignored.  The commands
    are held over a frame, so each step leaves a residual that scales with
    the size of the objective itself.  A run that starts after the error has
    already decayed by several orders of magnitude would otherwise be
    judged on that residual.  Fitted decay rates come from the longest run.
    """
    t = np.asarray(t, float)
    e1 = np.asarray(e1, float)
    e2 = np.asarray(e2, float)
    if exact is None:
        exact = np.ones(len(t), bool)
    runs = exact_segments(exact, min_len)
    f1 = rel_floor * float(np.max(np.abs(e1))) if len(e1) else 0.0
    f2 = rel_floor * float(np.max(np.abs(e2))) if len(e2) else 0.0
    q1 = q2 = x1 = x2 = 0.0
    for a, b in runs:
        q1 = max(q1, _envelope_ratio(t[a:b], e1[a:b], cfg.k1, f1))
        q2 = max(q2, _envelope_ratio(t[a:b], e2[a:b], cfg.k2, f2))
        x1 = max(x1, _envelope_excess(t[a:b], e1[a:b], cfg.k1, tol))
        x2 = max(x2, _envelope_excess(t[a:b], e2[a:b], cfg.k2, tol))
    k1_fit = k2_fit = None
    longest = 0.0
    if runs:
        a, b = max(runs, key=lambda ab: t[ab[1] - 1] - t[ab[0]])
        longest = float(t[b - 1] - t[a])
        k1_fit = _decay_rate(t[a:b], e1[a:b], max(f1, rel_floor * abs(e1[a])))
        k2_fit = _decay_rate(t[a:b], e2[a:b], max(f2, rel_floor * abs(e2[a])))
    return ErrorDynamicsReport(
        passed=bool(runs) and q1 <= 1.0 + tol and q2 <= 1.0 + tol,
        e1_worst_ratio=q1, e2_worst_ratio=q2, samples=len(t),
        segments=len(runs), longest_segment_s=longest,
        k1_fit=k1_fit, k2_fit=k2_fit, e1_excess=x1, e2_excess=x2)
