"""Singer-model Kalman filter for the ground vehicle.

The state is ``chi = [x, vx, ax, y, vy, ay]``: each axis is a position /
velocity / acceleration chain driven by an exponentially correlated
acceleration with bandwidth ``alpha`` and standard deviation ``sigma``.
Measurements are vehicle ground positions recovered from the image.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .simcore import CoincidentAgentsError, EntityState

H_POS = np.array([[1.0, 0, 0, 0, 0, 0], [0, 0, 0, 1.0, 0, 0]])

# below this value of alpha*dt the closed forms lose digits to cancellation
SERIES_SWITCH = 0.05

# Taylor coefficients (in x = alpha*dt) of the normalized noise integrals
_SERIES = {
    (0, 0): (1/20, -1/36, 5/504, -1/360, 17/25920, -41/302400, 167/6652800,
             -23/5443200, 37/56609280),
    (0, 1): (1/8, -1/12, 5/144, -1/90, 17/5760, -41/60480, 167/1209600,
             -23/907200, 37/8709120),
    (0, 2): (1/6, -1/6, 11/120, -13/360, 19/1680, -1/336, 247/362880,
             -251/1814400, 1013/39916800),
    (1, 1): (1/3, -1/4, 7/60, -1/24, 31/2520, -1/320, 127/181440,
             -17/120960, 73/2851200),
    (1, 2): (1/2, -1/2, 7/24, -1/8, 31/720, -1/80, 127/40320,
             -17/24192, 73/518400),
    (2, 2): (1.0, -1.0, 2/3, -1/3, 2/15, -2/45, 4/315, -1/315, 2/2835),
}
# power of dt multiplying each normalized entry
_DT_POWER = {(0, 0): 5, (0, 1): 4, (0, 2): 3, (1, 1): 3, (1, 2): 2, (2, 2): 1}


@dataclass(frozen=True)
class FilterConfig:
    alpha: float = 0.1             # 1/s, acceleration correlation bandwidth
    sigma: float = 2.0             # m/s^2, acceleration standard deviation
    dt: float = 1.0 / 30.0
    R0: np.ndarray = field(default_factory=lambda: np.eye(2) * 0.16305 ** 2)
    inflation_factor: float = 5.0  # per totally occluded frame
    cap_factor: float = 1e6        # inflation limit, multiple of R0
    initial_variances: tuple = (25.0, 25.0, 4.0)  # position, velocity, acceleration

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        R0 = np.asarray(self.R0, float)
        if R0.shape != (2, 2) or not np.allclose(R0, R0.T) or np.linalg.eigvalsh(R0).min() < 0:
            raise ValueError("R0 must be a symmetric positive semi-definite 2x2 matrix")
        object.__setattr__(self, "R0", R0)
        if self.inflation_factor < 1 or self.cap_factor < 1:
            raise ValueError("inflation factor and cap must be >= 1")

    @classmethod
    def for_camera(cls, gsd: float, **kw) -> "FilterConfig":
        """Config whose base measurement noise is one ground-sample distance per axis."""
        return cls(R0=np.eye(2) * gsd * gsd, **kw)


@dataclass(frozen=True)
class TargetEstimate:
    chi: np.ndarray
    P: np.ndarray

    @property
    def position(self) -> np.ndarray:
        return self.chi[[0, 3]]

    @property
    def velocity(self) -> np.ndarray:
        return self.chi[[1, 4]]

    @property
    def acceleration(self) -> np.ndarray:
        return self.chi[[2, 5]]


@dataclass(frozen=True)
class GuidanceEstimates:
    r: float
    theta: float
    V_r: float
    V_theta: float
    a_B: float
    delta_B: float


def axis_transition(alpha: float, dt: float) -> np.ndarray:
    x = alpha * dt
    em = -math.expm1(-x)            # 1 - e^{-x}
    if x < SERIES_SWITCH:
        # (e^{-x} + x - 1)/alpha^2 = dt^2 (1/2 - x/6 + x^2/24 - ...)
        c13 = dt * dt * sum((-x) ** k / math.factorial(k + 2) for k in range(9))
    else:
        c13 = (x - em) / (alpha * alpha)
    return np.array([[1.0, dt, c13], [0.0, 1.0, em / alpha], [0.0, 0.0, 1.0 - em]])


def _noise_entry(i: int, j: int, x: float) -> float:
    """Normalized integral entry g_ij(x); the physical entry is dt^p g_ij."""
    if x < SERIES_SWITCH:
        return sum(c * x ** k for k, c in enumerate(_SERIES[(i, j)]))
    e1 = math.exp(-x)
    e2 = math.exp(-2 * x)
    if (i, j) == (0, 0):
        return (1 - e2 + 2 * x + 2 * x ** 3 / 3 - 2 * x * x - 4 * x * e1) / (2 * x ** 5)
    if (i, j) == (0, 1):
        return (1 + e2 - 2 * e1 + 2 * x * e1 - 2 * x + x * x) / (2 * x ** 4)
    if (i, j) == (0, 2):
        return (1 - e2 - 2 * x * e1) / (2 * x ** 3)
    if (i, j) == (1, 1):
        return (4 * e1 - 3 - e2 + 2 * x) / (2 * x ** 3)
    if (i, j) == (1, 2):
        return (1 + e2 - 2 * e1) / (2 * x * x)
    return (1 - e2) / (2 * x)


def axis_noise_integral(alpha: float, dt: float) -> np.ndarray:
    """``int_0^dt Phi(s) e3 e3^T Phi(s)^T ds`` for one axis (no intensity factor)."""
    x = alpha * dt
    Q = np.empty((3, 3))
    for (i, j), p in _DT_POWER.items():
        Q[i, j] = Q[j, i] = dt ** p * _noise_entry(i, j, x)
    return Q


def _blockdiag(A: np.ndarray) -> np.ndarray:
    out = np.zeros((6, 6))
    out[:3, :3] = A
    out[3:, 3:] = A
    return out


def build_transition(cfg: FilterConfig) -> np.ndarray:
    return _blockdiag(axis_transition(cfg.alpha, cfg.dt))


def build_process_noise(cfg: FilterConfig) -> np.ndarray:
    return 2.0 * cfg.alpha * cfg.sigma ** 2 * _blockdiag(axis_noise_integral(cfg.alpha, cfg.dt))


def _symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def predict(est: TargetEstimate, cfg: FilterConfig, F: Optional[np.ndarray] = None,
            Q: Optional[np.ndarray] = None) -> TargetEstimate:
    F = build_transition(cfg) if F is None else F
    Q = build_process_noise(cfg) if Q is None else Q
    return TargetEstimate(F @ est.chi, _symmetrize(F @ est.P @ F.T + Q))


@dataclass(frozen=True)
class Innovation:
    nu: np.ndarray
    S: np.ndarray

    @property
    def nis(self) -> float:
        return float(self.nu @ np.linalg.solve(self.S, self.nu))


def update(est: TargetEstimate, z, R: np.ndarray, cfg: Optional[FilterConfig] = None):
    """Position measurement update (Joseph form).  Returns ``(estimate, innovation)``."""
    z = np.asarray(z, float)
    R = np.asarray(R, float)
    nu = z - H_POS @ est.chi
    S = _symmetrize(H_POS @ est.P @ H_POS.T + R)
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise ValueError("innovation covariance is not positive definite") from exc
    PHt = est.P @ H_POS.T
    K = np.linalg.solve(L.T, np.linalg.solve(L, PHt.T)).T
    IKH = np.eye(6) - K @ H_POS
    P = _symmetrize(IKH @ est.P @ IKH.T + K @ R @ K.T)
    return TargetEstimate(est.chi + K @ nu, P), Innovation(nu, S)


def occlusion_noise(cfg: FilterConfig, frames_occluded: int) -> np.ndarray:
    """Measurement covariance while coasting: ``R0 * factor^k``, capped."""
    k = max(int(frames_occluded), 0)
    scale = min(cfg.inflation_factor ** min(k, 1000), cfg.cap_factor)
    return cfg.R0 * scale


def occlusion_step(est: TargetEstimate, cfg: FilterConfig, frames_occluded: int,
                   F: Optional[np.ndarray] = None, Q: Optional[np.ndarray] = None) -> TargetEstimate:
    """Predict, then update with the predicted position as a pseudo-measurement.

    The mean is identical to a pure prediction; the covariance shrinks by an
    amount that vanishes as the inflated noise grows.
    """
    pred = predict(est, cfg, F, Q)
    out, _ = update(pred, H_POS @ pred.chi, occlusion_noise(cfg, frames_occluded), cfg)
    return out


def initial_estimate(z0, z1, cfg: FilterConfig) -> TargetEstimate:
    """Position from the latest of two measurements, velocity from their difference."""
    z0 = np.asarray(z0, float)
    z1 = np.asarray(z1, float)
    v = (z1 - z0) / cfg.dt
    chi = np.array([z1[0], v[0], 0.0, z1[1], v[1], 0.0])
    pv, vv, av = cfg.initial_variances
    return TargetEstimate(chi, np.diag([pv, vv, av, pv, vv, av]).astype(float))


def to_guidance_frame(est: TargetEstimate, uas: EntityState, accel_floor: float = 1e-3
                      ) -> GuidanceEstimates:
    """Relative polar quantities seen from the aircraft, plus vehicle acceleration."""
    dx = est.chi[0] - uas.x
    dy = est.chi[3] - uas.y
    r = math.hypot(dx, dy)
    if r == 0.0:
        raise CoincidentAgentsError("coincident agents")
    theta = math.atan2(dy, dx)
    vx = est.chi[1] - uas.speed * math.cos(uas.heading)
    vy = est.chi[4] - uas.speed * math.sin(uas.heading)
    c, s = math.cos(theta), math.sin(theta)
    a = math.hypot(est.chi[2], est.chi[5])
    if a < accel_floor:
        a_B, delta_B = 0.0, 0.0
    else:
        a_B, delta_B = a, math.atan2(est.chi[5], est.chi[2])
    return GuidanceEstimates(r=r, theta=theta, V_r=vx * c + vy * s, V_theta=-vx * s + vy * c,
                             a_B=a_B, delta_B=delta_B)


class TargetFilter:
    """Stateful wrapper: initializes from two fixes, then runs predict/update or coasts."""

    def __init__(self, cfg: FilterConfig):
        self.cfg = cfg
        self.F = build_transition(cfg)
        self.Q = build_process_noise(cfg)
        self.estimate: Optional[TargetEstimate] = None
        self.frames_occluded = 0
        self.last_innovation: Optional[Innovation] = None
        self._first: Optional[np.ndarray] = None

    @property
    def ready(self) -> bool:
        return self.estimate is not None

    def step(self, z=None) -> Optional[TargetEstimate]:
        """Advance one frame with a position fix ``z`` (metres) or None when occluded."""
        self.last_innovation = None
        if self.estimate is None:
            if z is not None:
                if self._first is None:
                    self._first = np.asarray(z, float)
                else:
                    self.estimate = initial_estimate(self._first, z, self.cfg)
            return self.estimate
        if z is None:
            self.frames_occluded += 1
            self.estimate = occlusion_step(self.estimate, self.cfg, self.frames_occluded,
                                           self.F, self.Q)
        else:
            self.frames_occluded = 0
            pred = predict(self.estimate, self.cfg, self.F, self.Q)
            self.estimate, self.last_innovation = update(pred, z, self.cfg.R0, self.cfg)
        return self.estimate
