"""Rendered synthetic sequences with known ground truth, shared by several tests."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from visguide import render
from visguide.tracker import classify_transition, init_tracker, track_step

# Bars in metres relative to the vehicle centre (xmin, ymin, xmax, ymax).  The
# 5 m x 2 m vehicle yields three columns of keypoints at x = -2.36, ~0 and
# +2.36 m.  Every bar edge keeps the visible columns at least 8 px (one
# flow-window half width) away, so a point is either clearly hidden or
# clearly trackable.
HIDE_LEFT = (-20.0, -3.0, -1.6, 3.0)
HIDE_LEFT_MID = (-20.0, -3.0, 1.0, 3.0)
HIDE_RIGHT = (1.6, -3.0, 20.0, 3.0)
HIDE_RIGHT_MID = (-1.0, -3.0, 20.0, 3.0)
HIDE_MID = (-1.0, -3.0, 1.0, 3.0)
HIDE_ALL = (-20.0, -5.0, 20.0, 5.0)

# Every transition case and every partial-to-partial subcase, in one script.
OCCLUSION_SCRIPT: List[Optional[Tuple[float, float, float, float]]] = (
    [None] * 6
    + [HIDE_LEFT] * 3
    + [HIDE_LEFT_MID, HIDE_LEFT, HIDE_LEFT_MID, HIDE_RIGHT, HIDE_LEFT_MID, HIDE_RIGHT_MID]
    + [None] * 3
    + [HIDE_LEFT, HIDE_RIGHT]
    + [None] * 3
    + [HIDE_MID, HIDE_MID, HIDE_LEFT]
    + [None] * 3
    + [HIDE_ALL] * 3
    + [None] * 2
    + [HIDE_LEFT] * 2
    + [HIDE_ALL] * 2
    + [HIDE_LEFT] * 2
    + [None] * 3
)


@dataclass
class StepRecord:
    frame: int
    expected: str
    label: str
    state: str
    measurement: Optional[np.ndarray]
    good_ids: frozenset
    visible_ids: frozenset
    truth_centroid: np.ndarray
    naive_centroid: Optional[np.ndarray]


def _vehicle_at(k: int) -> Tuple[float, float]:
    return 0.2 * k, 0.03 * k


def run_occlusion_script(script: Sequence = OCCLUSION_SCRIPT,
                         altitude: float = 150.0) -> List[StepRecord]:
    """Track a slowly moving vehicle through scripted bars.

    The expected label of each step comes from the set of keypoints whose
    ground position lies outside the bar, fed to the set-relation rules.
    """
    cam = render.CameraModel(altitude=altitude)

    def scene(k):
        vx, vy = _vehicle_at(k)
        objs = [render.vehicle_object(vx, vy, 0.0, 5.0, 2.0)]
        b = script[k]
        if b is not None:
            objs.append(render.bar_object(b[0] + vx, b[1] + vy, b[2] + vx, b[3] + vy))
        return objs

    f0 = render.rasterize(scene(0), cam, 0.0, 0)
    uv = render.world_to_pixel(cam, np.array(_vehicle_at(0)))
    half = np.array([2.5, 1.0]) / cam.gsd
    st = init_tracker(f0, (uv[0] - half[0], uv[1] - half[1], uv[0] + half[0], uv[1] + half[1]))
    offsets = render.pixel_to_world(cam, st.features.positions) - np.array(_vehicle_at(0))
    c0 = st.features.centroid.copy()

    def visible(k):
        b = script[k]
        if b is None:
            return frozenset(range(st.n))
        inside = ((offsets[:, 0] >= b[0]) & (offsets[:, 0] <= b[2])
                  & (offsets[:, 1] >= b[1]) & (offsets[:, 1] <= b[3]))
        return frozenset(np.flatnonzero(~inside).tolist())

    out = []
    prev = f0
    for k in range(1, len(script)):
        f = render.rasterize(scene(k), cam, k / 30.0, k)
        hint = render.world_to_pixel(cam, np.array(_vehicle_at(k)))
        meas, st, info = track_step(prev, f, st, hint=hint)
        expected = classify_transition(visible(k - 1), visible(k), st.n).label
        truth = c0 + hint - uv
        out.append(StepRecord(k, expected, info.case.label, info.state.value, meas,
                              st.features.good_ids, visible(k), truth, info.naive_centroid))
        prev = f
    return out


@dataclass
class CrossingFrame:
    frame: int
    state: str
    adjusted_error: float
    naive_error: float
    point_errors: np.ndarray
    all_good: bool
    vehicle_clear: bool


@dataclass
class BarCrossing:
    frames: List[CrossingFrame] = field(default_factory=list)
    n: int = 0

    def first_clear_after_occlusion(self) -> int:
        """Index of the first frame with the vehicle fully uncovered after the bar passed."""
        seen_cover = False
        for i, fr in enumerate(self.frames):
            if not fr.vehicle_clear:
                seen_cover = True
            elif seen_cover:
                return i
        raise AssertionError("bar never crossed the vehicle")


def bar_crossing(altitude: float = 150.0, frames: int = 120,
                 bar_speed: float = 12.0, bar_width: float = 6.0) -> BarCrossing:
    """A tall dark bar sweeps across a vehicle in rigid translation.

    Truth for each keypoint is its initial position moved with the vehicle;
    "vehicle clear" is decided by rendering the frame with and without the
    bar and comparing the pixels around the vehicle.
    """
    cam = render.CameraModel(altitude=altitude)
    dt = 1.0 / 30.0
    heading = 0.17

    def vehicle(t):
        return 3.0 * t, 0.5 * t

    def objects(t):
        vx, vy = vehicle(t)
        bx = -20.0 + bar_speed * t
        return (render.vehicle_object(vx, vy, heading, 5.0, 2.0),
                render.bar_object(bx, -30.0, bx + bar_width, 30.0))

    veh0, _ = objects(0.0)
    f0 = render.rasterize([veh0], cam, 0.0, 0)
    uv0 = render.world_to_pixel(cam, np.array(vehicle(0.0)))
    st = init_tracker(f0, (uv0[0] - 17, uv0[1] - 8, uv0[0] + 17, uv0[1] + 8))
    pts0 = st.features.positions.copy()
    c0 = st.adjusted_centroid.copy()
    result = BarCrossing(n=st.n)
    prev = f0
    background = render.rasterize([], cam).image
    for k in range(1, frames):
        t = k * dt
        veh, bar = objects(t)
        f = render.rasterize([veh, bar], cam, t, k)
        clean = render.rasterize([veh], cam, t, k).image
        shift = render.world_to_pixel(cam, np.array(vehicle(t))) - uv0
        footprint = clean != background
        clear = bool(np.array_equal(f.image[footprint], clean[footprint]))
        _, st, info = track_step(prev, f, st)
        truth_c = c0 + shift
        naive = (np.hypot(*(info.naive_centroid - truth_c))
                 if info.naive_centroid is not None else np.nan)
        result.frames.append(CrossingFrame(
            frame=k, state=info.state.value,
            adjusted_error=float(np.hypot(*(st.adjusted_centroid - truth_c))),
            naive_error=float(naive),
            point_errors=np.hypot(*(st.features.positions - (pts0 + shift)).T),
            all_good=bool(st.features.good.all()), vehicle_clear=clear))
        prev = f
    return result


def translation_texture(shape: Tuple[int, int], rng: np.random.Generator,
                        slope: float = 1.5) -> np.ndarray:
    """8-bit random texture with amplitude spectrum falling as ``1/f**slope``."""
    H, W = shape
    fy = np.fft.fftfreq(H)[:, None]
    fx = np.fft.rfftfreq(W)[None, :]
    f = np.hypot(fx, fy)
    f[0, 0] = 1.0
    spec = (rng.normal(size=f.shape) + 1j * rng.normal(size=f.shape)) / f ** slope
    spec[0, 0] = 0.0
    img = np.fft.irfft2(spec, s=shape)
    img = (img - img.mean()) / img.std()
    return np.clip(np.rint(128 + 40 * img), 0, 255).astype(np.uint8)


def shifted_pair(rng: np.random.Generator, shift: Tuple[int, int], shape=(240, 320),
                 pad: int = 30, slope: float = 1.5, texture: Optional[Callable] = None):
    """Two crops of one texture; the second shows the content moved by ``shift`` px."""
    H, W = shape
    big = (texture or translation_texture)((H + 2 * pad, W + 2 * pad), rng, slope)
    a = big[pad:pad + H, pad:pad + W]
    dx, dy = shift
    b = big[pad - dy:pad - dy + H, pad - dx:pad - dx + W]
    return a, b
