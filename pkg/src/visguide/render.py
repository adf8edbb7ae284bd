"""Orthographic down-looking camera and a non-anti-aliased rasterizer.

Axis convention (used everywhere else in the package): world +x maps to
image +column and world +y maps to image -row.  Continuous pixel coordinates
``(u, v)`` put pixel ``(i, j)`` on the unit square ``[i, i+1) x [j, j+1)``, so
pixel centres sit at half-integers and the principal point (the ground point
below the aircraft) is at ``(width/2, height/2)``.
"""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

LUMA_WEIGHTS = (0.299, 0.587, 0.114)

# default palette (RGB); grey levels after luma conversion in comments
GROUND_RGB = (70, 105, 70)        # ~92
LANE_RGB = (150, 150, 150)        # 150
VEHICLE_LIGHT_RGB = (250, 245, 235)  # ~246
VEHICLE_DARK_RGB = (30, 20, 60)   # ~28
BAR_RGB = (15, 15, 15)            # 15


def to_gray(rgb: Sequence[float]) -> float:
    r, g, b = rgb
    return LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b


def rgb_to_gray(image: np.ndarray) -> np.ndarray:
    """Luma conversion of an ``(H, W, 3)`` array, rounded to uint8."""
    gray = image[..., 0] * LUMA_WEIGHTS[0] + image[..., 1] * LUMA_WEIGHTS[1] + image[..., 2] * LUMA_WEIGHTS[2]
    return np.clip(np.rint(gray), 0, 255).astype(np.uint8)


@dataclass(frozen=True)
class CameraModel:
    fov_deg: float = 47.0
    sensor_width_mm: float = 5.0
    pixel_size_um: float = 6.25
    height_px: int = 600
    altitude: float = 150.0
    x: float = 0.0   # ground point under the aircraft
    y: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.fov_deg < 180.0:
            raise ValueError(f"field of view must be in (0, 180) degrees, got {self.fov_deg}")
        if self.altitude <= 0:
            raise ValueError("altitude must be positive")

    @property
    def pixel_mm(self) -> float:
        return self.pixel_size_um * 1e-3

    @property
    def width_px(self) -> int:
        return int(round(self.sensor_width_mm / self.pixel_mm))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.height_px, self.width_px

    @property
    def focal_length_mm(self) -> float:
        return focal_length(self)

    @property
    def gsd(self) -> float:
        """Ground sample distance, meters per pixel."""
        return self.altitude * self.pixel_mm / self.focal_length_mm

    def centred_on(self, x: float, y: float, altitude: Optional[float] = None) -> "CameraModel":
        return CameraModel(self.fov_deg, self.sensor_width_mm, self.pixel_size_um,
                           self.height_px, self.altitude if altitude is None else altitude, x, y)


def focal_length(cam: CameraModel) -> float:
    """Focal length in mm from sensor width and horizontal field of view."""
    if not 0.0 < cam.fov_deg < 180.0:
        raise ValueError("field of view out of range")
    return (cam.sensor_width_mm / 2.0) / math.tan(math.radians(cam.fov_deg) / 2.0)


@dataclass(frozen=True)
class ImagePoint:
    sensor_mm: Tuple[float, float]   # sensor-plane offset from principal point, y up
    pixel: Tuple[float, float]       # continuous (u, v)
    index: Tuple[int, int]           # integer (col, row) = floor of pixel


def project(cam: CameraModel, world_point) -> ImagePoint:
    wx, wy = float(world_point[0]), float(world_point[1])
    k = cam.focal_length_mm / cam.altitude
    sx, sy = k * (wx - cam.x), k * (wy - cam.y)
    u = cam.width_px / 2.0 + sx / cam.pixel_mm
    v = cam.height_px / 2.0 - sy / cam.pixel_mm
    return ImagePoint((sx, sy), (u, v), (math.floor(u), math.floor(v)))


def sensor_to_world(cam: CameraModel, sensor_mm) -> np.ndarray:
    s = cam.altitude / cam.focal_length_mm
    return np.array([cam.x + s * sensor_mm[0], cam.y + s * sensor_mm[1]])


def pixel_to_sensor(cam: CameraModel, pixel) -> Tuple[float, float]:
    return ((pixel[0] - cam.width_px / 2.0) * cam.pixel_mm,
            (cam.height_px / 2.0 - pixel[1]) * cam.pixel_mm)


def unproject(cam: CameraModel, image_point) -> np.ndarray:
    """World position of an image point.

    Accepts an :class:`ImagePoint` or continuous pixel coordinates ``(u, v)``.
    """
    if isinstance(image_point, ImagePoint):
        return sensor_to_world(cam, image_point.sensor_mm)
    return sensor_to_world(cam, pixel_to_sensor(cam, image_point))


def world_to_pixel(cam: CameraModel, xy: np.ndarray) -> np.ndarray:
    """Vectorised projection of ``(..., 2)`` world points to continuous pixels."""
    xy = np.asarray(xy, dtype=float)
    scale = 1.0 / cam.gsd
    u = cam.width_px / 2.0 + (xy[..., 0] - cam.x) * scale
    v = cam.height_px / 2.0 - (xy[..., 1] - cam.y) * scale
    return np.stack([u, v], axis=-1)


def pixel_to_world(cam: CameraModel, uv: np.ndarray) -> np.ndarray:
    uv = np.asarray(uv, dtype=float)
    g = cam.gsd
    x = cam.x + (uv[..., 0] - cam.width_px / 2.0) * g
    y = cam.y - (uv[..., 1] - cam.height_px / 2.0) * g
    return np.stack([x, y], axis=-1)


# ---------------------------------------------------------------------------
# Scene

@dataclass(frozen=True)
class SceneObject:
    """Oriented rectangle on the ground plane.

    ``pattern`` is ``"solid"`` or ``"quadrant"``; the latter splits the
    rectangle along both body axes into a 2x2 checker of ``color`` and
    ``color2``.  Objects are painted in ascending ``layer`` order.
    """

    x: float
    y: float
    length: float
    width: float
    heading: float = 0.0
    color: Tuple[int, int, int] = VEHICLE_LIGHT_RGB
    color2: Optional[Tuple[int, int, int]] = None
    pattern: str = "solid"
    layer: int = 0

    def __post_init__(self):
        if self.length <= 0 or self.width <= 0:
            raise ValueError("scene object size must be positive")


@dataclass(frozen=True)
class Frame:
    image: np.ndarray
    timestamp: float = 0.0
    index: int = 0

    def __post_init__(self):
        self.image.setflags(write=False)

    @property
    def height(self) -> int:
        return self.image.shape[0]

    @property
    def width(self) -> int:
        return self.image.shape[1]


def vehicle_object(x, y, heading, length=5.0, width=2.0, light=VEHICLE_LIGHT_RGB,
                   dark=VEHICLE_DARK_RGB) -> SceneObject:
    return SceneObject(x, y, length, width, heading, light, dark, "quadrant", layer=2)


def bar_object(xmin, ymin, xmax, ymax, color=BAR_RGB) -> SceneObject:
    return SceneObject((xmin + xmax) / 2, (ymin + ymax) / 2, xmax - xmin, ymax - ymin,
                       0.0, color, None, "solid", layer=3)


def lane_marking_objects(cam: CameraModel, lane_ys: Iterable[float], dash: float = 3.0,
                         gap: float = 6.0, thickness: float = 0.15,
                         color=LANE_RGB) -> List[SceneObject]:
    """Dashed east-west markings covering the current camera footprint."""
    half_w = cam.width_px * cam.gsd / 2.0 + dash + gap
    period = dash + gap
    x0 = math.floor((cam.x - half_w) / period) * period
    objs = []
    for ly in lane_ys:
        if abs(ly - cam.y) > cam.height_px * cam.gsd / 2.0 + 1.0:
            continue
        x = x0
        while x < cam.x + half_w:
            objs.append(SceneObject(x + dash / 2, ly, dash, thickness, 0.0, color, None, "solid", layer=1))
            x += period
    return objs


def _gray8(rgb) -> int:
    return int(np.clip(np.rint(to_gray(rgb)), 0, 255))


def _paint_axis_aligned(gray: np.ndarray, cam: CameraModel, obj: SceneObject) -> None:
    # pixel (i, j) is inside iff its centre lies in the closed rectangle
    H, W = gray.shape
    (u0, v0), (u1, v1) = world_to_pixel(cam, np.array([[obj.x - obj.length / 2, obj.y + obj.width / 2],
                                                       [obj.x + obj.length / 2, obj.y - obj.width / 2]]))
    i0, i1 = max(math.ceil(u0 - 0.5), 0), min(math.floor(u1 - 0.5) + 1, W)
    j0, j1 = max(math.ceil(v0 - 0.5), 0), min(math.floor(v1 - 0.5) + 1, H)
    if i0 < i1 and j0 < j1:
        gray[j0:j1, i0:i1] = _gray8(obj.color)


def _paint(gray: np.ndarray, cam: CameraModel, obj: SceneObject) -> None:
    if obj.heading == 0.0 and obj.pattern == "solid":
        _paint_axis_aligned(gray, cam, obj)
        return
    H, W = gray.shape
    c, s = math.cos(obj.heading), math.sin(obj.heading)
    hl, hw = obj.length / 2.0, obj.width / 2.0
    ext_x = abs(c) * hl + abs(s) * hw
    ext_y = abs(s) * hl + abs(c) * hw
    (u0, v0), (u1, v1) = world_to_pixel(cam, np.array([[obj.x - ext_x, obj.y + ext_y],
                                                       [obj.x + ext_x, obj.y - ext_y]]))
    i0, i1 = max(int(math.floor(u0)) - 1, 0), min(int(math.ceil(u1)) + 1, W)
    j0, j1 = max(int(math.floor(v0)) - 1, 0), min(int(math.ceil(v1)) + 1, H)
    if i0 >= i1 or j0 >= j1:
        return
    g = cam.gsd
    # world coordinates of pixel centres in the bounding box, relative to the object
    wx = cam.x + (np.arange(i0, i1) + 0.5 - W / 2.0) * g - obj.x
    wy = cam.y - (np.arange(j0, j1) + 0.5 - H / 2.0) * g - obj.y
    bx = c * wx[None, :] + s * wy[:, None]
    by = -s * wx[None, :] + c * wy[:, None]
    inside = (np.abs(bx) <= hl) & (np.abs(by) <= hw)
    region = gray[j0:j1, i0:i1]
    if obj.pattern == "quadrant" and obj.color2 is not None:
        val = np.where((bx >= 0) == (by >= 0), _gray8(obj.color), _gray8(obj.color2)).astype(np.uint8)
        region[inside] = val[inside]
    else:
        region[inside] = _gray8(obj.color)


def rasterize(scene: Sequence[SceneObject], cam: CameraModel, timestamp: float = 0.0,
              index: int = 0, background=GROUND_RGB) -> Frame:
    """Render a grayscale frame.

    Each pixel takes the grey level of the topmost object whose rectangle
    contains the pixel centre (no coverage blending).  Colours are converted
    to grey with the Rec. 601 luma weights and rounded.
    """
    gray = np.full(cam.shape, _gray8(background), dtype=np.uint8)
    for obj in sorted(scene, key=lambda o: o.layer):
        _paint(gray, cam, obj)
    return Frame(gray, timestamp, index)


# ---------------------------------------------------------------------------
# Frame dumps

def write_pgm(path, image: np.ndarray) -> None:
    image = np.ascontiguousarray(image, dtype=np.uint8)
    h, w = image.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(image.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if m is None:
        raise ValueError("not a binary PGM file")
    w, h, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise ValueError("only 8-bit PGM supported")
    # exactly one whitespace byte separates the header from the raster
    return np.frombuffer(data[m.end():m.end() + w * h], dtype=np.uint8).reshape(h, w)


def dump_frame(frame: Frame, outdir, fmt: str = "pgm") -> Path:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / f"frame_{frame.index:06d}.{fmt}"
    if fmt == "pgm":
        write_pgm(path, frame.image)
    elif fmt == "png":
        import cv2
        if not cv2.imwrite(str(path), frame.image):
            raise OSError(f"could not write {path}")
    else:
        raise ValueError(f"unknown frame format {fmt!r}")
    return path
