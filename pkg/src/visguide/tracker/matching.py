"""Normalized cross-correlation template matching."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import cv2
import numpy as np

# windows whose intensity variance (0..255 scale) is below this are "flat"
FLAT_VARIANCE = 1e-3


def ncc_map(image: np.ndarray, template: np.ndarray) -> np.ndarray:
    """Zero-mean normalized cross-correlation at every valid placement.

    Entry ``[i, j]`` scores the template placed with its top-left pixel at
    row ``i``, column ``j``.  Placements where either the window or the
    template has (near) zero variance score 0 instead of an undefined value.
    """
    img = np.asarray(image, dtype=np.float32)
    tpl = np.asarray(template, dtype=np.float32)
    th, tw = tpl.shape
    H, W = img.shape
    if th > H or tw > W:
        return np.zeros((0, 0), np.float32)
    if float(tpl.var()) < FLAT_VARIANCE:
        return np.zeros((H - th + 1, W - tw + 1), np.float32)
    res = cv2.matchTemplate(img, tpl, cv2.TM_CCOEFF_NORMED)
    # local window variance from box sums; cv2 leaves flat windows ill-defined
    mean = cv2.boxFilter(img, cv2.CV_64F, (tw, th), normalize=True, anchor=(0, 0),
                         borderType=cv2.BORDER_CONSTANT)
    sq = cv2.boxFilter(img.astype(np.float64) ** 2, cv2.CV_64F, (tw, th), normalize=True,
                       anchor=(0, 0), borderType=cv2.BORDER_CONSTANT)
    var = (sq - mean * mean)[: H - th + 1, : W - tw + 1]
    res = np.where((var < FLAT_VARIANCE) | ~np.isfinite(res), 0.0, res)
    return np.clip(res, -1.0, 1.0).astype(np.float32)


def extract_patch(image: np.ndarray, center: Tuple[float, float], size) -> Optional[np.ndarray]:
    """Patch whose centre pixel contains continuous point ``center``.

    ``size`` is an odd side length or a ``(width, height)`` pair.  Returns
    None when the patch would leave the frame.
    """
    if hasattr(image, "image"):
        image = image.image
    w, h = (size, size) if np.isscalar(size) else size
    ci, cj = int(np.floor(center[0])), int(np.floor(center[1]))
    x0, y0 = ci - w // 2, cj - h // 2
    H, W = image.shape
    if x0 < 0 or y0 < 0 or x0 + w > W or y0 + h > H:
        return None
    return np.array(image[y0:y0 + h, x0:x0 + w])


def patch_anchor(center: Tuple[float, float]) -> np.ndarray:
    """Offset of ``center`` from the centre of the pixel containing it."""
    c = np.asarray(center, float)
    return c - (np.floor(c) + 0.5)


@dataclass
class Match:
    center: np.ndarray   # continuous pixel position of the template centre
    score: float


def _subpixel(res: np.ndarray, i: int, j: int) -> Tuple[float, float]:
    """Parabolic refinement of a peak at row i, column j."""
    dx = dy = 0.0
    if 0 < j < res.shape[1] - 1:
        l, c, r = res[i, j - 1], res[i, j], res[i, j + 1]
        den = l - 2 * c + r
        if den < 0:
            dx = float(np.clip(0.5 * (l - r) / den, -0.5, 0.5))
    if 0 < i < res.shape[0] - 1:
        u, c, d = res[i - 1, j], res[i, j], res[i + 1, j]
        den = u - 2 * c + d
        if den < 0:
            dy = float(np.clip(0.5 * (u - d) / den, -0.5, 0.5))
    return dx, dy


def match_template(image: np.ndarray, template: np.ndarray,
                   center: Optional[Tuple[float, float]] = None,
                   radius: Optional[float] = None) -> Optional[Match]:
    """Best NCC placement of ``template``, optionally within ``radius`` px of ``center``.

    Returns the continuous position of the template centre with parabolic
    sub-pixel refinement, or None if the search window does not fit.
    """
    if hasattr(image, "image"):
        image = image.image
    th, tw = template.shape
    H, W = image.shape
    ox = oy = 0
    sub = image
    if center is not None and radius is not None:
        r = int(np.ceil(radius))
        cx, cy = int(np.floor(center[0])), int(np.floor(center[1]))
        x0 = max(cx - tw // 2 - r, 0)
        y0 = max(cy - th // 2 - r, 0)
        x1 = min(cx - tw // 2 + tw + r, W)
        y1 = min(cy - th // 2 + th + r, H)
        if x1 - x0 < tw or y1 - y0 < th:
            return None
        sub = image[y0:y1, x0:x1]
        ox, oy = x0, y0
    res = ncc_map(sub, template)
    if res.size == 0:
        return None
    i, j = np.unravel_index(int(np.argmax(res)), res.shape)
    dx, dy = _subpixel(res, i, j)
    u = ox + j + dx + tw // 2 + 0.5
    v = oy + i + dy + th // 2 + 0.5
    return Match(np.array([u, v]), float(res[i, j]))
