"""Shi-Tomasi corner detection."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy import ndimage


@dataclass
class FeatureSet:
    """Tracked keypoints with stable ids and a good/bad partition.

    Positions are continuous pixel coordinates ``(u, v)`` (pixel centres at
    half-integers, see :mod:`visguide.render`).
    """

    positions: np.ndarray
    good: np.ndarray
    ids: np.ndarray = None
    deficit: bool = False
    responses: Optional[np.ndarray] = None

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        self.good = np.asarray(self.good, dtype=bool).reshape(-1)
        if self.ids is None:
            self.ids = np.arange(len(self.positions))
        if len(self.good) != len(self.positions) or len(self.ids) != len(self.positions):
            raise ValueError("positions, good and ids must have the same length")

    @property
    def n(self) -> int:
        return len(self.positions)

    @property
    def good_ids(self) -> frozenset:
        return frozenset(int(i) for i in self.ids[self.good])

    @property
    def centroid(self) -> np.ndarray:
        return self.positions.mean(axis=0)


def min_eigenvalue_map(image: np.ndarray, block_size: int = 3) -> np.ndarray:
    """Smaller eigenvalue of the block-summed gradient structure tensor.

    Gradients are 3x3 Sobel responses (divided by 8) of the image scaled to
    [0, 1], with replicated borders.
    """
    img = np.asarray(image, dtype=np.float64) / 255.0
    gx = ndimage.sobel(img, axis=1, mode="nearest") / 8.0
    gy = ndimage.sobel(img, axis=0, mode="nearest") / 8.0
    area = float(block_size * block_size)
    a = ndimage.uniform_filter(gx * gx, block_size, mode="nearest") * area
    b = ndimage.uniform_filter(gx * gy, block_size, mode="nearest") * area
    c = ndimage.uniform_filter(gy * gy, block_size, mode="nearest") * area
    half_tr = 0.5 * (a + c)
    return half_tr - np.sqrt(np.maximum(0.25 * (a - c) ** 2 + b * b, 0.0))


def detect_features(image: np.ndarray, roi: Optional[Tuple[int, int, int, int]] = None,
                    n: int = 9, quality: float = 0.05, min_distance: float = 2.0,
                    block_size: int = 3, abs_threshold: float = 1e-6) -> FeatureSet:
    """Up to ``n`` Shi-Tomasi corners inside ``roi = (x0, y0, x1, y1)`` (pixel index bounds, end exclusive).

    A pixel qualifies if its response is a 3x3 local maximum, at least
    ``quality`` times the strongest response in the roi and above
    ``abs_threshold``.  Candidates are then taken strongest-first, skipping
    any closer than ``min_distance`` to one already taken.  Sets
    ``deficit`` when fewer than ``n`` corners were found.
    """
    if hasattr(image, "image"):
        image = image.image
    H, W = image.shape
    x0, y0, x1, y1 = roi if roi is not None else (0, 0, W, H)
    if not (0 <= x0 < x1 <= W and 0 <= y0 < y1 <= H):
        raise ValueError(f"roi {roi} outside frame {W}x{H}")
    # pad so the response inside the roi does not depend on the crop
    pad = block_size + 2
    cx0, cy0 = max(x0 - pad, 0), max(y0 - pad, 0)
    cx1, cy1 = min(x1 + pad, W), min(y1 + pad, H)
    resp = min_eigenvalue_map(image[cy0:cy1, cx0:cx1], block_size)
    local = resp[y0 - cy0:y1 - cy0, x0 - cx0:x1 - cx0]
    peak = float(local.max()) if local.size else 0.0
    if peak <= abs_threshold:
        return FeatureSet(np.empty((0, 2)), np.empty(0, bool), deficit=n > 0,
                          responses=np.empty(0))
    is_max = resp == ndimage.maximum_filter(resp, size=3, mode="nearest")
    is_max = is_max[y0 - cy0:y1 - cy0, x0 - cx0:x1 - cx0]
    cand = is_max & (local >= quality * peak) & (local > abs_threshold)
    ys, xs = np.nonzero(cand)
    vals = local[ys, xs]
    order = np.lexsort((xs, ys, -vals))  # strongest first, ties by row then column
    chosen = []
    for k in order:
        p = (xs[k] + x0, ys[k] + y0)
        if all((p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2 >= min_distance ** 2 for q in chosen):
            chosen.append(p)
            if len(chosen) == n:
                break
    pts = np.array(chosen, dtype=float).reshape(-1, 2) + 0.5
    resp_sel = np.array([local[int(p[1] - 0.5) - y0, int(p[0] - 0.5) - x0] for p in pts])
    return FeatureSet(pts, np.ones(len(pts), bool), deficit=len(pts) < n, responses=resp_sel)
