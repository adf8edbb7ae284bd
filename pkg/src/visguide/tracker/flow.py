"""Pyramidal Lucas-Kanade optical flow for sparse points.

Points are continuous pixel coordinates ``(u, v)`` with pixel centres at
half-integers.  All points are iterated together; each one stops updating
once its increment falls below ``epsilon``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import cv2
import numpy as np


@dataclass(frozen=True)
class FlowParams:
    window: int = 15          # odd side length of the integration window
    levels: int = 3           # pyramid levels including full resolution
    max_iter: int = 30
    epsilon: float = 0.01     # px, per-level convergence threshold
    # smallest gradient-tensor eigenvalue per window pixel, for central
    # differences of [0, 1] intensities; 1.6e-6 equals the customary 1e-4 of
    # the 8-bit Scharr convention (derivatives x32, sums scaled by 2^-20)
    min_eig: float = 1.6e-6
    max_residual: float = 0.08  # mean |I - J| over the window, intensities in [0, 1]
    fb_threshold: Optional[float] = 1.0  # forward-backward error limit, px

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError("window must be an odd integer >= 3")
        if self.levels < 1:
            raise ValueError("levels must be >= 1")


@dataclass
class FlowResult:
    points: np.ndarray       # (N, 2) tracked positions
    status: np.ndarray       # (N,) bool, True when every check passed
    residual: np.ndarray     # (N,) mean absolute residual
    min_eig: np.ndarray      # (N,) normalized smallest eigenvalue
    fb_error: np.ndarray     # (N,) forward-backward distance (nan if not run)


def build_pyramid(image: np.ndarray, levels: int) -> List[np.ndarray]:
    """Gaussian pyramid of float32 images scaled to [0, 1]; index 0 is full size."""
    if hasattr(image, "image"):
        image = image.image
    pyr = [np.asarray(image, dtype=np.float32) / np.float32(255.0)]
    for _ in range(levels - 1):
        pyr.append(cv2.pyrDown(pyr[-1]))
    return pyr


def bilinear(img: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Bilinear samples at array coordinates (pixel centres on integers), borders replicated."""
    H, W = img.shape
    x = np.clip(x, 0.0, W - 1.0)
    y = np.clip(y, 0.0, H - 1.0)
    x0 = np.minimum(np.floor(x).astype(np.intp), W - 2) if W > 1 else np.zeros_like(x, np.intp)
    y0 = np.minimum(np.floor(y).astype(np.intp), H - 2) if H > 1 else np.zeros_like(y, np.intp)
    fx = x - x0
    fy = y - y0
    flat = img.ravel()
    i00 = y0 * W + x0
    a = flat[i00]
    b = flat[i00 + 1] if W > 1 else a
    c = flat[i00 + W] if H > 1 else a
    d = flat[i00 + W + 1] if (W > 1 and H > 1) else a
    return (a * (1 - fx) + b * fx) * (1 - fy) + (c * (1 - fx) + d * fx) * fy


def _track_pyramid(prev_pyr, next_pyr, pts, params: FlowParams, initial=None):
    """Core coarse-to-fine iteration on array-coordinate points."""
    n = len(pts)
    h = params.window // 2
    off = np.arange(-h, h + 1, dtype=np.float64)
    offe = np.arange(-h - 1, h + 2, dtype=np.float64)
    area = float(params.window ** 2)
    L = min(params.levels, len(prev_pyr), len(next_pyr))
    guess = np.zeros((n, 2)) if initial is None else (initial - pts) * 0.5 ** (L - 1)
    disp = np.zeros((n, 2))
    eig = np.zeros(n)
    resid = np.zeros(n)
    for lev in range(L - 1, -1, -1):
        scale = 0.5 ** lev
        I = prev_pyr[lev]
        J = next_pyr[lev]
        p = (pts + 0.5) * scale - 0.5 if lev else pts
        # template patch with a one-pixel rim for central differences
        px = p[:, 0, None, None] + offe[None, None, :]
        py = p[:, 1, None, None] + offe[None, :, None]
        P = bilinear(I, np.broadcast_to(px, (n, len(offe), len(offe))),
                     np.broadcast_to(py, (n, len(offe), len(offe))))
        T = P[:, 1:-1, 1:-1]
        Ix = 0.5 * (P[:, 1:-1, 2:] - P[:, 1:-1, :-2])
        Iy = 0.5 * (P[:, 2:, 1:-1] - P[:, :-2, 1:-1])
        gxx = (Ix * Ix).sum(axis=(1, 2))
        gxy = (Ix * Iy).sum(axis=(1, 2))
        gyy = (Iy * Iy).sum(axis=(1, 2))
        det = gxx * gyy - gxy * gxy
        lam = 0.5 * (gxx + gyy) - np.sqrt(np.maximum(0.25 * (gxx - gyy) ** 2 + gxy ** 2, 0.0))
        if lev == 0:
            eig = lam / area
        ok = (lam / area > params.min_eig) & (det > 0)
        safe_det = np.where(ok, det, 1.0)
        d = np.zeros((n, 2))
        active = ok.copy()
        wx = p[:, 0, None, None] + off[None, None, :]
        wy = p[:, 1, None, None] + off[None, :, None]
        for _ in range(params.max_iter):
            if not active.any():
                break
            idx = np.nonzero(active)[0]
            shift = guess[idx] + d[idx]
            Jw = bilinear(J, wx[idx] + shift[:, 0, None, None], wy[idx] + shift[:, 1, None, None])
            diff = T[idx] - Jw
            bx = (diff * Ix[idx]).sum(axis=(1, 2))
            by = (diff * Iy[idx]).sum(axis=(1, 2))
            dx = (gyy[idx] * bx - gxy[idx] * by) / safe_det[idx]
            dy = (gxx[idx] * by - gxy[idx] * bx) / safe_det[idx]
            d[idx, 0] += dx
            d[idx, 1] += dy
            done = dx * dx + dy * dy < params.epsilon ** 2
            active[idx[done]] = False
        if lev == 0:
            disp = guess + d
            Jw = bilinear(J, wx + disp[:, 0, None, None], wy + disp[:, 1, None, None])
            resid = np.abs(T - Jw).mean(axis=(1, 2))
            resid[~ok] = np.inf
        else:
            guess = 2.0 * (guess + d)
    return pts + disp, eig, resid


def pyramidal_flow(prev, nxt, points: np.ndarray, params: FlowParams = FlowParams(),
                   prev_pyr=None, next_pyr=None, initial=None) -> FlowResult:
    """Track ``points`` (continuous pixel coords) from ``prev`` to ``nxt``.

    A point fails if its window is textureless, the final residual is too
    large, it lands outside the frame, or the backward track misses its
    origin by more than ``fb_threshold``.  ``initial`` optionally gives
    predicted positions in ``nxt`` to start the search from.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if prev_pyr is None:
        prev_pyr = build_pyramid(prev, params.levels)
    if next_pyr is None:
        next_pyr = build_pyramid(nxt, params.levels)
    n = len(pts)
    if n == 0:
        e = np.empty(0)
        return FlowResult(np.empty((0, 2)), np.empty(0, bool), e, e, e)
    arr = pts - 0.5
    init = None if initial is None else np.asarray(initial, np.float64).reshape(-1, 2) - 0.5
    new, eig, resid = _track_pyramid(prev_pyr, next_pyr, arr, params, init)
    H, W = prev_pyr[0].shape
    status = ((eig > params.min_eig) & (resid <= params.max_residual)
              & (new[:, 0] >= 0) & (new[:, 0] <= W - 1)
              & (new[:, 1] >= 0) & (new[:, 1] <= H - 1))
    fb = np.full(n, np.nan)
    if params.fb_threshold is not None and status.any():
        back, _, _ = _track_pyramid(next_pyr, prev_pyr, new[status], params)
        fb[status] = np.hypot(*(back - arr[status]).T)
        status &= ~(fb > params.fb_threshold)
    return FlowResult(new + 0.5, status, resid, eig, fb)
