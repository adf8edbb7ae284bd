"""Occlusion states, state-transition cases and centroid bookkeeping."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import AbstractSet, Optional

import numpy as np


class OcclusionState(enum.Enum):
    NONE = "N"
    PARTIAL = "P"
    TOTAL = "T"


_ORDER = {OcclusionState.NONE: 0, OcclusionState.PARTIAL: 1, OcclusionState.TOTAL: 2}


def classify_occlusion(n_good: int, n: int) -> OcclusionState:
    if n <= 0:
        raise ValueError("feature count must be positive")
    if not 0 <= n_good <= n:
        raise ValueError(f"good count {n_good} outside 0..{n}")
    if n_good == n:
        return OcclusionState.NONE
    if n_good == 0:
        return OcclusionState.TOTAL
    return OcclusionState.PARTIAL


@dataclass(frozen=True)
class TransitionCase:
    """Case number 1..9 (``3 * old + new + 1`` with N, P, T ordered 0, 1, 2) and,
    for the partial-to-partial case 5, a subcase letter."""

    case: int
    subcase: Optional[str] = None

    @property
    def label(self) -> str:
        return f"{self.case}{self.subcase or ''}"

    def __str__(self) -> str:
        return self.label


def classify_transition(good_old: AbstractSet[int], good_new: AbstractSet[int],
                        n: int, old_state: Optional[OcclusionState] = None,
                        new_state: Optional[OcclusionState] = None) -> TransitionCase:
    """Transition case between two consecutive good-point id sets.

    Partial-to-partial subcases: ``a`` same set, ``b`` strictly more points
    (superset), ``c`` strictly fewer (subset), ``d`` the new set is exactly
    the old complement, ``e`` the new set lies strictly inside the old
    complement, ``f`` any other overlap.
    """
    old = frozenset(good_old)
    new = frozenset(good_new)
    universe = frozenset(range(n))
    if not (old <= universe and new <= universe):
        raise ValueError("good ids must lie in 0..n-1")
    so = classify_occlusion(len(old), n)
    sn = classify_occlusion(len(new), n)
    if (old_state is not None and old_state != so) or (new_state is not None and new_state != sn):
        raise ValueError(f"states {old_state}/{new_state} inconsistent with good sets "
                         f"of sizes {len(old)}/{len(new)} (n={n})")
    case = 3 * _ORDER[so] + _ORDER[sn] + 1
    if case != 5:
        return TransitionCase(case)
    comp = universe - old
    if new == old:
        sub = "a"
    elif new > old:
        sub = "b"
    elif new < old:
        sub = "c"
    elif new == comp:
        sub = "d"
    elif new < comp:
        sub = "e"
    else:
        sub = "f"
    return TransitionCase(5, sub)


def compute_centroid(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("no points")
    return pts.mean(axis=0)


def adjust_centroid(good_old: np.ndarray, good_new: np.ndarray, all_old: np.ndarray):
    """Centroid of the full point set inferred from the visible subset.

    The offset between the full-set centroid and the visible-subset centroid
    in the previous frame is added to the visible-subset centroid in the
    current frame.  Returns ``(adjusted, offset)``.
    """
    offset = compute_centroid(all_old) - compute_centroid(good_old)
    return compute_centroid(good_new) + offset, offset


def reconstruct_missing(old_positions: np.ndarray, old_centroid: np.ndarray,
                        new_centroid: np.ndarray) -> np.ndarray:
    """Move points rigidly with the centroid (translation-only prediction)."""
    return np.asarray(old_positions, float) - np.asarray(old_centroid, float) + np.asarray(new_centroid, float)
