"""Per-frame tracking pipeline: flow, occlusion bookkeeping and redetection."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from .features import FeatureSet, detect_features
from .flow import FlowParams, build_pyramid, pyramidal_flow
from .matching import extract_patch, match_template, patch_anchor
from .occlusion import (OcclusionState, TransitionCase, adjust_centroid, classify_occlusion,
                        classify_transition, compute_centroid, reconstruct_missing)


@dataclass(frozen=True)
class TrackerConfig:
    n_features: int = 9
    roi_margin: int = 2            # px added around the detection box
    quality: float = 0.05
    min_distance: float = 2.0
    flow: FlowParams = FlowParams()
    rigid_tolerance: float = 2.0   # px deviation from the median displacement
    anchor_tolerance: float = 1.0  # px between frame-to-frame and reference-anchored tracks
    template_margin: int = 3       # px around the keypoint bounding box
    part_size: int = 7
    match_threshold: float = 0.75  # full-template NCC needed to redetect
    part_threshold: float = 0.8    # part-template NCC for votes and checks
    recovery_threshold: float = 0.95  # part NCC to revive a lost point without flow
    vote_agreement: float = 1.5    # px, part votes counted as agreeing
    min_votes: int = 2
    search_radius: float = 6.0     # initial redetection radius, px
    search_growth: float = 1.25    # radius factor per totally occluded frame
    snap_radius: float = 1.5       # px, corner snap after re-instantiation
    refresh_interval: int = 30     # unoccluded frames between template refreshes


@dataclass
class TemplateBank:
    """Appearance memory for redetection.

    ``offsets`` are keypoint positions relative to the keypoint centroid at
    capture time; ``anchor`` and ``part_anchors`` are sub-pixel offsets of the
    centroid / keypoints from the centre pixel of their patches.
    ``reference`` is the full-resolution capture frame (intensities in
    [0, 1]) with keypoints at ``reference_points``; tracks are re-anchored to
    it every frame so frame-to-frame drift cannot accumulate.
    """

    full: np.ndarray
    anchor: np.ndarray
    parts: list
    part_anchors: np.ndarray
    offsets: np.ndarray
    initial: np.ndarray
    reference: np.ndarray = None
    reference_points: np.ndarray = None
    frame_index: int = 0


def build_bank(image: np.ndarray, positions: np.ndarray, cfg: TrackerConfig,
               frame_index: int = 0, initial: Optional[np.ndarray] = None) -> TemplateBank:
    pos = np.asarray(positions, float)
    c = compute_centroid(pos)
    half = np.max(np.abs(pos - c), axis=0) + cfg.template_margin
    w = 2 * int(np.ceil(half[0])) + 1
    h = 2 * int(np.ceil(half[1])) + 1
    full = extract_patch(image, c, (w, h))
    if full is None:
        raise ValueError("object template leaves the frame")
    parts = [extract_patch(image, p, cfg.part_size) for p in pos]
    return TemplateBank(full=full, anchor=patch_anchor(c), parts=parts,
                        part_anchors=np.array([patch_anchor(p) for p in pos]),
                        offsets=pos - c, initial=pos.copy() if initial is None else initial,
                        reference=build_pyramid(image, 1)[0], reference_points=pos.copy(),
                        frame_index=frame_index)


@dataclass
class TrackerState:
    features: FeatureSet
    state: OcclusionState
    bank: TemplateBank
    adjusted_centroid: np.ndarray
    naive_centroid: Optional[np.ndarray]
    reconstructed: np.ndarray          # (n,) bool, positions predicted rather than tracked
    occluded_frames: int = 0
    unoccluded_run: int = 0
    frame_index: int = 0
    case: Optional[TransitionCase] = None
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(2))  # px/frame of the centroid

    @property
    def n(self) -> int:
        return self.features.n


@dataclass
class StepInfo:
    case: TransitionCase
    state: OcclusionState
    good_count: int
    naive_centroid: Optional[np.ndarray]
    adjusted_centroid: np.ndarray
    redetected: bool = False
    match_score: Optional[float] = None


def _image(frame):
    return frame.image if hasattr(frame, "image") else frame


def init_tracker(frame, roi: Tuple[int, int, int, int], cfg: TrackerConfig = TrackerConfig(),
                 frame_index: int = 0) -> TrackerState:
    """Detect keypoints in ``roi`` on an unoccluded frame and capture templates."""
    img = _image(frame)
    x0, y0, x1, y1 = roi
    H, W = img.shape
    m = cfg.roi_margin
    box = (max(int(x0) - m, 0), max(int(y0) - m, 0), min(int(np.ceil(x1)) + m, W),
           min(int(np.ceil(y1)) + m, H))
    fs = detect_features(img, box, cfg.n_features, cfg.quality, cfg.min_distance)
    if fs.n == 0:
        raise ValueError("no features found in the initial roi")
    bank = build_bank(img, fs.positions, cfg, frame_index)
    c = fs.centroid
    return TrackerState(features=fs, state=OcclusionState.NONE, bank=bank,
                        adjusted_centroid=c, naive_centroid=c,
                        reconstructed=np.zeros(fs.n, bool), frame_index=frame_index)


def _rigid_filter(old: np.ndarray, new: np.ndarray, ok: np.ndarray, was_good: np.ndarray,
                  tol: float) -> np.ndarray:
    """Reject successful tracks that disagree with the median displacement.

    The reference is taken from previously good points when any survived, so
    freshly reconstructed points cannot outvote them.
    """
    ref = ok & was_good
    if not ref.any():
        ref = ok
    if ref.sum() < 2:
        return ok
    med = np.median(new[ref] - old[ref], axis=0)
    dev = np.hypot(*(new - old - med).T)
    return ok & (dev <= tol)


def _snap_to_corners(img, positions, cfg: TrackerConfig) -> np.ndarray:
    H, W = img.shape
    r = int(np.ceil(cfg.snap_radius)) + 1
    out = positions.copy()
    for i, p in enumerate(positions):
        x0, y0 = int(np.floor(p[0])) - r, int(np.floor(p[1])) - r
        x1, y1 = x0 + 2 * r + 1, y0 + 2 * r + 1
        if x0 < 0 or y0 < 0 or x1 > W or y1 > H:
            continue
        fs = detect_features(img, (x0, y0, x1, y1), n=1, quality=0.0, min_distance=0.0)
        if fs.n and np.hypot(*(fs.positions[0] - p)) <= cfg.snap_radius:
            out[i] = fs.positions[0]
    return out


def _check_parts(img, positions, bank: TemplateBank, cfg: TrackerConfig, radius: float = 1.0,
                 threshold: Optional[float] = None):
    """Part-template verification; returns (ok mask, refined positions)."""
    threshold = cfg.part_threshold if threshold is None else threshold
    ok = np.zeros(len(positions), bool)
    refined = positions.copy()
    for i, p in enumerate(positions):
        tpl = bank.parts[i]
        if tpl is None:
            continue
        m = match_template(img, tpl, p - bank.part_anchors[i], radius)
        if m is not None and m.score >= threshold:
            ok[i] = True
            refined[i] = m.center + bank.part_anchors[i]
    return ok, refined


def redetect(frame, bank: TemplateBank, center: np.ndarray, radius: float,
             cfg: TrackerConfig = TrackerConfig()):
    """Search for the object near ``center``.

    Full-template NCC first; if its peak is below threshold, part templates
    vote for a centroid and at least ``min_votes`` agreeing parts are needed.
    Returns ``(positions, good mask, score)`` or None when not found.
    """
    img = _image(frame)
    H, W = img.shape
    positions = None
    score = None
    m = match_template(img, bank.full, np.asarray(center) - bank.anchor, radius)
    if m is not None and m.score >= cfg.match_threshold:
        c = m.center + bank.anchor
        positions = c + bank.offsets
        if bank.reference is None:
            positions = _snap_to_corners(img, positions, cfg)
        score = m.score
    else:
        votes = []
        for i, tpl in enumerate(bank.parts):
            if tpl is None:
                continue
            guess = np.asarray(center) + bank.offsets[i] - bank.part_anchors[i]
            pm = match_template(img, tpl, guess, radius)
            if pm is not None and pm.score >= cfg.part_threshold:
                votes.append((i, pm.center + bank.part_anchors[i] - bank.offsets[i], pm.score))
        best = None
        for i, c, _ in votes:
            support = [j for j, cj, _ in votes if np.hypot(*(cj - c)) <= cfg.vote_agreement]
            if len(support) >= cfg.min_votes and (best is None or len(support) > len(best[1])):
                best = (c, support)
        if best is None:
            return None
        c = np.mean([cj for j, cj, _ in votes if j in best[1]], axis=0)
        positions = c + bank.offsets
        if bank.reference is None:
            positions = _snap_to_corners(img, positions, cfg)
        score = float(np.mean([s for j, _, s in votes if j in best[1]]))
    inside = ((positions[:, 0] > 0) & (positions[:, 0] < W)
              & (positions[:, 1] > 0) & (positions[:, 1] < H))
    good, refined = _check_parts(img, positions, bank, cfg)
    if bank.reference is not None:
        anchored = _anchor(bank, build_pyramid(img, 1), positions, cfg)
        good &= anchored.status
        refined = np.where(anchored.status[:, None], anchored.points, refined)
    good &= inside
    if not good.any():
        return None
    return np.where(good[:, None], refined, positions), good, score


def _anchor(bank: TemplateBank, next_pyr, predicted: np.ndarray, cfg: TrackerConfig):
    """Track the reference keypoints straight into the current frame, starting at ``predicted``."""
    return pyramidal_flow(None, None, bank.reference_points,
                          replace(cfg.flow, levels=1, fb_threshold=None),
                          [bank.reference], next_pyr[:1], initial=predicted)


def track_step(prev, nxt, st: TrackerState, cfg: TrackerConfig = TrackerConfig(),
               hint: Optional[np.ndarray] = None, prev_pyr=None, next_pyr=None):
    """Advance the tracker by one frame.

    ``hint`` optionally supplies a predicted object position (pixels) used to
    centre redetection while totally occluded.  Returns
    ``(measurement or None, new state, StepInfo)``; the measurement is the
    adjusted centroid and is absent exactly when the new state is total
    occlusion.
    """
    img = _image(nxt)
    n = st.n
    old_pos = st.features.positions
    old_good = st.features.good
    old_ids = st.features.good_ids
    redetected = False
    score = None
    naive = None

    if st.state != OcclusionState.TOTAL:
        if prev_pyr is None:
            prev_pyr = build_pyramid(_image(prev), cfg.flow.levels)
        if next_pyr is None:
            next_pyr = build_pyramid(img, cfg.flow.levels)
        fr = pyramidal_flow(None, None, old_pos, cfg.flow, prev_pyr, next_pyr)
        retry = ~fr.status
        if retry.any() and cfg.flow.levels > 1:
            # A large occluder appearing or vanishing between frames corrupts the
            # coarse levels for every point, even where the fine window is
            # untouched.  Retry locally from the constant-velocity prediction.
            local = pyramidal_flow(None, None, old_pos[retry], replace(cfg.flow, levels=1),
                                   prev_pyr[:1], next_pyr[:1], initial=old_pos[retry] + st.velocity)
            fr.points[retry] = local.points
            fr.status[retry] = local.status
        anchored = _anchor(st.bank, next_pyr, fr.points, cfg)
        ok = (fr.status & anchored.status
              & (np.hypot(*(anchored.points - fr.points).T) <= cfg.anchor_tolerance))
        fr.points = np.where(ok[:, None], anchored.points, fr.points)
        ok = _rigid_filter(old_pos, fr.points, ok, old_good, cfg.rigid_tolerance)
        lost = ~ok
        if lost.any():
            # Points that were hidden, or that locked onto a look-alike spot,
            # get one more try straight against the reference, started where
            # the surviving points say they should be.
            ref = ok & old_good if (ok & old_good).any() else ok
            motion = (np.median(fr.points[ref] - old_pos[ref], axis=0) if ref.any()
                      else st.velocity)
            seed = old_pos + motion
            back = _anchor(st.bank, next_pyr, np.where(lost[:, None], seed, fr.points), cfg)
            looks, _ = _check_parts(img, back.points, st.bank, cfg, radius=0.0)
            near = np.hypot(*(back.points - seed).T) <= cfg.rigid_tolerance
            by_flow = lost & back.status & looks & near
            # The small part template clears an edge sooner than the flow
            # window does, so a point next to a receding occluder comes back
            # through it.  The match only vouches for visibility; the rigid
            # prediction is the more precise position.
            by_part, _ = _check_parts(img, seed, st.bank, cfg, radius=0.0,
                                      threshold=cfg.recovery_threshold)
            by_part &= lost & ~by_flow
            fr.points = np.where(by_flow[:, None], back.points,
                                 np.where(by_part[:, None], seed, fr.points))
            ok = ok | by_flow | by_part
        new_good = ok
        new_ids = frozenset(int(i) for i in st.features.ids[new_good])
        case = classify_transition(old_ids, new_ids, n)
        if case.subcase in ("d", "e"):
            # every survivor was a reconstructed point: confirm them by appearance
            confirmed, _ = _check_parts(img, fr.points, st.bank, cfg, radius=0.0)
            new_good = new_good & confirmed
            new_ids = frozenset(int(i) for i in st.features.ids[new_good])
        if new_good.any():
            adjusted, _ = adjust_centroid(old_pos[new_good], fr.points[new_good], old_pos)
            naive = compute_centroid(fr.points[new_good])
            positions = fr.points.copy()
            bad = ~new_good
            positions[bad] = reconstruct_missing(old_pos[bad], compute_centroid(old_pos), adjusted)
            new_state = classify_occlusion(int(new_good.sum()), n)
        else:
            adjusted = st.adjusted_centroid + st.velocity
            positions = reconstruct_missing(old_pos, compute_centroid(old_pos), adjusted)
            new_state = OcclusionState.TOTAL
        case = classify_transition(old_ids, new_ids, n)
    else:
        k = st.occluded_frames + 1
        predicted = st.adjusted_centroid + st.velocity
        center = np.asarray(hint, float) if hint is not None else predicted
        H, W = img.shape
        radius = min(cfg.search_radius * cfg.search_growth ** k, float(max(H, W)))
        found = redetect(img, st.bank, center, radius, cfg)
        if found is None:
            positions = reconstruct_missing(old_pos, compute_centroid(old_pos), center)
            new_good = np.zeros(n, bool)
            adjusted = center
            new_state = OcclusionState.TOTAL
        else:
            positions, new_good, score = found
            redetected = True
            adjusted = compute_centroid(positions)
            naive = compute_centroid(positions[new_good])
            new_state = classify_occlusion(int(new_good.sum()), n)
        new_ids = frozenset(int(i) for i in st.features.ids[new_good])
        case = classify_transition(old_ids, new_ids, n)

    if new_state == OcclusionState.TOTAL:
        velocity = st.velocity
    elif st.state == OcclusionState.TOTAL:
        velocity = np.zeros(2)
    else:
        velocity = 0.5 * st.velocity + 0.5 * (adjusted - st.adjusted_centroid)

    features = FeatureSet(positions, new_good, ids=st.features.ids)
    new_st = TrackerState(
        features=features, state=new_state, bank=st.bank, adjusted_centroid=adjusted,
        naive_centroid=naive, reconstructed=~new_good,
        occluded_frames=st.occluded_frames + 1 if new_state == OcclusionState.TOTAL else 0,
        unoccluded_run=st.unoccluded_run + 1 if new_state == OcclusionState.NONE else 0,
        frame_index=st.frame_index + 1, case=case, velocity=velocity)
    if (new_state == OcclusionState.NONE and new_st.unoccluded_run >= cfg.refresh_interval
            and new_st.frame_index - st.bank.frame_index >= cfg.refresh_interval):
        try:
            new_st.bank = build_bank(img, positions, cfg, new_st.frame_index, st.bank.initial)
        except ValueError:
            pass
    info = StepInfo(case=case, state=new_state, good_count=int(new_good.sum()),
                    naive_centroid=naive, adjusted_centroid=adjusted,
                    redetected=redetected, match_score=score)
    measurement = None if new_state == OcclusionState.TOTAL else adjusted.copy()
    return measurement, new_st, info
