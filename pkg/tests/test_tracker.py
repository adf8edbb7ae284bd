from __future__ import annotations

import itertools

import numpy as np
import pytest

from visguide import render
from visguide.tracker import (FlowParams, OcclusionState, TrackerConfig, adjust_centroid,
                              build_bank, classify_occlusion, classify_transition,
                              compute_centroid, detect_features, extract_patch, init_tracker,
                              match_template, min_eigenvalue_map, ncc_map, pyramidal_flow,
                              reconstruct_missing, redetect, track_step)

from scripted import HIDE_ALL, HIDE_LEFT_MID, run_occlusion_script


def _white_square(size=60, lo=20, hi=40, base=0, top=255):
    img = np.full((size, size), base, np.uint8)
    img[lo:hi, lo:hi] = top
    return img


def _brute_min_eig(image, block=3):
    """Structure tensor from explicit Sobel sums and a per-pixel 2x2 eigen solve.

    Borders: the image is edge-replicated for the gradients, and the
    gradients are edge-replicated for the block sums.
    """
    H, W = image.shape
    img = np.pad(image.astype(float) / 255.0, 1, mode="edge")
    kx = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]]) / 8.0
    gx = np.zeros((H, W))
    gy = np.zeros((H, W))
    for i in range(H):
        for j in range(W):
            win = img[i:i + 3, j:j + 3]
            gx[i, j] = (win * kx).sum()
            gy[i, j] = (win * kx.T).sum()
    r = block // 2
    gx, gy = np.pad(gx, r, mode="edge"), np.pad(gy, r, mode="edge")
    out = np.zeros((H, W))
    for i in range(H):
        for j in range(W):
            sx = gx[i:i + block, j:j + block]
            sy = gy[i:i + block, j:j + block]
            M = np.array([[(sx * sx).sum(), (sx * sy).sum()], [(sx * sy).sum(), (sy * sy).sum()]])
            out[i, j] = np.linalg.eigvalsh(M)[0]
    return out


# --- corners -----------------------------------------------------------------

def test_min_eigenvalue_map_matches_brute_force():
    rng = np.random.default_rng(1)
    img = rng.integers(0, 256, (18, 23)).astype(np.uint8)
    assert np.allclose(min_eigenvalue_map(img), _brute_min_eig(img), atol=1e-12)


def test_square_corners_are_found():
    fs = detect_features(_white_square(), n=4)
    assert fs.n == 4 and not fs.deficit
    for corner in [(20, 20), (40, 20), (20, 40), (40, 40)]:
        assert np.min(np.hypot(*(fs.positions - corner).T)) <= 1.5


def test_uniform_image_has_no_features():
    fs = detect_features(np.full((40, 40), 117, np.uint8), n=9)
    assert fs.n == 0 and fs.deficit


def test_corners_ignore_a_brightness_offset():
    a = detect_features(_white_square(base=10, top=200), n=4)
    b = detect_features(_white_square(base=40, top=230), n=4)
    assert np.array_equal(a.positions, b.positions)


def test_roi_outside_the_frame_is_rejected():
    with pytest.raises(ValueError):
        detect_features(_white_square(), roi=(50, 50, 80, 80))


def test_feature_partition_invariant():
    fs = detect_features(_white_square(), n=4)
    fs.good[1] = False
    assert len(fs.good_ids) + int((~fs.good).sum()) == fs.n
    assert np.array_equal(fs.centroid, compute_centroid(fs.positions))


# --- flow --------------------------------------------------------------------

def _vehicle_frame(dx_px=0, dy_px=0):
    cam = render.CameraModel()
    g = cam.gsd
    veh = render.vehicle_object(0.31 * g + dx_px * g, 0.27 * g - dy_px * g, 0.3)
    return render.rasterize([veh], cam).image


def test_identity_flow_is_zero_and_all_good():
    img = _vehicle_frame()
    fs = detect_features(img, (370, 280, 430, 320))
    res = pyramidal_flow(img, img, fs.positions)
    assert res.status.all()
    assert np.abs(res.points - fs.positions).max() < 1e-9


def test_integer_translation_is_recovered():
    a, b = _vehicle_frame(), _vehicle_frame(2, 3)
    fs = detect_features(a, (370, 280, 430, 320))
    res = pyramidal_flow(a, b, fs.positions)
    assert res.status.all()
    assert np.abs(res.points - fs.positions - (2, 3)).max() < 0.5


def test_flow_marks_points_covered_by_a_bar():
    a = _vehicle_frame()
    b = a.copy()
    b[:, :400] = 15
    fs = detect_features(a, (370, 280, 430, 320))
    res = pyramidal_flow(a, b, fs.positions)
    covered = fs.positions[:, 0] < 392
    assert not res.status[covered].any()


def test_flow_params_are_validated():
    with pytest.raises(ValueError):
        FlowParams(window=14)
    with pytest.raises(ValueError):
        FlowParams(levels=0)


def test_flow_of_no_points():
    img = _vehicle_frame()
    res = pyramidal_flow(img, img, np.empty((0, 2)))
    assert res.points.shape == (0, 2)


# --- centroid bookkeeping -------------------------------------------------------

def test_centroid_examples():
    sq = np.array([(0, 0), (2, 0), (0, 2), (2, 2)], float)
    assert np.array_equal(compute_centroid(sq), (1, 1))
    assert np.array_equal(compute_centroid([(3.5, -2.0)]), (3.5, -2.0))
    pts = np.random.default_rng(0).normal(size=(100, 2))
    oracle = (sum(p[0] for p in pts) / 100, sum(p[1] for p in pts) / 100)
    assert compute_centroid(pts) == pytest.approx(oracle, abs=1e-15)
    with pytest.raises(ValueError):
        compute_centroid(np.empty((0, 2)))


def test_adjusted_centroid_example():
    all_old = np.array([(0, 0), (2, 0), (0, 2), (2, 2)], float)
    adjusted, delta = adjust_centroid(all_old[:2], np.array([(1, 0), (3, 0)], float), all_old)
    assert np.array_equal(delta, (0, 1))
    assert np.array_equal(adjusted, (2, 1))
    adjusted, delta = adjust_centroid(all_old, all_old + 1.0, all_old)
    assert np.array_equal(delta, (0, 0))
    assert np.array_equal(adjusted, (2, 2))


def test_adjusted_centroid_follows_rigid_translation():
    rng = np.random.default_rng(2)
    for _ in range(200):
        pts = rng.uniform(-50, 50, (9, 2))
        vis = rng.random(9) < 0.5
        vis[rng.integers(9)] = True
        t = rng.normal(scale=20, size=2)
        adjusted, _ = adjust_centroid(pts[vis], pts[vis] + t, pts)
        assert np.allclose(adjusted, pts.mean(axis=0) + t, atol=1e-12)


def test_reconstruction_is_rigid():
    pts = np.array([(0, 0), (4, 1), (2, 5)], float)
    c_old = pts.mean(axis=0)
    assert np.array_equal(reconstruct_missing(pts, c_old, c_old), pts)
    moved = reconstruct_missing(pts, c_old, c_old + (3, -2))
    assert np.allclose(moved, pts + (3, -2))


# --- state machine -------------------------------------------------------------

def test_occlusion_state_examples():
    assert classify_occlusion(5, 5) is OcclusionState.NONE
    assert classify_occlusion(3, 5) is OcclusionState.PARTIAL
    assert classify_occlusion(0, 5) is OcclusionState.TOTAL
    for bad in [(6, 5), (-1, 5), (0, 0)]:
        with pytest.raises(ValueError):
            classify_occlusion(*bad)


def test_transition_examples():
    assert classify_transition({1, 2, 3}, {1, 2, 3}, 5).label == "5a"
    assert classify_transition({1, 2}, {1, 2, 3, 4}, 5).label == "5b"
    assert classify_transition({1, 2, 3}, set(), 5).label == "6"
    assert classify_transition({1, 2}, {1}, 5).label == "5c"
    assert classify_transition({0, 1}, {2, 3, 4}, 5).label == "5d"
    assert classify_transition({0, 1}, {3}, 5).label == "5e"
    assert classify_transition({0, 1}, {1, 2}, 5).label == "5f"
    assert classify_transition(set(range(5)), set(range(5)), 5).label == "1"
    assert classify_transition(set(), set(range(5)), 5).label == "7"


def test_inconsistent_transition_inputs_are_rejected():
    with pytest.raises(ValueError):
        classify_transition({1, 2}, {7}, 5)
    with pytest.raises(ValueError):
        classify_transition({1, 2}, {1}, 5, old_state=OcclusionState.NONE)


def test_case_number_follows_the_state_pair():
    order = [OcclusionState.NONE, OcclusionState.PARTIAL, OcclusionState.TOTAL]
    n = 4
    for old, new in itertools.product(range(n + 1), repeat=2):
        case = classify_transition(set(range(old)), set(range(new)), n)
        so = order.index(classify_occlusion(old, n))
        sn = order.index(classify_occlusion(new, n))
        assert case.case == 3 * so + sn + 1
        assert (case.subcase is not None) == (case.case == 5)


# --- templates and redetection ----------------------------------------------------

def _brute_ncc(img, tpl):
    th, tw = tpl.shape
    t = tpl.astype(float) - tpl.mean()
    out = np.zeros((img.shape[0] - th + 1, img.shape[1] - tw + 1))
    for i in range(out.shape[0]):
        for j in range(out.shape[1]):
            w = img[i:i + th, j:j + tw].astype(float)
            w = w - w.mean()
            den = np.sqrt((w * w).sum() * (t * t).sum())
            out[i, j] = (w * t).sum() / den if den > 0 else 0.0
    return out


def test_ncc_matches_brute_force():
    rng = np.random.default_rng(4)
    img = rng.integers(0, 256, (20, 25)).astype(np.uint8)
    img[:8, :8] = 50  # flat corner scores zero
    tpl = img[9:14, 12:19].copy()
    assert np.allclose(ncc_map(img, tpl), _brute_ncc(img, tpl), atol=1e-4)


def test_flat_template_scores_zero():
    assert not ncc_map(_white_square(), np.full((5, 5), 9, np.uint8)).any()


def test_template_is_found_where_it_was_cut():
    img = _vehicle_frame()
    tpl = extract_patch(img, (401.3, 300.7), 21)
    m = match_template(img, tpl, (405.0, 297.0), 8)
    assert m.score == pytest.approx(1.0, abs=1e-5)
    # the parabolic peak fit is pulled slightly by uneven neighbour scores
    assert np.allclose(m.center, (401.5, 300.5), atol=0.05)
    assert extract_patch(img, (3.0, 3.0), 21) is None


def _initialised():
    img = _vehicle_frame()
    st = init_tracker(img, (383, 292, 418, 307))
    return img, st


def test_redetect_a_visible_vehicle():
    img, st = _initialised()
    moved = _vehicle_frame(5, -4)
    found = redetect(moved, st.bank, st.adjusted_centroid + (3, -2), 10)
    assert found is not None
    positions, good, score = found
    assert good.all() and score >= 0.75
    assert np.abs(positions - st.features.positions - (5, -4)).max() <= 1.0


def test_redetect_a_covered_vehicle_finds_nothing():
    img, st = _initialised()
    covered = img.copy()
    covered[250:350, 340:460] = 15
    assert redetect(covered, st.bank, st.adjusted_centroid, 10) is None


def test_tracker_needs_corners():
    with pytest.raises(ValueError):
        init_tracker(np.full((100, 100), 80, np.uint8), (40, 40, 60, 60))


# --- full pipeline ----------------------------------------------------------------

def test_unoccluded_translation_tracks_every_frame():
    cam = render.CameraModel()

    def frame(k):
        t = k / 30.0
        return render.rasterize([render.vehicle_object(4.0 * t, -1.2 * t, 0.3)], cam, t, k)

    f0 = frame(0)
    st = init_tracker(f0, (383, 292, 418, 308))
    c0 = st.adjusted_centroid.copy()
    prev = f0
    for k in range(1, 101):
        f = frame(k)
        meas, st, info = track_step(prev, f, st)
        truth = c0 + render.world_to_pixel(cam, np.array([4.0 * k / 30, -1.2 * k / 30])) - (400, 300)
        assert meas is not None and info.state is OcclusionState.NONE
        assert np.hypot(*(meas - truth)) < 1.0
        assert len(st.features.good_ids) + int((~st.features.good).sum()) == st.n
        prev = f


def test_half_occlusion_keeps_the_adjusted_centroid():
    script = [None] * 5 + [HIDE_LEFT_MID] * 30 + [None] * 10
    recs = run_occlusion_script(script)
    states = [r.state for r in recs]
    assert [k for k, _ in itertools.groupby(states)] == ["N", "P", "N"]
    worst_adj = max(np.hypot(*(r.measurement - r.truth_centroid)) for r in recs)
    worst_naive = max(np.hypot(*(r.naive_centroid - r.truth_centroid)) for r in recs if r.state == "P")
    assert worst_adj < 1.5
    assert worst_naive > 3.0


def test_full_cover_withholds_measurements():
    script = [None] * 4 + [HIDE_LEFT_MID] * 2 + [HIDE_ALL] * 5 + [HIDE_LEFT_MID] * 2 + [None] * 4
    recs = run_occlusion_script(script)
    assert [k for k, _ in itertools.groupby(r.state for r in recs)] == ["N", "P", "T", "P", "N"]
    for r in recs:
        assert (r.measurement is None) == (r.state == "T")
    assert all(r.label == r.expected for r in recs)


def test_bank_has_a_part_per_point():
    img, st = _initialised()
    bank = build_bank(img, st.features.positions, TrackerConfig())
    assert len(bank.parts) == st.n
    assert np.allclose(bank.offsets.mean(axis=0), 0.0, atol=1e-9)
