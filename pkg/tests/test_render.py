from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from visguide import render
from visguide.render import CameraModel


def test_focal_length_of_a_right_angle_view_is_half_the_width():
    assert render.focal_length(CameraModel(fov_deg=90.0, sensor_width_mm=2.0)) == pytest.approx(1.0)


def test_focal_length_shrinks_as_the_view_widens():
    fovs = np.linspace(5, 175, 60)
    f = [render.focal_length(CameraModel(fov_deg=a)) for a in fovs]
    assert np.all(np.diff(f) < 0)


@pytest.mark.parametrize("fov", [0.0, 180.0, -3.0, 200.0])
def test_field_of_view_outside_the_open_interval_is_rejected(fov):
    with pytest.raises(ValueError):
        CameraModel(fov_deg=fov)


def test_default_footprint_and_ground_sample():
    cam = CameraModel()
    # ground width seen = altitude * sensor width / focal length
    f = 2.5 / math.tan(math.radians(23.5))
    assert cam.width_px == 800
    assert cam.width_px * cam.gsd == pytest.approx(150 * 5 / f, rel=1e-12)
    assert cam.width_px * cam.gsd == pytest.approx(130.44, abs=0.01)
    assert cam.gsd == pytest.approx(0.1630, abs=1e-4)


def test_sensor_offset_maps_to_ground():
    w = render.sensor_to_world(CameraModel(), (1.0, -2.0))
    assert w == pytest.approx((26.089, -52.177), abs=1e-3)


def test_image_axes_point_right_and_down():
    cam = CameraModel()
    u0, v0 = render.project(cam, (0.0, 0.0)).pixel
    assert (u0, v0) == (400.0, 300.0)
    u1, v1 = render.project(cam, (10.0, 10.0)).pixel
    assert u1 > u0 and v1 < v0


@settings(max_examples=200, deadline=None)
@given(st.floats(-60, 60), st.floats(-45, 45), st.floats(50, 500))
def test_projection_round_trip_and_quantization(x, y, alt):
    cam = CameraModel(altitude=alt, x=3.0, y=-2.0)
    p = render.project(cam, (x, y))
    assert render.unproject(cam, p) == pytest.approx((x, y), abs=1e-9)
    assert render.unproject(cam, p.pixel) == pytest.approx((x, y), abs=1e-9)
    # the integer index is the pixel whose square contains the point
    centre = render.unproject(cam, (p.index[0] + 0.5, p.index[1] + 0.5))
    assert np.hypot(*(centre - (x, y))) <= cam.gsd / math.sqrt(2) + 1e-9
    assert render.world_to_pixel(cam, np.array([x, y])) == pytest.approx(p.pixel, abs=1e-9)


def test_vehicle_footprint_in_pixels():
    cam = CameraModel()
    img = render.rasterize([render.vehicle_object(0.07, -0.05, 0.0)], cam).image
    ys, xs = np.nonzero(img != img[0, 0])
    assert abs((xs.max() - xs.min() + 1) - 31) <= 1
    assert abs((ys.max() - ys.min() + 1) - 12) <= 1


def test_vehicle_shows_a_two_tone_checker():
    cam = CameraModel()
    img = render.rasterize([render.vehicle_object(0.07, -0.05, 0.0)], cam).image
    light, dark = render._gray8(render.VEHICLE_LIGHT_RGB), render._gray8(render.VEHICLE_DARK_RGB)
    uv = render.world_to_pixel(cam, np.array([[1.5, 0.5], [-1.5, 0.5], [-1.5, -0.5], [1.5, -0.5]]))
    vals = [img[int(v), int(u)] for u, v in uv]
    assert vals == [light, dark, light, dark]


@pytest.mark.parametrize("shift", [(1, 0), (0, 3), (-7, 5), (12, -4)])
def test_whole_pixel_motion_shifts_the_image(shift):
    cam = CameraModel()
    g = cam.gsd
    base = (0.31 * g, 0.27 * g)
    a = render.rasterize([render.vehicle_object(*base, 0.4)], cam).image
    moved = (base[0] + shift[0] * g, base[1] - shift[1] * g)
    b = render.rasterize([render.vehicle_object(*moved, 0.4)], cam).image
    dx, dy = shift
    assert np.array_equal(np.roll(a, (dy, dx), axis=(0, 1))[50:-50, 50:-50], b[50:-50, 50:-50])


def test_layers_paint_bar_over_vehicle_regardless_of_order():
    cam = CameraModel()
    veh = render.vehicle_object(0.0, 0.0, 0.0)
    bar = render.bar_object(-1.0, -5.0, 1.0, 5.0)
    a = render.rasterize([veh, bar], cam).image
    b = render.rasterize([bar, veh], cam).image
    assert np.array_equal(a, b)
    assert a[300, 400] == render._gray8(render.BAR_RGB)


def test_frames_are_read_only():
    fr = render.rasterize([], CameraModel())
    with pytest.raises(ValueError):
        fr.image[0, 0] = 1


def test_lane_markings_cover_the_footprint():
    cam = CameraModel(x=1000.0, y=0.0)
    objs = render.lane_marking_objects(cam, [-2.0, 2.0, 500.0])
    assert objs and all(abs(o.y) == 2.0 for o in objs)
    xs = [o.x for o in objs]
    half = cam.width_px * cam.gsd / 2
    assert min(xs) < cam.x - half + 9 and max(xs) > cam.x + half - 9


@pytest.mark.parametrize("fmt", ["pgm", "png"])
def test_frame_dump_round_trip(tmp_path, fmt):
    import cv2
    rng = np.random.default_rng(0)
    fr = render.Frame(rng.integers(0, 256, (37, 53), dtype=np.uint8), 0.0, 12)
    path = render.dump_frame(fr, tmp_path, fmt)
    assert path.name == f"frame_000012.{fmt}"
    back = render.read_pgm(path) if fmt == "pgm" else cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    assert np.array_equal(back, fr.image)


def test_pgm_reader_rejects_other_files(tmp_path):
    p = tmp_path / "x.pgm"
    p.write_bytes(b"P6\n1 1\n255\n\x00\x00\x00")
    with pytest.raises(ValueError):
        render.read_pgm(p)
