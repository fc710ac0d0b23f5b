import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import disk_image, make_frame
from oracles import naive_blur, naive_local_mean
from rapdscreen.detection import (DetectionConfig, adaptive_threshold, blur_array, coarse_threshold,
                                  detect_pupil, extract_pupil_contour, fit_circle, gaussian_blur,
                                  gaussian_kernel, local_mean, locate_darkest_region)
from rapdscreen.errors import DegenerateGeometry, InvalidParameter, NoCandidate, NoContour
from rapdscreen.simulator import RenderConfig, render_frame


# -- oracles -------------------------------------------------------------------

def grid_search_circle(pts, center_guess, span=1.5, step=0.01):
    """Centre minimizing geometric RMS; the best radius for a centre is the mean distance."""
    best = None
    offs = np.arange(-span, span + step / 2, step)
    for dx in offs:
        cx = center_guess[0] + dx
        d_all = []
        for dy in offs:
            cy = center_guess[1] + dy
            d = np.hypot(pts[:, 0] - cx, pts[:, 1] - cy)
            r = d.mean()
            rms = np.sqrt(np.mean((d - r) ** 2))
            if best is None or rms < best[0]:
                best = (rms, cx, cy, 2 * r)
    return best


# -- blur ------------------------------------------------------------------------

def test_kernel_normalized_and_default_sigma():
    k = gaussian_kernel(7, 7 / 6)
    assert len(k) == 7 and k.sum() == pytest.approx(1.0, abs=1e-15)
    assert DetectionConfig().sigma == pytest.approx(7 / 6)


def test_even_kernel_rejected():
    with pytest.raises(InvalidParameter):
        gaussian_blur(make_frame(np.zeros((32, 32))), 6, 1.0)
    with pytest.raises(InvalidParameter):
        DetectionConfig(blur_kernel=4)


def test_blur_preserves_constant():
    out = gaussian_blur(make_frame(np.full((40, 50), 100)), 7, 7 / 6)
    assert np.all(out.pixels == 100)
    assert out.pixels.shape == (40, 50)


def test_blur_impulse_mass():
    img = np.zeros((48, 48))
    img[24, 24] = 255
    out = blur_array(img, 7, 7 / 6)
    assert out.sum() == pytest.approx(255.0, abs=1e-9)
    # each of the 49 taps rounds on its own, so the 8-bit sum is only bounded per pixel
    rounded = gaussian_blur(make_frame(img), 7, 7 / 6).pixels.astype(float)
    assert np.max(np.abs(rounded - out)) <= 0.5
    assert abs(rounded.sum() - 255) <= 49 * 0.5


def test_blur_matches_naive_convolution(rng):
    img = rng.integers(0, 256, (64, 64))
    fast = gaussian_blur(make_frame(img), 7, 7 / 6).pixels.astype(int)
    slow = np.clip(np.rint(naive_blur(img, 7, 7 / 6)), 0, 255).astype(int)
    assert np.max(np.abs(fast - slow)) <= 1


def test_blur_keeps_metadata():
    f = make_frame(np.zeros((32, 32)), t=12.5)
    out = gaussian_blur(f, 7)
    assert out.timestamp == 12.5 and out.eye is f.eye


# -- coarse threshold and ROI ----------------------------------------------------------

def test_coarse_threshold_cases():
    white = make_frame(np.full((32, 32), 255))
    assert not coarse_threshold(white, 60).any()
    img = disk_image((48, 48), 24, 24, 8)
    np.testing.assert_array_equal(coarse_threshold(make_frame(img), 60), img == 0)
    assert not coarse_threshold(make_frame(img), 0).any()


def test_single_component_roi():
    mask = np.zeros((40, 40), bool)
    mask[10:15, 20:26] = True
    roi = locate_darkest_region(mask, make_frame(np.zeros((40, 40))), 3)
    assert (roi.x, roi.y, roi.width, roi.height) == (17, 7, 12, 11)


def test_darkest_component_wins():
    img = np.full((40, 60), 200)
    img[5:10, 5:10] = 40
    img[20:35, 30:50] = 10
    img[5:8, 40:43] = 40
    f = make_frame(img)
    roi = locate_darkest_region(coarse_threshold(f, 60), f, 0)
    assert (roi.x, roi.y, roi.width, roi.height) == (30, 20, 20, 15)


def test_tie_goes_to_larger_then_topmost():
    img = np.full((40, 60), 200)
    img[25:30, 5:10] = 20
    img[2:5, 40:43] = 20
    f = make_frame(img)
    roi = locate_darkest_region(coarse_threshold(f, 60), f, 0)
    assert (roi.x, roi.y) == (5, 25)
    img[2:7, 40:45] = 20  # now same size as the lower one and higher up
    f = make_frame(img)
    roi = locate_darkest_region(coarse_threshold(f, 60), f, 0)
    assert (roi.x, roi.y) == (40, 2)


def test_roi_clamped_to_frame():
    mask = np.zeros((40, 40), bool)
    mask[0:3, 37:40] = True
    roi = locate_darkest_region(mask, make_frame(np.zeros((40, 40))), 10)
    assert roi.x >= 0 and roi.y == 0 and roi.x + roi.width == 40 and roi.y + roi.height <= 40


def test_empty_mask_no_candidate():
    with pytest.raises(NoCandidate):
        locate_darkest_region(np.zeros((32, 32), bool), make_frame(np.zeros((32, 32))), 5)


# -- adaptive threshold ------------------------------------------------------------------

def test_local_mean_matches_naive(rng):
    img = rng.integers(0, 256, (45, 38)).astype(np.uint8)
    np.testing.assert_allclose(local_mean(img, 31), naive_local_mean(img, 31), atol=1e-9)
    np.testing.assert_allclose(local_mean(img, 5), naive_local_mean(img, 5), atol=1e-9)


def test_constant_roi_all_clear():
    assert not adaptive_threshold(np.full((40, 40), 90, np.uint8), 31, 5).any()


def test_dark_disk_adaptive_matches_oracle():
    img = disk_image((61, 61), 30, 30, 8, inside=30, outside=120)
    out = adaptive_threshold(img, 31, 5)
    oracle = img.astype(float) < naive_local_mean(img, 31) - 5
    np.testing.assert_array_equal(out, oracle)
    np.testing.assert_array_equal(out, img == 30)


def test_window_larger_than_roi():
    with pytest.raises(InvalidParameter):
        adaptive_threshold(np.zeros((20, 40), np.uint8), 31, 5)


# -- contour -------------------------------------------------------------------------------

def test_single_pixel_contour():
    m = np.zeros((10, 10), bool)
    m[4, 6] = True
    np.testing.assert_array_equal(extract_pupil_contour(m), [[6, 4]])


def test_square_perimeter():
    m = np.zeros((30, 30), bool)
    m[5:15, 8:18] = True
    pts = extract_pupil_contour(m)
    assert len(pts) == 36
    assert set(map(tuple, pts.astype(int))) == {
        (x, y) for x in range(8, 18) for y in range(5, 15) if x in (8, 17) or y in (5, 14)}


def test_border_pixels_count_as_boundary():
    m = np.ones((6, 6), bool)
    assert len(extract_pupil_contour(m)) == 20


def test_largest_component_only():
    m = np.zeros((40, 40), bool)
    m[2:5, 2:5] = True
    m[10:30, 10:30] = True
    pts = extract_pupil_contour(m)
    assert pts[:, 0].min() >= 10 and len(pts) == 76


def test_holes_filled_by_default():
    m = np.zeros((30, 30), bool)
    m[5:15, 5:15] = True
    m[9:11, 9:11] = False
    assert len(extract_pupil_contour(m)) == 36
    assert len(extract_pupil_contour(m, fill_holes=False)) == 36 + 8


def test_disk_contour_near_circle():
    m = disk_image((50, 50), 25, 25, 15) == 0
    pts = extract_pupil_contour(m)
    d = np.hypot(pts[:, 0] - 25, pts[:, 1] - 25)
    assert np.all(np.abs(d - 15) <= 1.0)


def test_empty_contour():
    with pytest.raises(NoContour):
        extract_pupil_contour(np.zeros((10, 10), bool))


# -- circle fit ---------------------------------------------------------------------------

def circle_points(cx, cy, r, n, phase=0.0):
    a = phase + 2 * np.pi * np.arange(n) / n
    return np.column_stack([cx + r * np.cos(a), cy + r * np.sin(a)])


def test_exact_circle():
    cx, cy, d, res = fit_circle(circle_points(50, 50, 20, 16))
    assert abs(cx - 50) < 1e-6 and abs(cy - 50) < 1e-6
    assert abs(d - 40) < 1e-6 and res < 1e-6


def test_noisy_circle_against_grid_search(rng):
    pts = circle_points(50, 50, 20, 16) + rng.uniform(-0.5, 0.5, (16, 2))
    cx, cy, d, res = fit_circle(pts)
    rms, ocx, ocy, od = grid_search_circle(pts, (50, 50))
    assert abs(cx - ocx) <= 0.5 and abs(cy - ocy) <= 0.5 and abs(d - od) <= 0.5
    assert res == pytest.approx(rms, abs=0.05)


def test_collinear_and_too_few():
    line = np.column_stack([np.arange(10), 2 * np.arange(10) + 1.0])
    with pytest.raises(DegenerateGeometry):
        fit_circle(line)
    with pytest.raises(DegenerateGeometry):
        fit_circle(circle_points(0, 0, 5, 7))


@settings(max_examples=200, deadline=None)
@given(st.floats(-500, 500), st.floats(-500, 500), st.floats(3, 200), st.integers(8, 64), st.floats(0, 6.3))
def test_circle_fit_exactness(cx, cy, r, n, phase):
    fx, fy, d, res = fit_circle(circle_points(cx, cy, r, n, phase))
    assert abs(d - 2 * r) < 1e-6 and res < 1e-6
    assert abs(fx - cx) < 1e-6 and abs(fy - cy) < 1e-6


# -- full pipeline -------------------------------------------------------------------------

@pytest.mark.parametrize("noise", [0.0, 4.0])
def test_detect_rendered_40px(noise):
    f = render_frame(40.0, RenderConfig(pixel_noise_sd=noise), 0.0, seed=7, t=100.0)
    m = detect_pupil(f)
    assert m.valid
    assert abs(m.diameter - 40.0) <= (1.0 if noise == 0 else 0.02 * 40)
    cx, cy = RenderConfig().eye_center
    assert abs(m.center_x - cx) < 0.5 and abs(m.center_y - cy) < 0.5


def test_white_frame_invalid():
    m = detect_pupil(make_frame(np.full((64, 64), 255)))
    assert not m.valid and m.diameter == 0 and m.failure == "NoCandidate"


def test_full_blink_invalid():
    f = render_frame(36.0, RenderConfig(pixel_noise_sd=4.0), blink_cover=1.0, seed=1, t=0.0)
    assert not detect_pupil(f).valid


def test_glint_inside_pupil():
    cfg = RenderConfig(pixel_noise_sd=4.0, glint=(4.0, -3.0, 2.5, 250))
    m = detect_pupil(render_frame(36.0, cfg, seed=2))
    assert m.valid and abs(m.diameter - 36.0) <= 0.02 * 36


def test_detection_is_deterministic():
    f = render_frame(33.0, RenderConfig(pixel_noise_sd=8.0), seed=9, t=5.0)
    assert detect_pupil(f) == detect_pupil(f)


@pytest.mark.parametrize("offset", [-20, -10, 0, 10, 20])
def test_brightness_offset_robustness(offset):
    f = render_frame(36.0, RenderConfig(pixel_noise_sd=0.0))
    shifted = make_frame(np.clip(f.pixels.astype(int) + offset, 0, 255))
    base, moved = detect_pupil(f), detect_pupil(shifted)
    assert base.valid and moved.valid
    assert abs(base.diameter - moved.diameter) <= 1.0


@settings(max_examples=25, deadline=None)
@given(st.floats(20, 44), st.floats(-25, 25), st.floats(-12, 12), st.integers(0, 10 ** 6))
def test_center_inside_frame(d, dx, dy, seed):
    cfg = RenderConfig(pixel_noise_sd=6.0, center=(79.5 + dx, 59.5 + dy))
    m = detect_pupil(render_frame(d, cfg, seed=seed))
    if m.valid:
        assert 0 <= m.center_x < cfg.width and 0 <= m.center_y < cfg.height
        assert abs(m.diameter - d) <= max(1.0, 0.02 * d)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(20, 44), st.floats(-40, 40), st.floats(-30, 30))
def test_roi_inside_frame(seed, d, dx, dy):
    cfg = RenderConfig(pixel_noise_sd=6.0, center=(79.5 + dx, 59.5 + dy))
    f = render_frame(d, cfg, seed=seed)
    dc = DetectionConfig()
    blurred = gaussian_blur(f, dc.blur_kernel, dc.sigma)
    roi = locate_darkest_region(coarse_threshold(blurred, dc.coarse_threshold), blurred, dc.roi_margin)
    assert roi.x >= 0 and roi.y >= 0
    assert roi.x + roi.width <= f.width and roi.y + roi.height <= f.height


@pytest.mark.parametrize("d", [9.0, 12.0])
def test_small_pupil_roi_narrower_than_window(d):
    # ROI is about d + 2 * margin wide, below the default 31 px window
    m = detect_pupil(render_frame(d, RenderConfig(pixel_noise_sd=4), seed=1))
    assert m.valid
    assert abs(m.diameter - d) <= 1.0
