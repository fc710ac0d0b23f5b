import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rapdscreen.detection import coarse_threshold, detect_pupil
from rapdscreen.errors import InvalidParameter, NonPositiveMedian
from rapdscreen.protocol import Eye, LedColor, build_swinging_protocol
from rapdscreen.simulator import (BlinkSchedule, PlrParams, RenderConfig, expected_rapd, frame_times,
                                  plr_diameter, plr_trace, render_frame, simulate_session,
                                  true_magnitudes)


def euler_trace(params, protocol, t_end, dt=1.0):
    """Forward-Euler integration of dD/dt = (target(t) - D) / tau(t)."""
    lat = params.latency_ms
    ts = np.arange(0.0, t_end, dt)
    out = np.empty_like(ts)
    d = params.baseline_diameter
    for i, t in enumerate(ts):
        out[i] = d
        target, tau = params.baseline_diameter, params.tau_redilate_ms
        for ev in protocol.events:
            if ev.t_on + lat <= t < ev.t_off + lat:
                target, tau = params.target(ev), params.tau_constrict_ms
        d = d + dt * (target - d) / tau
    return ts, out


def test_baseline_before_onset():
    p = build_swinging_protocol(1, 1000, 1000)
    params = PlrParams()
    for t in (0.0, 100.0, 249.9):
        assert plr_diameter(t, Eye.LEFT, params, p) == params.baseline_diameter


def test_asymptote_of_long_stimulus():
    p = build_swinging_protocol(1, 20000, 1000)
    params = PlrParams()
    d = plr_diameter(19999.0, Eye.RIGHT, params, p)
    assert d == pytest.approx(6.0 * (1 - 0.35), rel=1e-3)


def test_matches_euler_integration():
    p = build_swinging_protocol(2, 1500, 1000)
    params = PlrParams(afferent_gain_left=0.6)
    ts, ref = euler_trace(params, p, p.session_end, dt=1.0)
    got = plr_trace(ts, params, p)
    assert np.max(np.abs(got - ref)) < 0.01


def test_eyes_identical_and_hippus_additive():
    p = build_swinging_protocol(2, 1000, 1000)
    ts = np.arange(0, 8000, 7.0)
    params = PlrParams(afferent_gain_right=0.7)
    assert np.array_equal(plr_trace(ts, params, p, Eye.LEFT), plr_trace(ts, params, p, Eye.RIGHT))
    wobble = PlrParams(afferent_gain_right=0.7, hippus_amplitude_mm=0.1, hippus_freq_hz=0.5)
    diff = plr_trace(ts, wobble, p) - plr_trace(ts, params, p)
    np.testing.assert_allclose(diff, 0.1 * np.sin(2 * np.pi * 0.5 * ts / 1000), atol=1e-12)


def test_render_full_blink_hides_pupil():
    cfg = RenderConfig(pixel_noise_sd=8.0)
    f = render_frame(36.0, cfg, blink_cover=1.0, seed=3)
    cx, cy = cfg.eye_center
    yy, xx = np.mgrid[0:cfg.height, 0:cfg.width]
    iris = np.hypot(xx - cx, yy - cy) <= cfg.iris_diameter_px / 2
    assert not (coarse_threshold(f, 60) & iris).any()


def test_render_round_trip_noise_free():
    m = detect_pupil(render_frame(40.0, RenderConfig(pixel_noise_sd=0.0)))
    assert m.valid and abs(m.diameter - 40.0) <= 1.0


def test_render_deterministic_and_seeded():
    cfg = RenderConfig(pixel_noise_sd=8.0)
    a = render_frame(30.0, cfg, 0.0, seed=5, t=33.3333, eye=Eye.RIGHT)
    b = render_frame(30.0, cfg, 0.0, seed=5, t=33.3333, eye=Eye.RIGHT)
    assert np.array_equal(a.pixels, b.pixels)
    for other in (dict(seed=6, t=33.3333, eye=Eye.RIGHT), dict(seed=5, t=66.6667, eye=Eye.RIGHT),
                  dict(seed=5, t=33.3333, eye=Eye.LEFT)):
        assert not np.array_equal(a.pixels, render_frame(30.0, cfg, 0.0, **other).pixels)


def test_render_rejects_pupil_larger_than_iris():
    with pytest.raises(InvalidParameter):
        render_frame(80.0, RenderConfig())


def test_render_config_levels_ordered():
    with pytest.raises(InvalidParameter):
        RenderConfig(pupil_level=150)


def test_blink_profile():
    b = BlinkSchedule(left=[(1000, 400)], ramp_ms=50)
    assert b.cover(999, Eye.LEFT) == 0 and b.cover(1025, Eye.LEFT) == pytest.approx(0.5)
    assert b.cover(1200, Eye.LEFT) == 1 and b.cover(1200, Eye.RIGHT) == 0
    with pytest.raises(InvalidParameter):
        BlinkSchedule(right=[(0, 500), (400, 100)])


def test_session_frame_count_and_spacing():
    p = build_swinging_protocol(2, 500, 500)
    sim = simulate_session(p, frame_rate=30, seed=1)
    assert p.session_end == 4000
    for eye in Eye:
        ts = [f.timestamp for f in sim.frames[eye]]
        assert len(ts) == 120
        np.testing.assert_allclose(np.diff(ts), 1000 / 30, atol=0.01)
    with pytest.raises(InvalidParameter):
        simulate_session(p, frame_rate=6, render=False)


def test_symmetric_true_score_exactly_zero():
    # off periods long enough that every stimulus starts from an exact baseline
    p = build_swinging_protocol(3, 2000, 60000)
    sim = simulate_session(p, PlrParams(), frame_rate=30, render=False)
    assert sim.ground_truth.true_score == 0.0
    assert expected_rapd(PlrParams(), p) == 0.0


def test_half_gain_right():
    p = build_swinging_protocol(3, 4000, 60000)
    params = PlrParams(afferent_gain_right=0.5)
    ws, mags = true_magnitudes(params, p)
    right = [m for w, m in zip(ws, mags) if m is not None and w.stimulated_eye is Eye.RIGHT]
    left = [m for w, m in zip(ws, mags) if m is not None and w.stimulated_eye is Eye.LEFT]
    # asymptotes: 0.35*0.5 vs 0.35 of baseline, less the exp(-3.75/0.4) remainder
    assert np.median(right) / np.median(left) == pytest.approx(0.5, rel=1e-3)
    assert expected_rapd(params, p) == pytest.approx(10 * math.log10(0.5), abs=0.01)


def test_left_gain_point_eight():
    p = build_swinging_protocol(3, 4000, 60000)
    assert expected_rapd(PlrParams(afferent_gain_left=0.8), p) == pytest.approx(0.969, abs=0.01)


def test_zero_gain_raises():
    with pytest.raises(NonPositiveMedian):
        expected_rapd(PlrParams(afferent_gain_left=0.0), build_swinging_protocol(3, 2000, 3000))


def test_param_validation():
    for bad in (dict(baseline_diameter=0), dict(tau_constrict_ms=0), dict(afferent_gain_left=1.5),
                dict(constriction_fraction=1.0), dict(color_gain={"B": 2.0})):
        with pytest.raises(InvalidParameter):
            PlrParams(**bad)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(0.0, 0.95))
def test_gain_monotonicity(gain, drop):
    p = build_swinging_protocol(2, 1500, 2000)
    ws, hi = true_magnitudes(PlrParams(afferent_gain_left=gain), p)
    _, lo = true_magnitudes(PlrParams(afferent_gain_left=gain * (1 - drop)), p)
    for w, a, b in zip(ws, hi, lo):
        if a is not None and w.stimulated_eye is Eye.LEFT:
            assert b <= a + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 1.0), st.floats(0.1, 1.0), st.floats(0.1, 1.0), st.sampled_from(list(LedColor)))
def test_asymptotic_magnitude(gain, intensity, color_gain, color):
    params = PlrParams(afferent_gain_right=gain, color_gain={color: color_gain})
    # on-duration 5 tau plus latency, off-duration long enough to fully redilate
    p = build_swinging_protocol(2, 5 * 400 + 250 + 300, 60000, color, intensity)
    ws, mags = true_magnitudes(params, p)
    expect = 35.0 * intensity * color_gain * gain
    for w, m in zip(ws, mags):
        if m is not None and w.stimulated_eye is Eye.RIGHT:
            assert m == pytest.approx(expect, rel=0.01)


def test_session_deterministic():
    p = build_swinging_protocol(1, 500, 500)
    kw = dict(params=PlrParams(noise_sd_mm=0.02), render_cfg=RenderConfig(pixel_noise_sd=5),
              blinks=BlinkSchedule(left=[(300, 200)]), frame_rate=20, seed=11)
    a, b = simulate_session(p, **kw), simulate_session(p, **kw)
    for eye in Eye:
        assert all(np.array_equal(x.pixels, y.pixels) for x, y in zip(a.frames[eye], b.frames[eye]))
    assert a.ground_truth.magnitudes == b.ground_truth.magnitudes


def test_frame_times_exclusive_end():
    assert len(frame_times(4000, 30)) == 120
    assert len(frame_times(4010, 30)) == 121
