"""Synthetic eye sessions with known ground truth.

Pupil dynamics are first-order: after onset latency each stimulus drives
both pupils exponentially toward a constricted target, and after offset
latency they relax back to baseline. An afferent defect scales the drive
coming from the stimulated eye, so it shows up in both pupils.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .detection import Frame
from .errors import EmptyInput, InvalidParameter, NonPositiveMedian
from .protocol import (AnalysisWindow, Eye, LedColor, StimulusProtocol, WindowConfig,
                       stimulation_windows, validate_protocol)
from .scoring import compute_rapd

_EYE_CODE = {Eye.LEFT: 0, Eye.RIGHT: 1}

# relative timestamp precision, shared with the canonical JSON float format
TIME_DIGITS = 6


def canonical_time(t: float) -> float:
    return float(f"{t:.{TIME_DIGITS}g}")


def _default_color_gain():
    return {c: 1.0 for c in LedColor}


@dataclass(frozen=True)
class PlrParams:
    baseline_diameter: float = 6.0  # mm
    constriction_fraction: float = 0.35
    latency_ms: float = 250.0
    tau_constrict_ms: float = 400.0
    tau_redilate_ms: float = 1200.0
    afferent_gain_left: float = 1.0
    afferent_gain_right: float = 1.0
    color_gain: Mapping[LedColor, float] = field(default_factory=_default_color_gain)
    noise_sd_mm: float = 0.0
    hippus_amplitude_mm: float = 0.0
    hippus_freq_hz: float = 0.2

    def __post_init__(self):
        gains = {LedColor.parse(k): float(v) for k, v in dict(self.color_gain).items()}
        for c in LedColor:
            gains.setdefault(c, 1.0)
        object.__setattr__(self, "color_gain", gains)
        if not self.baseline_diameter > 0:
            raise InvalidParameter("baseline_diameter must be > 0")
        if not 0 < self.constriction_fraction < 1:
            raise InvalidParameter("constriction_fraction must lie in (0, 1)")
        if not (self.tau_constrict_ms > 0 and self.tau_redilate_ms > 0):
            raise InvalidParameter("time constants must be > 0")
        if self.latency_ms < 0:
            raise InvalidParameter("latency_ms must be >= 0")
        for name in ("afferent_gain_left", "afferent_gain_right"):
            if not 0 <= getattr(self, name) <= 1:
                raise InvalidParameter(f"{name} must lie in [0, 1]")
        if any(not 0 <= g <= 1 for g in gains.values()):
            raise InvalidParameter("color gains must lie in [0, 1]")
        if self.noise_sd_mm < 0 or self.hippus_amplitude_mm < 0:
            raise InvalidParameter("noise and hippus amplitudes must be >= 0")

    def afferent_gain(self, eye: Eye) -> float:
        return self.afferent_gain_left if eye is Eye.LEFT else self.afferent_gain_right

    def target(self, event) -> float:
        drive = (self.constriction_fraction * event.intensity
                 * self.color_gain[event.color] * self.afferent_gain(event.eye))
        return self.baseline_diameter * (1.0 - drive)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["color_gain"] = {c.value: g for c, g in self.color_gain.items()}
        return d


@dataclass(frozen=True)
class RenderConfig:
    width: int = 160
    height: int = 120
    mm_to_px: float = 6.0
    iris_diameter_mm: float = 12.0
    sclera_level: int = 200
    iris_level: int = 110
    pupil_level: int = 30
    eyelid_level: int = 170
    pixel_noise_sd: float = 4.0
    center: Optional[Tuple[float, float]] = None  # defaults to frame centre
    glint: Optional[Tuple[float, float, float, int]] = None  # (dx, dy, radius, level)

    def __post_init__(self):
        if not self.pupil_level < self.iris_level < self.sclera_level:
            raise InvalidParameter("need pupil_level < iris_level < sclera_level")
        if self.width < 32 or self.height < 32:
            raise InvalidParameter("frames must be at least 32x32")
        if not self.mm_to_px > 0 or self.pixel_noise_sd < 0:
            raise InvalidParameter("mm_to_px must be > 0 and pixel_noise_sd >= 0")

    @property
    def iris_diameter_px(self) -> float:
        return self.iris_diameter_mm * self.mm_to_px

    @property
    def eye_center(self) -> Tuple[float, float]:
        if self.center is not None:
            return self.center
        return (self.width - 1) / 2.0, (self.height - 1) / 2.0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class BlinkSchedule:
    """Eyelid closures per eye as ``(start_ms, duration_ms)`` pairs."""

    left: Tuple[Tuple[float, float], ...] = ()
    right: Tuple[Tuple[float, float], ...] = ()
    ramp_ms: float = 50.0

    def __post_init__(self):
        for name in ("left", "right"):
            spans = tuple(sorted((float(s), float(d)) for s, d in getattr(self, name)))
            object.__setattr__(self, name, spans)
            for (s0, d0), (s1, _) in zip(spans, spans[1:]):
                if s1 < s0 + d0:
                    raise InvalidParameter(f"overlapping blinks for {name} eye")
            if any(d <= 0 for _, d in spans):
                raise InvalidParameter("blink durations must be > 0")

    def for_eye(self, eye: Eye):
        return self.left if eye is Eye.LEFT else self.right

    def cover(self, t: float, eye: Eye) -> float:
        """Eyelid cover fraction at ``t``: linear close, plateau, linear open."""
        for start, dur in self.for_eye(eye):
            if start <= t < start + dur:
                ramp = min(self.ramp_ms, dur / 4.0)
                rel = t - start
                if rel < ramp:
                    return rel / ramp
                if rel > dur - ramp:
                    return (dur - rel) / ramp
                return 1.0
        return 0.0


@dataclass
class GroundTruth:
    timestamps: Dict[Eye, np.ndarray]
    diameter_mm: Dict[Eye, np.ndarray]
    diameter_px: Dict[Eye, np.ndarray]
    windows: List[AnalysisWindow]
    # per-window true direct magnitude; None for degenerate windows
    magnitudes: List[Optional[float]]
    true_score: float


def _segments(params: PlrParams, protocol: StimulusProtocol):
    """Piecewise-constant drive: list of (start, target, tau) after latency shift."""
    lat = params.latency_ms
    segs = [(-math.inf, params.baseline_diameter, params.tau_redilate_ms)]
    for ev in protocol.events:
        segs.append((ev.t_on + lat, params.target(ev), params.tau_constrict_ms))
        segs.append((ev.t_off + lat, params.baseline_diameter, params.tau_redilate_ms))
    return segs


def plr_trace(times, params: PlrParams, protocol: StimulusProtocol, eye: Eye = Eye.LEFT) -> np.ndarray:
    """Noise-free diameters (mm) at an array of times (ms).

    Both eyes share the same drive, so ``eye`` does not change the result;
    it is accepted for symmetry with :func:`plr_diameter`.
    """
    t = np.asarray(times, dtype=np.float64)
    out = np.empty_like(t)
    segs = _segments(params, protocol)
    d0 = params.baseline_diameter
    for k, (start, target, tau) in enumerate(segs):
        stop = segs[k + 1][0] if k + 1 < len(segs) else math.inf
        sel = (t >= start) & (t < stop)
        if k == 0:
            out[sel] = d0
        else:
            out[sel] = target + (d0 - target) * np.exp(-(t[sel] - start) / tau)
        if k + 1 < len(segs):
            d0 = d0 if k == 0 else target + (d0 - target) * math.exp(-(stop - start) / tau)
    if params.hippus_amplitude_mm > 0:
        out = out + params.hippus_amplitude_mm * np.sin(2 * np.pi * params.hippus_freq_hz * t / 1000.0)
    return out


def plr_diameter(t: float, eye: Eye, params: PlrParams, protocol: StimulusProtocol) -> float:
    return float(plr_trace(np.array([t]), params, protocol, eye)[0])


def _noise_rng(seed: int, t: float, eye: Eye, stream: int) -> np.random.Generator:
    # timestamps are canonical to 6 significant digits; microseconds are exact enough
    return np.random.default_rng([int(seed), int(round(t * 1000.0)), _EYE_CODE[eye], stream])


def _coverage(dist: np.ndarray, radius: float) -> np.ndarray:
    return np.clip(radius - dist + 0.5, 0.0, 1.0)


def render_frame(diameter_px: float, render_cfg: RenderConfig = RenderConfig(), blink_cover: float = 0.0,
                 seed: int = 0, t: float = 0.0, eye: Eye = Eye.LEFT) -> Frame:
    """Rasterize sclera, iris, pupil, optional glint and eyelid with seeded pixel noise."""
    cfg = render_cfg
    iris_r = cfg.iris_diameter_px / 2.0
    pupil_r = diameter_px / 2.0
    if not 0 < pupil_r < iris_r:
        raise InvalidParameter(f"pupil diameter {diameter_px:.3f}px must be in (0, iris {2 * iris_r:.3f}px)")
    cx, cy = cfg.eye_center
    yy, xx = np.mgrid[0:cfg.height, 0:cfg.width].astype(np.float64)
    dist = np.hypot(xx - cx, yy - cy)
    img = np.full(dist.shape, float(cfg.sclera_level))
    a_iris = _coverage(dist, iris_r)
    img += a_iris * (cfg.iris_level - img)
    a_pupil = _coverage(dist, pupil_r)
    img += a_pupil * (cfg.pupil_level - img)
    if cfg.glint is not None:
        gdx, gdy, grad, glevel = cfg.glint
        a_glint = _coverage(np.hypot(xx - cx - gdx, yy - cy - gdy), grad)
        img += a_glint * (glevel - img)
    cover = float(np.clip(blink_cover, 0.0, 1.0))
    if cover > 0:
        lid_line = (cy - iris_r) + cover * 2.0 * iris_r
        a_lid = np.clip(lid_line - yy + 0.5, 0.0, 1.0)
        img += a_lid * (cfg.eyelid_level - img)
    if cfg.pixel_noise_sd > 0:
        img += _noise_rng(seed, t, eye, 0).normal(0.0, cfg.pixel_noise_sd, img.shape)
    return Frame(np.clip(np.rint(img), 0, 255).astype(np.uint8), float(t), eye)


def frame_times(session_end: float, frame_rate: float) -> np.ndarray:
    n = int(math.ceil(session_end * frame_rate / 1000.0 - 1e-9))
    return np.array([canonical_time(i * 1000.0 / frame_rate) for i in range(n)])


def _window_grid(start: float, end: float, step: float = 1.0) -> np.ndarray:
    n = int(math.ceil((end - start) / step - 1e-9))
    return start + step * np.arange(max(n, 0))


def true_magnitudes(params: PlrParams, protocol: StimulusProtocol,
                    windows: WindowConfig = WindowConfig()) -> Tuple[List[AnalysisWindow], List[Optional[float]]]:
    """Direct magnitude per window from noise-free dynamics on a 1 ms grid.

    Rest diameter is the mean over the rest interval and the constricted
    diameter the minimum over the constriction interval.
    """
    ws = stimulation_windows(protocol, windows.rest_lead_ms, windows.constriction_tail_ms)
    mags: List[Optional[float]] = []
    for w in ws:
        if w.degenerate:
            mags.append(None)
            continue
        rest = plr_trace(_window_grid(w.rest_start, w.rest_end), params, protocol)
        con = plr_trace(_window_grid(w.constriction_start, w.constriction_end), params, protocol)
        d_rest = float(np.mean(rest))
        mags.append((d_rest - float(np.min(con))) / d_rest * 100.0)
    return ws, mags


def _score_from(ws, mags) -> float:
    right = [m for w, m in zip(ws, mags) if m is not None and w.stimulated_eye is Eye.RIGHT]
    left = [m for w, m in zip(ws, mags) if m is not None and w.stimulated_eye is Eye.LEFT]
    return compute_rapd(right, left)


def expected_rapd(params: PlrParams, protocol: StimulusProtocol,
                  windows: WindowConfig = WindowConfig()) -> float:
    """Score implied by the noise-free dynamics; the oracle for end-to-end checks."""
    ws, mags = true_magnitudes(params, protocol, windows)
    return _score_from(ws, mags)


@dataclass
class SimulatedSession:
    session_id: str
    protocol: StimulusProtocol
    frame_rate: float
    frames: Dict[Eye, List[Frame]]
    ground_truth: GroundTruth
    params: PlrParams
    render_cfg: RenderConfig
    blinks: BlinkSchedule
    seed: int
    subject: Dict[str, str] = field(default_factory=dict)


def simulate_session(protocol: StimulusProtocol, params: PlrParams = PlrParams(),
                     render_cfg: RenderConfig = RenderConfig(), blinks: BlinkSchedule = BlinkSchedule(),
                     frame_rate: float = 30.0, seed: int = 0, lowpass_cutoff: float = 4.0,
                     windows: WindowConfig = WindowConfig(), session_id: Optional[str] = None,
                     render: bool = True) -> SimulatedSession:
    """Render both eyes over ``[0, session_end)`` at ``frame_rate``.

    With ``render=False`` only the ground truth is computed and the frame
    lists are empty.
    """
    if not frame_rate > 0 or frame_rate < 2 * lowpass_cutoff:
        raise InvalidParameter(f"frame_rate {frame_rate} must be >= 2 x lowpass cutoff {lowpass_cutoff}")
    problems = validate_protocol(protocol)
    if problems:
        raise InvalidParameter(f"invalid protocol: {problems[0].kind} at event {problems[0].index}")
    times = frame_times(protocol.session_end, frame_rate)
    clean = plr_trace(times, params, protocol)
    ws, mags = true_magnitudes(params, protocol, windows)
    try:
        score = _score_from(ws, mags)
    except (EmptyInput, NonPositiveMedian):
        # no defined score; expected_rapd raises the same error on demand
        score = float("nan")
    gt = GroundTruth(timestamps={e: times.copy() for e in Eye},
                     diameter_mm={e: clean.copy() for e in Eye},
                     diameter_px={e: clean * render_cfg.mm_to_px for e in Eye},
                     windows=ws, magnitudes=mags, true_score=score)
    frames: Dict[Eye, List[Frame]] = {Eye.LEFT: [], Eye.RIGHT: []}
    if render:
        for eye in (Eye.RIGHT, Eye.LEFT):
            for t, d_mm in zip(times, clean):
                d = d_mm
                if params.noise_sd_mm > 0:
                    d = d + _noise_rng(seed, t, eye, 1).normal(0.0, params.noise_sd_mm)
                frames[eye].append(render_frame(d * render_cfg.mm_to_px, render_cfg,
                                                blinks.cover(t, eye), seed, t, eye))
    sid = session_id or f"sim-{seed}"
    return SimulatedSession(sid, protocol, float(frame_rate), frames, gt, params, render_cfg, blinks, int(seed))
