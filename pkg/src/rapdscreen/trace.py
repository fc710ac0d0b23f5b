"""Per-eye diameter traces: assembly, blink rejection, gap filling, smoothing.

Traces are immutable; every operation returns a new one. The intended
order is ``flag_artifacts -> interpolate_gaps -> low_pass``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import DuplicateTimestamp, InsufficientData, InvalidParameter, TooSparse
from .protocol import AnalysisWindow, Eye


def _frozen(a, dtype) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class DiameterTrace:
    eye: Eye
    timestamps: np.ndarray
    diameters: np.ndarray
    valid: np.ndarray
    nominal_rate: float
    interpolated: np.ndarray = None
    stage: str = "raw"  # raw | flagged | interpolated | filtered

    def __post_init__(self):
        object.__setattr__(self, "timestamps", _frozen(self.timestamps, np.float64))
        object.__setattr__(self, "diameters", _frozen(self.diameters, np.float64))
        object.__setattr__(self, "valid", _frozen(self.valid, bool))
        interp = np.zeros(len(self.timestamps), bool) if self.interpolated is None else self.interpolated
        object.__setattr__(self, "interpolated", _frozen(interp, bool))
        n = len(self.timestamps)
        if not (len(self.diameters) == len(self.valid) == len(self.interpolated) == n):
            raise InvalidParameter("trace arrays differ in length")
        if n > 1 and not np.all(np.diff(self.timestamps) > 0):
            raise InvalidParameter("trace timestamps must be strictly increasing")
        if np.any(self.valid & ~(self.diameters > 0)):
            raise InvalidParameter("valid samples must have positive diameter")

    def __len__(self):
        return len(self.timestamps)

    def evolve(self, **changes) -> "DiameterTrace":
        return replace(self, **changes)

    def scaled(self, c: float) -> "DiameterTrace":
        return self.evolve(diameters=self.diameters * c)

    @property
    def valid_fraction(self) -> float:
        return float(self.valid.mean()) if len(self) else 0.0

    def equals(self, other: "DiameterTrace") -> bool:
        return (self.eye is other.eye and self.stage == other.stage
                and self.nominal_rate == other.nominal_rate
                and np.array_equal(self.timestamps, other.timestamps)
                and np.array_equal(self.diameters, other.diameters)
                and np.array_equal(self.valid, other.valid)
                and np.array_equal(self.interpolated, other.interpolated))


@dataclass(frozen=True)
class TraceConfig:
    max_jump_fraction: float = 0.25
    lowpass_cutoff: float = 4.0  # Hz
    max_gap_ms: float = 800.0
    relock_samples: int = 5

    def __post_init__(self):
        if not self.max_jump_fraction > 0:
            raise InvalidParameter("max_jump_fraction must be > 0")
        if not self.lowpass_cutoff > 0:
            raise InvalidParameter("lowpass_cutoff must be > 0")
        if not self.max_gap_ms > 0:
            raise InvalidParameter("max_gap_ms must be > 0")
        if int(self.relock_samples) != self.relock_samples or self.relock_samples < 2:
            raise InvalidParameter("relock_samples must be an integer >= 2")

    def to_dict(self) -> dict:
        return asdict(self)


def assemble_trace(measurements: Iterable, eye: Eye, nominal_rate: float = 30.0) -> DiameterTrace:
    """Sort measurements by time into a raw trace; invalid ones are kept, flagged."""
    ms = sorted(measurements, key=lambda m: m.timestamp)
    for m in ms:
        if m.eye is not eye:
            raise InvalidParameter(f"measurement at t={m.timestamp} belongs to eye {m.eye.value}, not {eye.value}")
    for a, b in zip(ms, ms[1:]):
        if a.timestamp == b.timestamp:
            raise DuplicateTimestamp(f"two {eye.value} measurements at t={a.timestamp}")
    return DiameterTrace(
        eye=eye,
        timestamps=[m.timestamp for m in ms],
        diameters=[m.diameter if m.valid else 0.0 for m in ms],
        valid=[bool(m.valid) and m.diameter > 0 for m in ms],
        nominal_rate=float(nominal_rate),
    )


def flag_artifacts(trace: DiameterTrace, cfg: TraceConfig = TraceConfig()) -> DiameterTrace:
    """Invalidate samples that jump more than ``max_jump_fraction`` from the last accepted one.

    If ``relock_samples`` consecutive rejected samples agree with each other
    under the same rule, the last of them becomes the new reference. They
    stay flagged, but a genuine level change across a long gap does not
    lock out the rest of the trace.
    """
    valid = trace.valid.copy()
    d = trace.diameters
    frac = cfg.max_jump_fraction
    ref = None
    run = []
    for i in range(len(trace)):
        if not valid[i]:
            continue
        if ref is None or abs(d[i] - ref) <= frac * ref:
            ref = d[i]
            run = []
            continue
        valid[i] = False
        if run and abs(d[i] - d[run[-1]]) <= frac * d[run[-1]]:
            run.append(i)
        else:
            run = [i]
        if len(run) >= cfg.relock_samples:
            ref = d[i]
            run = []
    return trace.evolve(valid=valid, stage="flagged")


def interpolate_gaps(trace: DiameterTrace, cfg: TraceConfig = TraceConfig()) -> DiameterTrace:
    """Linearly bridge invalid runs whose valid neighbours are < ``max_gap_ms`` apart.

    Leading and trailing invalid runs, and longer gaps, stay invalid.
    """
    idx = np.flatnonzero(trace.valid)
    if len(idx) < 2:
        raise TooSparse(f"{trace.eye.value} trace has {len(idx)} valid samples; need at least 2")
    t = trace.timestamps
    d = trace.diameters.copy()
    valid = trace.valid.copy()
    interp = trace.interpolated.copy()
    for a, b in zip(idx, idx[1:]):
        if b - a < 2 or t[b] - t[a] >= cfg.max_gap_ms:
            continue
        run = slice(a + 1, b)
        frac = (t[run] - t[a]) / (t[b] - t[a])
        d[run] = d[a] + frac * (d[b] - d[a])
        valid[run] = True
        interp[run] = True
    return trace.evolve(diameters=d, valid=valid, interpolated=interp, stage="interpolated")


def lowpass_kernel(rate: float, cutoff: float) -> np.ndarray:
    """Hamming-windowed sinc taps normalized to unit DC gain.

    Length is ``ceil(2 * rate / cutoff)`` rounded up to odd.
    """
    if not cutoff < rate / 2.0:
        raise InvalidParameter(f"cutoff {cutoff} Hz must be below Nyquist {rate / 2.0} Hz")
    n = int(math.ceil(2.0 * rate / cutoff))
    if n % 2 == 0:
        n += 1
    m = np.arange(n) - (n - 1) / 2.0
    h = np.sinc(2.0 * cutoff / rate * m) * np.hamming(n)
    return h / h.sum()


def _causal(x: np.ndarray, h: np.ndarray) -> np.ndarray:
    return np.convolve(x, h)[:len(x)]


def zero_phase_filter(x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Forward causal pass, then the same causal pass over the reversed signal.

    The signal is edge-replicated on both sides for long enough that the
    start-up transients of both passes fall in the padding.
    """
    pad = 2 * (len(h) - 1)
    xp = np.pad(np.asarray(x, dtype=np.float64), pad, mode="edge")
    y = _causal(xp, h)
    y = _causal(y[::-1], h)[::-1]
    return y[pad:pad + len(x)]


def low_pass(trace: DiameterTrace, cfg: TraceConfig = TraceConfig()) -> DiameterTrace:
    """Zero-phase low-pass filter each contiguous run of valid samples.

    Samples still invalid after interpolation (over-long gaps) are left
    untouched and stay invalid; filtering never crosses them.
    """
    rate = trace.nominal_rate
    h = lowpass_kernel(rate, cfg.lowpass_cutoff)
    if len(trace) > 1:
        dt = np.diff(trace.timestamps)
        nominal = 1000.0 / rate
        if np.any(np.abs(dt - nominal) > 0.1 * nominal):
            raise InvalidParameter(f"{trace.eye.value} trace is not uniformly sampled at {rate} Hz")
    d = trace.diameters.copy()
    v = trace.valid
    edges = np.flatnonzero(np.diff(np.concatenate([[0], v.astype(np.int8), [0]])))
    for start, stop in zip(edges[::2], edges[1::2]):
        d[start:stop] = zero_phase_filter(trace.diameters[start:stop], h)
    return trace.evolve(diameters=d, stage="filtered")


def process_trace(trace: DiameterTrace, cfg: TraceConfig = TraceConfig()):
    """Run flag -> interpolate -> low-pass, returning all four stages."""
    flagged = flag_artifacts(trace, cfg)
    interpolated = interpolate_gaps(flagged, cfg)
    filtered = low_pass(interpolated, cfg)
    return {"raw": trace, "flagged": flagged, "interpolated": interpolated, "filtered": filtered}


def _interval(trace: DiameterTrace, start: float, end: float) -> np.ndarray:
    t = trace.timestamps
    sel = (t >= start) & (t < end) & trace.valid
    return trace.diameters[sel]


def magnitude_for_window(trace: DiameterTrace, window: AnalysisWindow) -> float:
    """Percent constriction: ``(D_rest - D_constricted) / D_rest * 100``.

    D_rest is the mean valid diameter in the rest interval and D_constricted
    the minimum valid diameter in the constriction interval.
    """
    rest = _interval(trace, window.rest_start, window.rest_end)
    if rest.size == 0:
        raise InsufficientData(f"no valid {trace.eye.value} samples in rest interval "
                               f"[{window.rest_start:g}, {window.rest_end:g})", "rest")
    con = _interval(trace, window.constriction_start, window.constriction_end)
    if con.size == 0:
        raise InsufficientData(f"no valid {trace.eye.value} samples in constriction interval "
                               f"[{window.constriction_start:g}, {window.constriction_end:g})", "constriction")
    d_rest = float(np.mean(rest))
    return (d_rest - float(np.min(con))) / d_rest * 100.0


def magnitude(d_rest: float, d_constricted: float) -> float:
    return (d_rest - d_constricted) / d_rest * 100.0
