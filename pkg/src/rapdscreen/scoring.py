"""RAPD score from per-eye constriction magnitudes, and its classification."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import EmptyInput, InsufficientData, NonPositiveMedian

NEGATIVE_BELOW = 0.5
POSITIVE_ABOVE = 1.0


class Classification(str, enum.Enum):
    NEGATIVE = "Negative"
    INDETERMINATE = "Indeterminate"
    POSITIVE = "Positive"


class DefectSide(str, enum.Enum):
    NONE = "None"
    LEFT = "Left"
    RIGHT = "Right"


def median(values: Sequence[float]) -> float:
    vals = sorted(float(v) for v in values)
    n = len(vals)
    if n == 0:
        raise EmptyInput("median of an empty list")
    mid = n // 2
    if n % 2:
        return vals[mid]
    return (vals[mid - 1] + vals[mid]) / 2.0


def score_from_medians(median_right: float, median_left: float) -> float:
    for side, m in (("right", median_right), ("left", median_left)):
        if not m > 0:
            raise NonPositiveMedian(f"{side} median magnitude is {m:.6g}; the log ratio is undefined")
    return 10.0 * math.log10(median_right / median_left)


def compute_rapd(magnitudes_right: Sequence[float], magnitudes_left: Sequence[float]) -> float:
    """``10 * log10(median(right) / median(left))``.

    Raises ``EmptyInput`` if either list is empty and ``NonPositiveMedian``
    if either median is not strictly positive.
    """
    if len(magnitudes_right) == 0:
        raise EmptyInput("no usable magnitudes for right-eye stimulation")
    if len(magnitudes_left) == 0:
        raise EmptyInput("no usable magnitudes for left-eye stimulation")
    return score_from_medians(median(magnitudes_right), median(magnitudes_left))


def classify(score: float) -> Tuple[Classification, DefectSide]:
    """Bucket ``|score|``; the boundaries 0.5 and 1.0 are Indeterminate.

    A positive score means the right eye responds more, so the weaker
    afferent pathway is on the left.
    """
    if not math.isfinite(score):
        raise ValueError(f"score must be finite, got {score}")
    mag = abs(score)
    if mag < NEGATIVE_BELOW:
        return Classification.NEGATIVE, DefectSide.NONE
    if mag > POSITIVE_ABOVE:
        return Classification.POSITIVE, DefectSide.LEFT if score > 0 else DefectSide.RIGHT
    return Classification.INDETERMINATE, DefectSide.NONE


@dataclass(frozen=True)
class WindowScore:
    event_index: int
    stimulated_eye: str
    color: str
    t_on: float
    t_off: float
    direct: Optional[float]
    consensual: Optional[float]
    skipped: Optional[str] = None  # reason when the window did not feed the score


@dataclass(frozen=True)
class RapdResult:
    magnitudes_right: Tuple[float, ...]
    magnitudes_left: Tuple[float, ...]
    median_right: float
    median_left: float
    score: float
    classification: Classification
    defect_side: DefectSide
    windows: Tuple[WindowScore, ...] = ()

    @classmethod
    def from_magnitudes(cls, right: Sequence[float], left: Sequence[float],
                        windows: Sequence[WindowScore] = ()) -> "RapdResult":
        score = compute_rapd(right, left)
        label, side = classify(score)
        return cls(tuple(right), tuple(left), median(right), median(left), score, label, side, tuple(windows))

    @property
    def skipped(self) -> List[WindowScore]:
        return [w for w in self.windows if w.skipped]


def score_session(traces, protocol, window_cfg=None) -> RapdResult:
    """Score processed per-eye traces against a stimulus protocol.

    ``traces`` maps each :class:`~rapdscreen.protocol.Eye` to its processed
    trace. Each window contributes the stimulated eye's own (direct)
    magnitude; the fellow eye's consensual magnitude is recorded but not
    scored. Degenerate windows and windows lacking data are skipped.
    """
    from .protocol import Eye, WindowConfig, stimulation_windows
    from .trace import magnitude_for_window

    window_cfg = window_cfg or WindowConfig()
    ws = stimulation_windows(protocol, window_cfg.rest_lead_ms, window_cfg.constriction_tail_ms)
    right: List[float] = []
    left: List[float] = []
    records = []
    for w in ws:
        ev = protocol.events[w.event_index]
        skipped = None
        direct = consensual = None
        if w.degenerate:
            skipped = "DegenerateRestWindow"
        else:
            try:
                direct = magnitude_for_window(traces[w.stimulated_eye], w)
            except InsufficientData as exc:
                skipped = f"InsufficientData({exc.interval})"
            try:
                consensual = magnitude_for_window(traces[w.stimulated_eye.other], w)
            except InsufficientData:
                consensual = None
        if direct is not None:
            (right if w.stimulated_eye is Eye.RIGHT else left).append(direct)
        records.append(WindowScore(w.event_index, w.stimulated_eye.value, ev.color.value,
                                   ev.t_on, ev.t_off, direct, consensual, skipped))
    try:
        return RapdResult.from_magnitudes(right, left, records)
    except (EmptyInput, NonPositiveMedian) as exc:
        exc.windows = tuple(records)
        raise
