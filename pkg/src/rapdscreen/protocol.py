"""Swinging-light stimulus schedules and the analysis windows they imply."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import List, Sequence, Tuple

from .errors import InvalidParameter


class Eye(str, enum.Enum):
    LEFT = "L"
    RIGHT = "R"

    @property
    def other(self) -> "Eye":
        return Eye.RIGHT if self is Eye.LEFT else Eye.LEFT


class LedColor(str, enum.Enum):
    RED = "R"
    GREEN = "G"
    BLUE = "B"
    WHITE = "W"

    @classmethod
    def parse(cls, value) -> "LedColor":
        if isinstance(value, cls):
            return value
        text = str(value).strip().upper()
        names = {"RED": "R", "GREEN": "G", "BLUE": "B", "WHITE": "W"}
        text = names.get(text, text)
        try:
            return cls(text)
        except ValueError:
            raise InvalidParameter(f"unknown LED color {value!r}") from None


def parse_eye(value) -> Eye:
    if isinstance(value, Eye):
        return value
    text = str(value).strip().upper()
    text = {"LEFT": "L", "RIGHT": "R"}.get(text, text)
    try:
        return Eye(text)
    except ValueError:
        raise InvalidParameter(f"unknown eye {value!r}") from None


@dataclass(frozen=True)
class StimulusEvent:
    eye: Eye
    color: LedColor
    intensity: float
    t_on: float
    t_off: float

    @property
    def duration(self) -> float:
        return self.t_off - self.t_on

    def shifted(self, dt: float) -> "StimulusEvent":
        return replace(self, t_on=self.t_on + dt, t_off=self.t_off + dt)


@dataclass(frozen=True)
class StimulusProtocol:
    """Ordered, non-overlapping light events. Times are in milliseconds."""

    events: Tuple[StimulusEvent, ...]
    session_end: float

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))

    def shifted(self, dt: float) -> "StimulusProtocol":
        return StimulusProtocol(tuple(e.shifted(dt) for e in self.events),
                                self.session_end + dt)


@dataclass(frozen=True)
class Violation:
    kind: str  # Unsorted | Overlap | EmptyEvent | IntensityRange | NegativeTime | SessionEnd
    index: int
    detail: str = ""


@dataclass(frozen=True)
class AnalysisWindow:
    stimulated_eye: Eye
    rest_start: float
    rest_end: float
    constriction_start: float
    constriction_end: float
    event_index: int = 0
    degenerate: bool = False


@dataclass(frozen=True)
class WindowConfig:
    rest_lead_ms: float = 500.0
    constriction_tail_ms: float = 300.0

    def __post_init__(self):
        if not self.rest_lead_ms > 0:
            raise InvalidParameter("rest_lead_ms must be > 0")
        if not self.constriction_tail_ms > 0:
            raise InvalidParameter("constriction_tail_ms must be > 0")


def build_swinging_protocol(cycles: int, on_ms: float, off_ms: float = 1000.0,
                            color=LedColor.WHITE, intensity: float = 1.0) -> StimulusProtocol:
    """Alternate Right, Left, Right, ... with a dark gap after every event.

    Event ``i`` starts at ``i * (on_ms + off_ms)`` and the session ends one
    full period after the last event starts.
    """
    if int(cycles) != cycles or cycles < 1:
        raise InvalidParameter(f"cycles must be a positive integer, got {cycles!r}")
    if not on_ms > 0 or not off_ms > 0:
        raise InvalidParameter("on_ms and off_ms must be > 0")
    if not 0.0 <= intensity <= 1.0:
        raise InvalidParameter("intensity must lie in [0, 1]")
    color = LedColor.parse(color)
    period = on_ms + off_ms
    events = []
    for i in range(2 * int(cycles)):
        eye = Eye.RIGHT if i % 2 == 0 else Eye.LEFT
        t_on = i * period
        events.append(StimulusEvent(eye, color, float(intensity), float(t_on), float(t_on + on_ms)))
    return StimulusProtocol(tuple(events), float(2 * cycles * period))


def validate_protocol(p: StimulusProtocol) -> List[Violation]:
    """Return every invariant violation; an empty list means the protocol is valid."""
    out: List[Violation] = []
    for i, ev in enumerate(p.events):
        if ev.t_on < 0:
            out.append(Violation("NegativeTime", i, f"t_on={ev.t_on}"))
        if not ev.t_off > ev.t_on:
            out.append(Violation("EmptyEvent", i, f"t_on={ev.t_on} t_off={ev.t_off}"))
        if not 0.0 <= ev.intensity <= 1.0:
            out.append(Violation("IntensityRange", i, f"intensity={ev.intensity}"))
        if i > 0:
            prev = p.events[i - 1]
            if ev.t_on < prev.t_on:
                out.append(Violation("Unsorted", i, f"t_on={ev.t_on} < {prev.t_on}"))
            elif ev.t_on < prev.t_off:
                out.append(Violation("Overlap", i, f"starts {ev.t_on} before event {i - 1} ends {prev.t_off}"))
    if p.events:
        last = max(e.t_off for e in p.events)
        if p.session_end < last:
            out.append(Violation("SessionEnd", len(p.events) - 1,
                                 f"session_end={p.session_end} < {last}"))
    return out


def stimulation_windows(p: StimulusProtocol, rest_lead_ms: float = 500.0,
                        constriction_tail_ms: float = 300.0) -> List[AnalysisWindow]:
    """One rest/constriction window pair per event.

    Rest is ``[t_on - rest_lead_ms, t_on)`` clamped at zero. Constriction is
    the end-anchored ``[t_off - constriction_tail_ms, t_off)``. A rest window
    that clamps to zero length is flagged ``degenerate``.
    """
    WindowConfig(rest_lead_ms, constriction_tail_ms)
    problems = validate_protocol(p)
    if problems:
        raise InvalidParameter(f"invalid protocol: {problems[0].kind} at event {problems[0].index}")
    windows = []
    for i, ev in enumerate(p.events):
        if constriction_tail_ms > ev.duration:
            raise InvalidParameter(
                f"constriction_tail_ms={constriction_tail_ms} exceeds on-duration {ev.duration} of event {i}")
        rest_start = max(0.0, ev.t_on - rest_lead_ms)
        windows.append(AnalysisWindow(
            stimulated_eye=ev.eye,
            rest_start=rest_start,
            rest_end=ev.t_on,
            constriction_start=ev.t_off - constriction_tail_ms,
            constriction_end=ev.t_off,
            event_index=i,
            degenerate=ev.t_on - rest_start <= 0,
        ))
    return windows


def protocol_to_json(p: StimulusProtocol) -> list:
    return [{"eye": e.eye.value, "color": e.color.value, "intensity": e.intensity,
             "t_on_ms": e.t_on, "t_off_ms": e.t_off} for e in p.events]


def protocol_from_json(events: Sequence[dict], session_end: float) -> StimulusProtocol:
    try:
        evs = tuple(StimulusEvent(parse_eye(d["eye"]), LedColor.parse(d["color"]),
                                  float(d["intensity"]), float(d["t_on_ms"]), float(d["t_off_ms"]))
                    for d in events)
    except (KeyError, TypeError) as exc:
        raise InvalidParameter(f"malformed protocol event: {exc}") from None
    return StimulusProtocol(evs, float(session_end))
