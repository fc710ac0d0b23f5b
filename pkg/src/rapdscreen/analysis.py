"""End-to-end analysis of a recorded session into a results report."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional

from .detection import DetectionConfig, PupilMeasurement, detect_pupil
from .errors import AnalysisError, EmptyInput, InvalidParameter, NonPositiveMedian, TooSparse
from .protocol import Eye, WindowConfig
from .scoring import RapdResult, score_session
from .session_io import SCHEMA_VERSION
from .trace import DiameterTrace, TraceConfig, assemble_trace, process_trace


@dataclass
class AnalysisConfig:
    detection: DetectionConfig = DetectionConfig()
    trace: TraceConfig = TraceConfig()
    windows: WindowConfig = WindowConfig()

    def to_dict(self) -> dict:
        return {
            "detection": self.detection.to_dict(),
            "trace": self.trace.to_dict(),
            "windows": {"rest_lead_ms": self.windows.rest_lead_ms,
                        "constriction_tail_ms": self.windows.constriction_tail_ms},
        }

    @classmethod
    def from_dict(cls, d: Optional[dict]) -> "AnalysisConfig":
        d = d or {}
        unknown = set(d) - {"detection", "trace", "windows"}
        if unknown:
            raise InvalidParameter(f"unknown config sections: {sorted(unknown)}")
        try:
            return cls(DetectionConfig(**d.get("detection", {})), TraceConfig(**d.get("trace", {})),
                       WindowConfig(**d.get("windows", {})))
        except TypeError as exc:
            raise InvalidParameter(f"bad config: {exc}") from None


@dataclass
class Analysis:
    session_id: str
    config: AnalysisConfig
    measurements: Dict[Eye, List[PupilMeasurement]]
    stages: Dict[Eye, Dict[str, DiameterTrace]]
    result: RapdResult
    protocol: object

    @property
    def traces(self) -> Dict[Eye, DiameterTrace]:
        return {eye: s["filtered"] for eye, s in self.stages.items()}

    def report(self) -> dict:
        return build_report(self)


def detect_all(session, eye: Eye, cfg: DetectionConfig) -> List[PupilMeasurement]:
    return [detect_pupil(fr, cfg) for fr in session.iter_frames(eye)]


def analyze(session, config: AnalysisConfig = None, workers: int = 2) -> Analysis:
    """Detect pupils in every frame, process both traces and score the session.

    The two eyes are detected on separate worker threads when ``workers > 1``;
    each eye's measurements keep frame order, so results match a sequential
    run exactly.
    """
    config = config or AnalysisConfig()
    eyes = (Eye.RIGHT, Eye.LEFT)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=min(workers, 2)) as pool:
            measured = dict(zip(eyes, pool.map(lambda e: detect_all(session, e, config.detection), eyes)))
    else:
        measured = {e: detect_all(session, e, config.detection) for e in eyes}
    stages = {}
    for eye in eyes:
        raw = assemble_trace(measured[eye], eye, session.frame_rate)
        try:
            stages[eye] = process_trace(raw, config.trace)
        except TooSparse as exc:
            raise TooSparse(f"eye {eye.value}: {exc}; zero usable windows") from None
    try:
        result = score_session({e: stages[e]["filtered"] for e in eyes}, session.protocol, config.windows)
    except (EmptyInput, NonPositiveMedian) as exc:
        skipped = [f"event {w.event_index} ({w.stimulated_eye}): {w.skipped}"
                   for w in getattr(exc, "windows", ()) if w.skipped]
        detail = "; skipped " + ", ".join(skipped) if skipped else ""
        raise type(exc)(f"{exc}{detail}") from None
    return Analysis(session.manifest.session_id, config, measured, stages, result, session.protocol)


def _trace_summary(stages: Dict[str, DiameterTrace]) -> dict:
    raw, interp, filt = stages["raw"], stages["interpolated"], stages["filtered"]
    return {
        "samples": len(raw),
        "valid_raw": int(raw.valid.sum()),
        "flagged": int(raw.valid.sum() - stages["flagged"].valid.sum()),
        "interpolated": int(interp.interpolated.sum()),
        "valid_fraction": filt.valid_fraction,
    }


def build_report(a: Analysis) -> dict:
    r = a.result
    return {
        "schema_version": SCHEMA_VERSION,
        "session_id": a.session_id,
        "traces": {eye.value: _trace_summary(a.stages[eye]) for eye in (Eye.LEFT, Eye.RIGHT)},
        "windows": [{
            "event_index": w.event_index,
            "stimulated_eye": w.stimulated_eye,
            "color": w.color,
            "t_on_ms": w.t_on,
            "t_off_ms": w.t_off,
            "direct_magnitude": w.direct,
            "consensual_magnitude": w.consensual,
            "skipped": w.skipped,
        } for w in r.windows],
        "magnitudes_right": list(r.magnitudes_right),
        "magnitudes_left": list(r.magnitudes_left),
        "median_right": r.median_right,
        "median_left": r.median_left,
        "score": r.score,
        "classification": r.classification.value,
        "defect_side": r.defect_side.value,
        "config": a.config.to_dict(),
    }


def format_report(report: dict) -> str:
    """Human-readable multi-line summary of a report dict."""
    lines = [f"session {report['session_id']}",
             f"RAPD score {report['score']:+.3f}  {report['classification']}"
             f"  defect side: {report['defect_side']}",
             f"median magnitude  right {report['median_right']:.2f}%  left {report['median_left']:.2f}%"]
    for eye, s in sorted(report["traces"].items()):
        lines.append(f"eye {eye}: {s['samples']} frames, {s['valid_raw']} detected, "
                     f"{s['flagged']} flagged, {s['interpolated']} interpolated, "
                     f"{100 * s['valid_fraction']:.1f}% usable")
    for w in report["windows"]:
        direct = "-" if w["direct_magnitude"] is None else f"{w['direct_magnitude']:.2f}%"
        cons = "-" if w["consensual_magnitude"] is None else f"{w['consensual_magnitude']:.2f}%"
        note = f"  skipped: {w['skipped']}" if w["skipped"] else ""
        lines.append(f"  event {w['event_index']} {w['stimulated_eye']}/{w['color']} "
                     f"[{w['t_on_ms']:g}, {w['t_off_ms']:g}) ms  direct {direct}  consensual {cons}{note}")
    return "\n".join(lines)
