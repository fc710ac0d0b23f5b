"""Session files: binary PGM frames, canonical JSON manifests, reports and CSV traces.

Session directory layout::

    manifest.json
    ground_truth.json   (simulator output only)
    frames/R_00000.pgm, frames/L_00000.pgm, ...
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from .detection import Frame
from .errors import (InvalidParameter, MissingFrame, NonMonotonicTimestamps, ParseError,
                     SchemaMismatch)
from .protocol import Eye, StimulusProtocol, protocol_from_json, protocol_to_json, validate_protocol

SCHEMA_VERSION = 1
FLOAT_DIGITS = 6


# -- PGM ---------------------------------------------------------------------

_PGM_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n?)*(\S+)")


def encode_pgm(pixels: np.ndarray) -> bytes:
    px = np.ascontiguousarray(pixels, dtype=np.uint8)
    h, w = px.shape
    return b"P5\n%d %d\n255\n" % (w, h) + px.tobytes()


def decode_pgm(data: bytes, source: str = "<bytes>") -> np.ndarray:
    """Parse a binary P5 PGM with maxval 255 into a (height, width) uint8 array."""
    pos = 0
    tokens = []
    for _ in range(4):
        m = _PGM_TOKEN.match(data, pos)
        if not m:
            raise ParseError(f"{source}: truncated PGM header")
        tokens.append(m.group(1))
        pos = m.end()
    if tokens[0] != b"P5":
        raise ParseError(f"{source}: not a binary PGM (magic {tokens[0][:8]!r})")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise ParseError(f"{source}: malformed PGM header") from None
    if maxval != 255:
        raise ParseError(f"{source}: maxval {maxval} unsupported, need 255")
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise ParseError(f"{source}: missing whitespace after PGM header")
    pos += 1
    body = data[pos:pos + w * h]
    if len(body) != w * h:
        raise ParseError(f"{source}: expected {w * h} pixel bytes, found {len(body)}")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w).copy()


def write_pgm(path, pixels: np.ndarray) -> None:
    Path(path).write_bytes(encode_pgm(pixels))


def read_pgm(path) -> np.ndarray:
    p = Path(path)
    try:
        data = p.read_bytes()
    except FileNotFoundError:
        raise MissingFrame(f"frame file not found: {p}") from None
    return decode_pgm(data, str(p))


# -- canonical JSON ------------------------------------------------------------

def canonical_float(x: float) -> float:
    if not math.isfinite(x):
        raise InvalidParameter(f"non-finite value {x!r} cannot be serialized")
    return float(f"{x:.{FLOAT_DIGITS}g}")


def _canon(obj):
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return canonical_float(float(obj))
    if isinstance(obj, dict):
        return {str(k): _canon(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_canon(v) for v in obj]
    if hasattr(obj, "value"):  # enums
        return obj.value
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_canonical(obj) -> str:
    """Sorted keys, two-space indent, floats at 6 significant digits."""
    return json.dumps(_canon(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps_canonical(obj), encoding="utf-8")


def read_json(path):
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ParseError(f"file not found: {p}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{p}: malformed JSON: {exc}") from None


# -- manifest --------------------------------------------------------------------

@dataclass
class SessionManifest:
    session_id: str
    protocol: StimulusProtocol
    frame_rate: float
    frames: Dict[Eye, List[Tuple[str, float]]]
    subject: Dict[str, str] = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def to_json(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "session_id": self.session_id,
            "frame_rate": self.frame_rate,
            "session_end_ms": self.protocol.session_end,
            "protocol": protocol_to_json(self.protocol),
            "frames": {eye.value: [{"path": p, "timestamp_ms": t} for p, t in self.frames[eye]]
                       for eye in (Eye.LEFT, Eye.RIGHT)},
            "subject": dict(self.subject),
        }

    @classmethod
    def from_json(cls, d) -> "SessionManifest":
        if not isinstance(d, dict):
            raise ParseError("manifest must be a JSON object")
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise SchemaMismatch(f"manifest schema_version {version!r}; this reader supports {SCHEMA_VERSION}")
        try:
            protocol = protocol_from_json(d["protocol"], d["session_end_ms"])
            frames = {}
            for eye in (Eye.LEFT, Eye.RIGHT):
                if eye.value not in d["frames"]:
                    raise SchemaMismatch(f"manifest has no frames for eye {eye.value}")
                frames[eye] = [(str(e["path"]), float(e["timestamp_ms"])) for e in d["frames"][eye.value]]
            subject = {str(k): str(v) for k, v in d.get("subject", {}).items()}
            m = cls(str(d["session_id"]), protocol, float(d["frame_rate"]), frames, subject, version)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InvalidParameter):
                raise SchemaMismatch(f"manifest: {exc}") from None
            raise SchemaMismatch(f"manifest missing or malformed field: {exc}") from None
        problems = validate_protocol(protocol)
        if problems:
            raise SchemaMismatch(f"manifest protocol invalid: {problems[0].kind} at event {problems[0].index}")
        for eye, items in frames.items():
            ts = [t for _, t in items]
            if any(b <= a for a, b in zip(ts, ts[1:])):
                raise NonMonotonicTimestamps(f"eye {eye.value} frame timestamps are not strictly increasing")
        return m


class Session:
    """A manifest plus lazily loaded frames from a session directory."""

    def __init__(self, root, manifest: SessionManifest):
        self.root = Path(root)
        self.manifest = manifest

    @property
    def protocol(self) -> StimulusProtocol:
        return self.manifest.protocol

    @property
    def frame_rate(self) -> float:
        return self.manifest.frame_rate

    def frame_path(self, rel: str) -> Path:
        return self.root / rel

    def load_frame(self, eye: Eye, index: int) -> Frame:
        rel, t = self.manifest.frames[eye][index]
        return Frame(read_pgm(self.frame_path(rel)), t, eye)

    def iter_frames(self, eye: Eye) -> Iterator[Frame]:
        for i in range(len(self.manifest.frames[eye])):
            yield self.load_frame(eye, i)


class MemorySession:
    """Same interface as :class:`Session`, backed by in-memory frames."""

    def __init__(self, manifest: SessionManifest, frames: Dict[Eye, List[Frame]]):
        self.manifest = manifest
        self._frames = frames

    protocol = Session.protocol
    frame_rate = Session.frame_rate

    def load_frame(self, eye: Eye, index: int) -> Frame:
        return self._frames[eye][index]

    def iter_frames(self, eye: Eye) -> Iterator[Frame]:
        return iter(self._frames[eye])


def frame_filename(eye: Eye, index: int) -> str:
    return f"frames/{eye.value}_{index:05d}.pgm"


def write_manifest(path, manifest: SessionManifest) -> None:
    write_json(path, manifest.to_json())


def read_manifest(path) -> SessionManifest:
    return SessionManifest.from_json(read_json(path))


def read_session(path, check_frames: bool = True) -> Session:
    """Load and validate ``manifest.json`` in ``path``.

    With ``check_frames`` every referenced frame must exist and carry a
    valid P5 header; pixel data is still loaded lazily.
    """
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise ParseError(f"no manifest.json in {root}")
    manifest = read_manifest(manifest_path)
    session = Session(root, manifest)
    if check_frames:
        for eye in (Eye.LEFT, Eye.RIGHT):
            for rel, _ in manifest.frames[eye]:
                p = session.frame_path(rel)
                if not p.is_file():
                    raise MissingFrame(f"frame file not found: {rel}")
                with open(p, "rb") as fh:
                    head = fh.read(2)
                if head != b"P5":
                    raise ParseError(f"{rel}: not a binary PGM")
    return session


def write_session(path, sim) -> SessionManifest:
    """Write a simulated session (frames, manifest, ground truth) into ``path``."""
    root = Path(path)
    (root / "frames").mkdir(parents=True, exist_ok=True)
    frames = {}
    for eye in (Eye.LEFT, Eye.RIGHT):
        items = []
        for i, fr in enumerate(sim.frames[eye]):
            rel = frame_filename(eye, i)
            write_pgm(root / rel, fr.pixels)
            items.append((rel, fr.timestamp))
        frames[eye] = items
    manifest = SessionManifest(sim.session_id, sim.protocol, sim.frame_rate, frames, dict(sim.subject))
    write_manifest(root / "manifest.json", manifest)
    write_json(root / "ground_truth.json", ground_truth_to_json(sim))
    return manifest


def memory_session(sim) -> MemorySession:
    frames = {eye: [(frame_filename(eye, i), fr.timestamp) for i, fr in enumerate(sim.frames[eye])]
              for eye in (Eye.LEFT, Eye.RIGHT)}
    manifest = SessionManifest(sim.session_id, sim.protocol, sim.frame_rate, frames, dict(sim.subject))
    return MemorySession(manifest, sim.frames)


def ground_truth_to_json(sim) -> dict:
    gt = sim.ground_truth
    return {
        "schema_version": SCHEMA_VERSION,
        "session_id": sim.session_id,
        "seed": sim.seed,
        "true_score": gt.true_score if math.isfinite(gt.true_score) else None,
        "windows": [{"event_index": w.event_index, "stimulated_eye": w.stimulated_eye.value,
                     "degenerate": w.degenerate, "true_magnitude": m}
                    for w, m in zip(gt.windows, gt.magnitudes)],
        "traces": {eye.value: {"timestamp_ms": gt.timestamps[eye], "diameter_mm": gt.diameter_mm[eye],
                               "diameter_px": gt.diameter_px[eye]}
                   for eye in (Eye.LEFT, Eye.RIGHT)},
        "params": sim.params.to_dict(),
        "render": sim.render_cfg.to_dict(),
        "blinks": {"L": [list(b) for b in sim.blinks.left], "R": [list(b) for b in sim.blinks.right],
                   "ramp_ms": sim.blinks.ramp_ms},
    }


# -- traces CSV ---------------------------------------------------------------------

def traces_to_csv(stages_by_eye) -> str:
    """``stages_by_eye[eye][stage] -> DiameterTrace`` as CSV, one row per sample per stage."""
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["timestamp_ms", "eye", "diameter_px", "valid", "stage"])
    for stage in ("raw", "flagged", "interpolated", "filtered"):
        for eye in (Eye.LEFT, Eye.RIGHT):
            tr = stages_by_eye[eye][stage]
            for t, d, v in zip(tr.timestamps, tr.diameters, tr.valid):
                w.writerow([f"{t:.{FLOAT_DIGITS}g}", eye.value, f"{d:.{FLOAT_DIGITS}g}", int(v), stage])
    return buf.getvalue()
