"""Command line: ``rapdscreen simulate | analyze | report``.

Failures print one line ``<Category>: <message>`` to stderr and exit with
2 (input/parse), 3 (analysis) or 4 (internal).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .analysis import AnalysisConfig, analyze, format_report
from .errors import InvalidParameter, ParseError, RapdError, SchemaMismatch
from .plot import render_report_plot
from .protocol import Eye, LedColor, build_swinging_protocol, parse_eye, protocol_from_json
from .session_io import (read_json, read_session, traces_to_csv, write_json,
                         write_session)
from .simulator import BlinkSchedule, PlrParams, RenderConfig, simulate_session


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        sys.stderr.write(f"UsageError: {message}\n")
        sys.exit(2)


def _blink(text: str):
    try:
        eye, start, dur = text.split(":")
        return parse_eye(eye), float(start), float(dur)
    except (ValueError, InvalidParameter):
        raise argparse.ArgumentTypeError(f"expected EYE:START_MS:DURATION_MS, got {text!r}") from None


def _color_gains(text: str):
    gains = {}
    for part in filter(None, text.split(",")):
        key, _, val = part.partition("=")
        try:
            gains[LedColor.parse(key)] = float(val)
        except (ValueError, InvalidParameter):
            raise argparse.ArgumentTypeError(f"bad color gain {part!r}; use e.g. b=1,g=0.5") from None
    return gains


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rapdscreen", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="render a synthetic session directory")
    s.add_argument("--protocol", help="protocol JSON file; overrides the builtin swinging schedule")
    s.add_argument("--cycles", type=int, default=3)
    s.add_argument("--on-ms", type=float, default=2000.0)
    s.add_argument("--off-ms", type=float, default=3000.0)
    s.add_argument("--intensity", type=float, default=1.0)
    s.add_argument("--color", default="w", help="r|g|b|w")
    s.add_argument("--defect-eye", default="none", choices=["L", "R", "l", "r", "none"])
    s.add_argument("--defect-gain", type=float, default=1.0)
    s.add_argument("--color-gain", type=_color_gains, default={}, help="e.g. b=1,g=0.5")
    s.add_argument("--noise", type=float, default=4.0, help="pixel noise sd (intensity levels)")
    s.add_argument("--blink", type=_blink, action="append", default=[], help="EYE:START_MS:DURATION_MS")
    s.add_argument("--rate", type=float, default=30.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--session-id")
    s.add_argument("--out", required=True)

    a = sub.add_parser("analyze", help="detect, process and score a session directory")
    a.add_argument("--session", required=True)
    a.add_argument("--config", help="JSON with optional detection/trace/windows sections")
    a.add_argument("--out", required=True, help="report JSON path")
    a.add_argument("--plot", help="SVG output path")
    a.add_argument("--trace-csv", help="CSV output path for all trace stages")
    a.add_argument("--workers", type=int, default=2)

    r = sub.add_parser("report", help="print a human-readable summary of a report")
    r.add_argument("--in", dest="inp", required=True)
    return p


def _load_protocol(path):
    d = read_json(path)
    if isinstance(d, dict):
        events, end = d.get("events"), d.get("session_end_ms")
    else:
        events, end = d, None
    if not isinstance(events, list):
        raise SchemaMismatch(f"{path}: expected an event array or an object with 'events'")
    if end is None:
        end = max((float(e["t_off_ms"]) for e in events), default=0.0)
    return protocol_from_json(events, end)


def cmd_simulate(args) -> int:
    if args.protocol:
        protocol = _load_protocol(args.protocol)
    else:
        protocol = build_swinging_protocol(args.cycles, args.on_ms, args.off_ms,
                                           LedColor.parse(args.color), args.intensity)
    gains = {"afferent_gain_left": 1.0, "afferent_gain_right": 1.0}
    if args.defect_eye.lower() != "none":
        side = "left" if parse_eye(args.defect_eye) is Eye.LEFT else "right"
        gains[f"afferent_gain_{side}"] = args.defect_gain
    params = PlrParams(color_gain=args.color_gain, **gains)
    blinks = BlinkSchedule(left=[(s, d) for e, s, d in args.blink if e is Eye.LEFT],
                           right=[(s, d) for e, s, d in args.blink if e is Eye.RIGHT])
    sim = simulate_session(protocol, params, RenderConfig(pixel_noise_sd=args.noise), blinks,
                           args.rate, args.seed, session_id=args.session_id)
    write_session(args.out, sim)
    n = len(sim.frames[Eye.LEFT])
    print(f"wrote {2 * n} frames to {args.out}; expected RAPD {sim.ground_truth.true_score:+.4f}")
    return 0


def cmd_analyze(args) -> int:
    session = read_session(args.session)
    cfg = AnalysisConfig.from_dict(read_json(args.config) if args.config else None)
    result = analyze(session, cfg, workers=args.workers)
    report = result.report()
    write_json(args.out, report)
    if args.plot:
        Path(args.plot).write_text(render_report_plot(report, result.traces, session.protocol))
    if args.trace_csv:
        Path(args.trace_csv).write_text(traces_to_csv(result.stages))
    print(f"score {report['score']:+.4f} {report['classification']} defect={report['defect_side']}")
    return 0


def cmd_report(args) -> int:
    report = read_json(args.inp)
    try:
        print(format_report(report))
    except (KeyError, TypeError) as exc:
        raise ParseError(f"{args.inp}: not a results report ({exc})") from None
    return 0


COMMANDS = {"simulate": cmd_simulate, "analyze": cmd_analyze, "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except RapdError as exc:
        sys.stderr.write(f"{exc.category}: {exc}\n")
        return exc.exit_code
    except OSError as exc:
        sys.stderr.write(f"IOError: {exc}\n")
        return 2
    except Exception as exc:  # noqa: BLE001
        sys.stderr.write(f"InternalError: {type(exc).__name__}: {exc}\n")
        return 4


if __name__ == "__main__":
    sys.exit(main())
