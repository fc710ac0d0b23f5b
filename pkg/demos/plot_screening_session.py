"""
Screening a simulated patient
=============================

Render a swinging-light session for an eye with a weakened left optic
pathway, analyse it as if it came from the headset, and compare the score
with the value the simulator knows to be true.
"""

import sys
import tempfile
from pathlib import Path

import rapdscreen as rs

# Three cycles of alternating white light: 2 s on, 3 s dark between stimuli.
protocol = rs.build_swinging_protocol(cycles=3, on_ms=2000, off_ms=3000)

# The left pathway passes only 60% of the constriction drive.
params = rs.PlrParams(afferent_gain_left=0.6)
blinks = rs.BlinkSchedule(left=[(8200, 180)], right=[(13100, 220)])
sim = rs.simulate_session(protocol, params, rs.RenderConfig(pixel_noise_sd=6), blinks,
                          frame_rate=30, seed=7, session_id="demo-left-defect")
print(f"{len(sim.frames[rs.Eye.LEFT])} frames per eye, true score {sim.ground_truth.true_score:+.3f}")

# Write the session the way a recorder would, then read it back from disk.
out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp()) / "session"
rs.write_session(out, sim)
session = rs.read_session(out)

analysis = rs.analyze(session)
report = analysis.report()
print(rs.format_report(report))

# The SVG shows both traces over the shaded stimuli.
svg_path = out / "report.svg"
svg_path.write_text(rs.render_report_plot(report, analysis.traces, session.protocol))
print(f"plot written to {svg_path}")
