"""
Cleaning blinks out of a diameter trace
=======================================

Short blinks are bridged by interpolation; a blink longer than the
interpolation limit leaves a gap, and any window that depends on it is
reported as skipped rather than scored from made-up data.
"""

import numpy as np

import rapdscreen as rs

protocol = rs.build_swinging_protocol(3, 2000, 3000)
# a 200 ms blink and a 1.2 s eye closure over the rest interval before the 5 s stimulus
blinks = rs.BlinkSchedule(left=[(4400, 1200), (11000, 200)])
sim = rs.simulate_session(protocol, rs.PlrParams(afferent_gain_right=0.7), rs.RenderConfig(pixel_noise_sd=6),
                          blinks, frame_rate=30, seed=5)

analysis = rs.analyze(rs.memory_session(sim))
stages = analysis.stages[rs.Eye.LEFT]
for name in ("raw", "flagged", "interpolated", "filtered"):
    tr = stages[name]
    print(f"{name:>12}: {int(tr.valid.sum()):4d}/{len(tr)} usable samples, "
          f"{int(tr.interpolated.sum())} interpolated")

# Error of the cleaned trace against the rendered diameter, on usable samples
truth = sim.ground_truth.diameter_px[rs.Eye.LEFT]
filt = stages["filtered"]
err = np.abs(filt.diameters - truth)[filt.valid]
print(f"filtered vs truth: median {np.median(err):.3f}px, 99th pct {np.percentile(err, 99):.3f}px")

for w in analysis.result.windows:
    status = w.skipped or f"direct {w.direct:.2f}%"
    print(f"event {w.event_index} ({w.stimulated_eye}) {status}")
print(f"score {analysis.result.score:+.3f} vs true {sim.ground_truth.true_score:+.3f}")
