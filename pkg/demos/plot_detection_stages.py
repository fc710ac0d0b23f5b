"""
Inside the pupil detector
=========================

Follow one synthetic infrared frame through each detection stage and see
how far the fitted diameter lands from the rendered one.
"""

import numpy as np

import rapdscreen as rs
from rapdscreen import detection as det

cfg = rs.DetectionConfig()
true_diameter = 28.0
frame = rs.render_frame(true_diameter, rs.RenderConfig(pixel_noise_sd=8), seed=3, t=0.0, eye=rs.Eye.RIGHT)

# Blurring suppresses sensor noise before the coarse threshold.
blurred = det.gaussian_blur(frame, cfg.blur_kernel, cfg.sigma)
print("noise sd before/after blur:",
      round(float(frame.pixels[:20, :20].std()), 2), round(float(blurred.pixels[:20, :20].std()), 2))

# Dark pixels form candidates; the darkest component picks the ROI.
mask = det.coarse_threshold(blurred, cfg.coarse_threshold)
roi = det.locate_darkest_region(mask, blurred, cfg.roi_margin)
print("candidate pixels:", int(mask.sum()), "ROI:", roi)

# Inside the ROI a local-mean threshold separates pupil from iris.
binary = det.adaptive_threshold(frame.pixels[roi.slices], cfg.adaptive_window, cfg.adaptive_offset)
contour = det.extract_pupil_contour(binary)
cx, cy, d, resid = det.fit_circle(contour)
print(f"{len(contour)} boundary pixels, raw fit diameter {d:.2f}px, residual {resid:.3f}px")

m = rs.detect_pupil(frame, cfg)
print(f"measured {m.diameter:.2f}px vs rendered {true_diameter:.2f}px "
      f"(error {m.diameter - true_diameter:+.2f}px)")

# A closed eyelid gives an invalid measurement instead of an exception.
closed = rs.render_frame(true_diameter, blink_cover=1.0, seed=3)
print("blink frame:", rs.detect_pupil(closed).valid, rs.detect_pupil(closed).failure)

# Accuracy over a sweep of sizes
errors = [rs.detect_pupil(rs.render_frame(dd, rs.RenderConfig(pixel_noise_sd=8), seed=i)).diameter - dd
          for i, dd in enumerate(np.linspace(12, 48, 25))]
print(f"sweep: mean error {np.mean(errors):+.3f}px, worst {np.max(np.abs(errors)):.3f}px")
