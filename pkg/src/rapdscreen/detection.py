"""Pupil detection on 8-bit infrared eye frames.

The pipeline is blur -> fixed threshold -> darkest-component ROI ->
local-mean adaptive threshold on the unblurred ROI -> boundary pixels ->
algebraic circle fit.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Tuple

import numpy as np
from scipy import ndimage

from .errors import DegenerateGeometry, DetectionError, InvalidParameter, NoCandidate, NoContour
from .protocol import Eye

# 4-connectivity
_CROSS = ndimage.generate_binary_structure(2, 1)


@dataclass(frozen=True)
class Frame:
    pixels: np.ndarray  # (height, width) uint8
    timestamp: float
    eye: Eye

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise InvalidParameter("frame pixels must be 2-D (height, width)")
        if px.dtype != np.uint8:
            raise InvalidParameter(f"frame pixels must be uint8, got {px.dtype}")
        if px.shape[0] < 32 or px.shape[1] < 32:
            raise InvalidParameter(f"frame must be at least 32x32, got {px.shape[1]}x{px.shape[0]}")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def with_pixels(self, pixels: np.ndarray) -> "Frame":
        return Frame(pixels, self.timestamp, self.eye)


@dataclass(frozen=True)
class Roi:
    x: int
    y: int
    width: int
    height: int

    @property
    def slices(self) -> Tuple[slice, slice]:
        return slice(self.y, self.y + self.height), slice(self.x, self.x + self.width)


@dataclass(frozen=True)
class PupilMeasurement:
    timestamp: float
    eye: Eye
    center_x: float
    center_y: float
    diameter: float
    fit_residual: float
    valid: bool
    failure: str = ""


@dataclass(frozen=True)
class DetectionConfig:
    blur_kernel: int = 7
    blur_sigma: float = 0.0  # 0 means kernel / 6
    coarse_threshold: int = 60
    roi_margin: int = 10
    adaptive_window: int = 31
    adaptive_offset: float = 5.0
    min_contour_points: int = 8
    residual_limit: float = 1.5
    # boundary pixel centres sit about half a pixel inside the true edge
    edge_offset: float = 0.4

    def __post_init__(self):
        for name in ("blur_kernel", "adaptive_window"):
            k = getattr(self, name)
            if int(k) != k or k < 3 or k % 2 == 0:
                raise InvalidParameter(f"{name} must be an odd integer >= 3, got {k}")
        if self.blur_sigma < 0:
            raise InvalidParameter("blur_sigma must be >= 0")
        if self.roi_margin < 0:
            raise InvalidParameter("roi_margin must be >= 0")
        if self.min_contour_points < 3:
            raise InvalidParameter("min_contour_points must be >= 3")
        if not self.residual_limit > 0:
            raise InvalidParameter("residual_limit must be > 0")

    @property
    def sigma(self) -> float:
        return self.blur_sigma if self.blur_sigma > 0 else self.blur_kernel / 6.0

    def to_dict(self) -> dict:
        return asdict(self)


def gaussian_kernel(kernel: int, sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian taps of odd length ``kernel``."""
    if int(kernel) != kernel or kernel < 3 or kernel % 2 == 0:
        raise InvalidParameter(f"blur kernel must be an odd integer >= 3, got {kernel}")
    if not sigma > 0:
        raise InvalidParameter("sigma must be > 0")
    half = kernel // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    w = np.exp(-0.5 * (x / sigma) ** 2)
    return w / w.sum()


def _correlate_axis(img: np.ndarray, taps: np.ndarray, axis: int) -> np.ndarray:
    half = len(taps) // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (half, half)
    padded = np.pad(img, pad, mode="edge")
    n = img.shape[axis]
    out = np.zeros(img.shape, dtype=np.float64)
    for k, w in enumerate(taps):
        sl = [slice(None), slice(None)]
        sl[axis] = slice(k, k + n)
        out += w * padded[tuple(sl)]
    return out


def blur_array(pixels: np.ndarray, kernel: int = 7, sigma: float = 0.0) -> np.ndarray:
    """Separable Gaussian blur in float64, edge replicated, no rounding."""
    taps = gaussian_kernel(kernel, sigma if sigma > 0 else kernel / 6.0)
    tmp = _correlate_axis(pixels.astype(np.float64), taps, axis=1)
    return _correlate_axis(tmp, taps, axis=0)


def gaussian_blur(frame: Frame, kernel: int = 7, sigma: float = 0.0) -> Frame:
    out = blur_array(frame.pixels, kernel, sigma)
    return frame.with_pixels(np.clip(np.rint(out), 0, 255).astype(np.uint8))


def coarse_threshold(frame: Frame, level: int) -> np.ndarray:
    """Boolean mask of pixels strictly darker than ``level``."""
    return frame.pixels < level


def locate_darkest_region(mask: np.ndarray, blurred: Frame, margin: int) -> Roi:
    """Bounding box of the darkest 4-connected mask component, grown by ``margin``.

    Ties on mean intensity go to the larger component, then to the
    topmost-leftmost bounding box.
    """
    if mask.shape != blurred.pixels.shape:
        raise InvalidParameter("mask and frame dimensions differ")
    labels, n = ndimage.label(mask, structure=_CROSS)
    if n == 0:
        raise NoCandidate("coarse threshold left no candidate pixels")
    idx = np.arange(1, n + 1)
    values = blurred.pixels.astype(np.float64)
    counts = np.bincount(labels.ravel(), minlength=n + 1)[1:]
    sums = np.bincount(labels.ravel(), weights=values.ravel(), minlength=n + 1)[1:]
    means = sums / counts
    boxes = ndimage.find_objects(labels)
    order = sorted(idx - 1, key=lambda i: (means[i], -counts[i], boxes[i][0].start, boxes[i][1].start))
    ys, xs = boxes[order[0]]
    h, w = mask.shape
    x0 = max(0, xs.start - margin)
    y0 = max(0, ys.start - margin)
    x1 = min(w, xs.stop + margin)
    y1 = min(h, ys.stop + margin)
    return Roi(int(x0), int(y0), int(x1 - x0), int(y1 - y0))


def local_mean(img: np.ndarray, window: int) -> np.ndarray:
    """Exact window x window mean with edge replication, via an integral image."""
    half = window // 2
    padded = np.pad(img.astype(np.float64), half, mode="edge")
    integral = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1), dtype=np.float64)
    integral[1:, 1:] = padded.cumsum(axis=0).cumsum(axis=1)
    h, w = img.shape
    s = (integral[window:window + h, window:window + w]
         - integral[:h, window:window + w]
         - integral[window:window + h, :w]
         + integral[:h, :w])
    return s / float(window * window)


def adaptive_threshold(roi_pixels: np.ndarray, window: int = 31, offset: float = 5.0) -> np.ndarray:
    """Set pixels darker than their local mean minus ``offset``."""
    if int(window) != window or window < 3 or window % 2 == 0:
        raise InvalidParameter(f"adaptive window must be an odd integer >= 3, got {window}")
    if window > min(roi_pixels.shape):
        raise InvalidParameter(f"adaptive window {window} exceeds ROI size {roi_pixels.shape[1]}x{roi_pixels.shape[0]}")
    mean = local_mean(roi_pixels, int(window))
    return roi_pixels.astype(np.float64) < mean - offset


def extract_pupil_contour(binary: np.ndarray, fill_holes: bool = True) -> np.ndarray:
    """Boundary pixels of the largest 4-connected component as an (N, 2) array of (x, y).

    A boundary pixel is a set pixel with at least one unset 4-neighbour or one
    lying on the image border. With ``fill_holes`` interior holes (glints,
    hollow pupil centres) are filled first so only the outer edge remains.
    """
    labels, n = ndimage.label(binary, structure=_CROSS)
    if n == 0:
        raise NoContour("binary mask is empty")
    counts = np.bincount(labels.ravel())[1:]
    # ties resolved by label order (raster scan), which is deterministic
    comp = labels == (int(np.argmax(counts)) + 1)
    if fill_holes:
        comp = ndimage.binary_fill_holes(comp, structure=_CROSS)
    padded = np.pad(comp, 1, mode="constant", constant_values=False)
    interior = (padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:])
    edge = comp & ~interior
    ys, xs = np.nonzero(edge)
    return np.column_stack([xs, ys]).astype(np.float64)


def fit_circle(points, min_points: int = 8) -> Tuple[float, float, float, float]:
    """Algebraic least-squares circle fit.

    Minimizes ``sum((x^2 + y^2 + A x + B y + C)^2)`` and reports the RMS of
    geometric distances ``|dist(p, centre) - r|`` as the residual.

    Returns
    -------
    center_x, center_y, diameter, residual
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) < max(3, min_points):
        raise DegenerateGeometry(f"need at least {max(3, min_points)} points, got {len(pts)}")
    # centre the data for conditioning; the fit is translation-equivariant
    origin = pts.mean(axis=0)
    x = pts[:, 0] - origin[0]
    y = pts[:, 1] - origin[1]
    design = np.column_stack([x, y, np.ones_like(x)])
    sv = np.linalg.svd(design, compute_uv=False)
    if sv[-1] <= 1e-9 * sv[0]:
        raise DegenerateGeometry("points are collinear")
    (a, b, c), *_ = np.linalg.lstsq(design, -(x * x + y * y), rcond=None)
    cx, cy = -a / 2.0, -b / 2.0
    r2 = cx * cx + cy * cy - c
    if not r2 > 0:
        raise DegenerateGeometry("fit produced a non-positive radius")
    r = float(np.sqrt(r2))
    dist = np.hypot(x - cx, y - cy)
    residual = float(np.sqrt(np.mean((dist - r) ** 2)))
    return float(cx + origin[0]), float(cy + origin[1]), 2.0 * r, residual


def detect_pupil(frame: Frame, cfg: DetectionConfig = DetectionConfig()) -> PupilMeasurement:
    """Run the full pipeline on one frame.

    Stage failures never raise; they return ``valid=False`` with
    ``diameter=0`` and the failing stage's category in ``failure``.
    """
    def invalid(reason, cx=0.0, cy=0.0, residual=0.0):
        return PupilMeasurement(frame.timestamp, frame.eye, cx, cy, 0.0, residual, False, reason)

    try:
        blurred = gaussian_blur(frame, cfg.blur_kernel, cfg.sigma)
        mask = coarse_threshold(blurred, cfg.coarse_threshold)
        roi = locate_darkest_region(mask, blurred, cfg.roi_margin)
        sub = frame.pixels[roi.slices]
        # small pupils near the frame edge can give an ROI narrower than the window
        window = min(cfg.adaptive_window, (min(sub.shape) - 1) // 2 * 2 + 1)
        binary = adaptive_threshold(sub, window, cfg.adaptive_offset)
        contour = extract_pupil_contour(binary)
        cx, cy, diameter, residual = fit_circle(contour, cfg.min_contour_points)
    except (DetectionError, InvalidParameter) as exc:
        return invalid(exc.category)
    cx += roi.x
    cy += roi.y
    if not (0 <= cx < frame.width and 0 <= cy < frame.height):
        return invalid("CenterOutside", residual=residual)
    if residual > cfg.residual_limit:
        return invalid("ResidualLimit", cx, cy, residual)
    return PupilMeasurement(frame.timestamp, frame.eye, cx, cy,
                            diameter + 2.0 * cfg.edge_offset, residual, True)
