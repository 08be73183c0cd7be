"""Perspective rectification and working-distance estimation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..imgproc import apply_homography, estimate_homography, warp_perspective
from .framespec import PaperFrameSpec, Rect


@dataclass(frozen=True)
class RectifiedGeometry:
    """Metric raster over the paper-frame outline.

    A plane point ``(X, Y)`` in meters lands at rectified pixel
    ``((X - origin_x) * ppm, (Y - origin_y) * ppm)``.
    """

    ppm: float
    origin: tuple
    size: tuple  # (width, height)

    @classmethod
    def for_spec(cls, spec: PaperFrameSpec, ppm: float) -> "RectifiedGeometry":
        o = spec.outline
        size = (int(np.ceil(o.width * ppm)), int(np.ceil(o.height * ppm)))
        return cls(float(ppm), (o.x0, o.y0), size)

    def to_px(self, pts):
        pts = np.asarray(pts, dtype=np.float64)
        return (pts - np.asarray(self.origin)) * self.ppm

    def to_m(self, pts):
        return np.asarray(pts, dtype=np.float64) / self.ppm + np.asarray(self.origin)

    def region_slices(self, rect: Rect, inset_px: int = 0):
        """(row slice, col slice) of the rectified raster covering ``rect``."""
        (x0, y0), (x1, y1) = self.to_px([(rect.x0, rect.y0), (rect.x1, rect.y1)])
        w, h = self.size
        c0 = max(int(np.ceil(x0)) + inset_px, 0)
        c1 = min(int(np.floor(x1)) + 1 - inset_px, w)
        r0 = max(int(np.ceil(y0)) + inset_px, 0)
        r1 = min(int(np.floor(y1)) + 1 - inset_px, h)
        return slice(r0, r1), slice(c0, c1)


def rectifying_homography(fiducials_px, spec: PaperFrameSpec, geom: RectifiedGeometry):
    """Homography taking image pixels to rectified pixels.

    ``fiducials_px`` has one row per spec fiducial; rows with NaN are
    treated as missing. Fewer than four usable rows raise ``DegenerateConfig``.
    """
    src = np.asarray(fiducials_px, dtype=np.float64)
    dst = geom.to_px(spec.fiducial_centers)
    if src.shape != dst.shape:
        raise ValueError(f"expected {dst.shape} fiducial array, got {src.shape}")
    ok = np.isfinite(src).all(axis=1)
    return estimate_homography(src[ok], dst[ok])


def correct_perspective(image, fiducials_px, spec: PaperFrameSpec, geom: RectifiedGeometry, offset=(0, 0)):
    """Warp ``image`` (a crop whose top-left sits at ``offset`` in the frame) to the metric raster.

    Returns ``(rectified, H)`` where ``H`` maps full-frame image pixels to
    rectified pixels.
    """
    H = rectifying_homography(fiducials_px, spec, geom)
    shift = np.array([[1.0, 0, offset[0]], [0, 1.0, offset[1]], [0, 0, 1.0]])
    rect = warp_perspective(image, H @ shift, geom.size, keep_float=True)
    return rect, H


def fiducial_distances(sides_px, focal_length_px: float, side_m: float):
    """Per-fiducial distance from the pinhole relation ``d = F * s / side``."""
    sides = np.asarray(sides_px, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(sides > 0, focal_length_px * side_m / sides, np.nan)


def frame_working_distance(sides_px, spec: PaperFrameSpec, focal_length_px: float, x_eval: float = 0.0):
    """Working distance for one frame from the apparent fiducial sizes.

    Camera yaw makes the apparent size vary linearly across the frame, so
    when both fiducial columns are present the per-fiducial distances are
    fitted linearly against their plane x and evaluated at ``x_eval`` (the
    eye); otherwise the median is used.
    """
    d = fiducial_distances(sides_px, focal_length_px, spec.fiducial_side)
    ok = np.isfinite(d)
    if not ok.any():
        return float("nan")
    x = spec.fiducial_centers[:, 0][ok]
    dv = d[ok]
    if np.ptp(x) > 0:
        slope, icpt = np.polyfit(x, dv, 1)
        return float(slope * x_eval + icpt)
    return float(np.median(dv))


def reprojection_error(H, src, dst) -> float:
    """Mean Euclidean distance between ``H(src)`` and ``dst``."""
    return float(np.linalg.norm(apply_homography(H, src) - np.asarray(dst), axis=1).mean())
