"""Pupil localization: per-frame Hough candidates and a session-level vote."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import PupilNotFound, PupilTooSmall
from ..imgproc import Circle, auto_canny, hough_circles

R_MIN_M = 0.001
R_MAX_M = 0.0045
MIN_DIAMETER_M = 0.003


@dataclass(frozen=True)
class Pupil:
    cx: float
    cy: float
    radius: float

    def as_list(self):
        return [self.cx, self.cy, self.radius]


def pupil_candidates(region, ppm: float, offset=(0, 0), k: int = 3, min_support: float = 0.3) -> list:
    """Top-``k`` circle candidates in the red channel of the reflex window.

    Centers are returned in rectified pixels (``offset`` is the region's
    top-left corner).
    """
    img = np.asarray(region, dtype=np.float64)
    r_min = max(3, int(np.floor(R_MIN_M * ppm)))
    r_max = max(r_min, int(np.ceil(R_MAX_M * ppm)))
    edges = auto_canny(img, sigma=1.0)
    circles = hough_circles(edges, r_min, r_max, max_results=4 * k)
    good = [c for c in circles if c.support >= min_support]
    good.sort(key=lambda c: (-c.support, c.cy, c.cx, c.radius))
    return [Circle(c.cx + offset[0], c.cy + offset[1], c.radius, c.votes) for c in good[:k]]


class PupilHistogram:
    """2D histogram of candidate centers, ``bin_px`` wide, anchored at ``origin``."""

    def __init__(self, origin=(0.0, 0.0), bin_px: float = 2.0):
        self.origin = (float(origin[0]), float(origin[1]))
        self.bin_px = float(bin_px)
        self.candidates = []  # (bin_x, bin_y, cx, cy, r)

    def _bin(self, cx, cy):
        return (
            int(np.floor((cx - self.origin[0]) / self.bin_px)),
            int(np.floor((cy - self.origin[1]) / self.bin_px)),
        )

    def add(self, cands) -> None:
        for c in cands or ():
            bx, by = self._bin(c.cx, c.cy)
            self.candidates.append((bx, by, c.cx, c.cy, c.radius))

    def peak(self):
        """``(center, radius)`` for the fullest bin; ties go to the lowest (y, x) bin."""
        if not self.candidates:
            raise PupilNotFound("no circle candidates in any frame")
        counts = {}
        for bx, by, *_ in self.candidates:
            counts[(by, bx)] = counts.get((by, bx), 0) + 1
        top = max(counts.values())
        by, bx = min(k for k, v in counts.items() if v == top)
        sel = np.array([c[2:] for c in self.candidates if c[0] == bx and c[1] == by])
        return (float(sel[:, 0].mean()), float(sel[:, 1].mean())), float(np.median(sel[:, 2]))

    def nearest(self, cands, center, max_dist: float):
        best, best_d = None, None
        for c in cands or ():
            d = float(np.hypot(c.cx - center[0], c.cy - center[1]))
            if d <= max_dist and (best_d is None or d < best_d):
                best, best_d = c, d
        return None if best is None else Pupil(best.cx, best.cy, best.radius)


@dataclass
class PupilTrack:
    """Session pupil estimate plus the per-frame candidate closest to it."""

    center: tuple
    radius: float
    per_frame: list  # Pupil | None per frame

    @property
    def pupil(self) -> Pupil:
        return Pupil(self.center[0], self.center[1], self.radius)


def select_pupil(candidates_per_frame, origin=(0.0, 0.0), bin_px: float = 2.0, max_offset_bins: float = 2.0):
    """Vote all frames' candidates and pick, per frame, the one nearest the peak."""
    hist = PupilHistogram(origin, bin_px)
    for cands in candidates_per_frame:
        hist.add(cands)
    center, radius = hist.peak()
    reach = max_offset_bins * bin_px * np.sqrt(2)
    per_frame = [hist.nearest(c, center, reach) for c in candidates_per_frame]
    return PupilTrack(center, radius, per_frame)


def detect_pupil(region, ppm: float, histogram: PupilHistogram, offset=(0, 0), max_offset_bins: float = 2.0) -> Pupil:
    """Per-frame pupil: the frame's candidate nearest the session histogram peak."""
    cands = pupil_candidates(region, ppm, offset)
    if not cands:
        raise PupilNotFound("no circle in the pupil radius band")
    center, _ = histogram.peak()
    found = histogram.nearest(cands, center, max_offset_bins * histogram.bin_px * np.sqrt(2))
    if found is None:
        raise PupilNotFound("no candidate near the session pupil")
    return found


def check_pupil_size(radius_px: float, ppm: float, min_diameter_m: float = MIN_DIAMETER_M) -> None:
    diameter = 2 * radius_px / ppm
    if diameter < min_diameter_m:
        raise PupilTooSmall(f"pupil diameter {diameter * 1e3:.2f} mm is below {min_diameter_m * 1e3:.1f} mm")
