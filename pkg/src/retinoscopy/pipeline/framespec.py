"""Paper-frame geometry.

Frame-plane coordinates are in meters with the origin at the center of the
reflex search window, x to the right and y downward (image convention).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SEARCH_SIZES = {
    "small": (0.030, 0.020),
    "medium": (0.035, 0.020),
    "large": (0.040, 0.020),
}

FIDUCIAL_NAMES = ("top_left", "top_right", "right_side", "left_side", "bottom_left")


@dataclass(frozen=True)
class Rect:
    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def width(self):
        return self.x1 - self.x0

    @property
    def height(self):
        return self.y1 - self.y0

    def contains(self, x, y):
        return (x >= self.x0) & (x <= self.x1) & (y >= self.y0) & (y <= self.y1)


@dataclass(frozen=True)
class PaperFrameSpec:
    """Fiducial layout for one eye of the paper frame.

    Five square fiducials sit around the reflex search window: two on the top
    row, one low on the left side, one at mid-height on the right side and
    one at the bottom-left corner. The beam search region is the strip
    between the two top fiducials.
    """

    size_code: str = "medium"
    fiducial_side: float = 0.005
    # clearance between the reflex window and the inner fiducial edges
    window_gap: float = 0.004
    left_side_offset: float = 0.008
    right_side_offset: float = 0.0
    beam_margin: float = 0.001
    frame_margin: float = 0.003

    def __post_init__(self):
        if self.size_code not in SEARCH_SIZES:
            raise ValueError(f"unknown frame size {self.size_code!r}; expected one of {sorted(SEARCH_SIZES)}")
        if min(self.fiducial_side, self.window_gap, self.frame_margin) <= 0:
            raise ValueError("frame dimensions must be positive")

    @property
    def reflex_search_w(self) -> float:
        return SEARCH_SIZES[self.size_code][0]

    @property
    def reflex_search_h(self) -> float:
        return SEARCH_SIZES[self.size_code][1]

    @property
    def _columns(self):
        xl = -self.reflex_search_w / 2 - self.window_gap - self.fiducial_side / 2
        return xl, -xl

    @property
    def _rows(self):
        yt = -self.reflex_search_h / 2 - self.window_gap - self.fiducial_side / 2
        return yt, -yt

    @property
    def fiducial_centers(self) -> np.ndarray:
        xl, xr = self._columns
        yt, yb = self._rows
        return np.array(
            [
                (xl, yt),
                (xr, yt),
                (xr, self.right_side_offset),
                (xl, self.left_side_offset),
                (xl, yb),
            ]
        )

    @property
    def reflex_search_region(self) -> Rect:
        w, h = self.reflex_search_w / 2, self.reflex_search_h / 2
        return Rect(-w, -h, w, h)

    @property
    def beam_search_region(self) -> Rect:
        xl, xr = self._columns
        yt, _ = self._rows
        half = self.fiducial_side / 2
        return Rect(xl + half + self.beam_margin, yt - half, xr - half - self.beam_margin, yt + half)

    @property
    def outline(self) -> Rect:
        c = self.fiducial_centers
        pad = self.fiducial_side / 2 + self.frame_margin
        return Rect(c[:, 0].min() - pad, c[:, 1].min() - pad, c[:, 0].max() + pad, c[:, 1].max() + pad)

    def displacement_vectors(self) -> np.ndarray:
        c = self.fiducial_centers
        return np.array([c[j] - c[i] for i in range(5) for j in range(5) if i != j])

    def min_displacement_separation(self) -> float:
        v = self.displacement_vectors()
        diff = np.linalg.norm(v[:, None, :] - v[None, :, :], axis=-1)
        return float(diff[np.triu_indices(len(v), 1)].min())

    def to_dict(self) -> dict:
        return {
            "size_code": self.size_code,
            "fiducial_side_m": self.fiducial_side,
            "window_gap_m": self.window_gap,
            "left_side_offset_m": self.left_side_offset,
            "right_side_offset_m": self.right_side_offset,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PaperFrameSpec":
        return cls(
            size_code=data.get("size_code", "medium"),
            fiducial_side=float(data.get("fiducial_side_m", 0.005)),
            window_gap=float(data.get("window_gap_m", 0.004)),
            left_side_offset=float(data.get("left_side_offset_m", 0.008)),
            right_side_offset=float(data.get("right_side_offset_m", 0.0)),
        )
