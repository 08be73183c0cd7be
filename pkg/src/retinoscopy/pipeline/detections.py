"""Per-frame detection records and their CSV form."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .framespec import FIDUCIAL_NAMES
from .beam import N_LINES

SCHEMA_VERSION = 1


def _opt(x):
    return None if x is None or not math.isfinite(x) else float(x)


@dataclass
class FrameDetections:
    """Everything measured on one frame.

    Fiducials are full-frame image pixels; beam, pupil and reflex positions
    are rectified (perspective-corrected) pixels.
    """

    frame_index: int
    fiducials: np.ndarray | None = None  # (5, 2)
    fiducial_detected: np.ndarray | None = None  # (5,) bool
    beam_left: float | None = None
    beam_right: float | None = None
    beam_left_lines: np.ndarray = field(default_factory=lambda: np.full(N_LINES, np.nan))
    beam_right_lines: np.ndarray = field(default_factory=lambda: np.full(N_LINES, np.nan))
    pupil: tuple | None = None  # (cx, cy, r)
    reflex_left: float | None = None
    reflex_right: float | None = None
    reflex_left_lines: np.ndarray = field(default_factory=lambda: np.full(N_LINES, np.nan))
    reflex_right_lines: np.ndarray = field(default_factory=lambda: np.full(N_LINES, np.nan))
    working_distance_est: float | None = None
    dropped: str | None = None

    def __post_init__(self):
        if self.pupil is not None and self.pupil[2] < 0:
            raise ValueError("pupil radius must be non-negative")

    @property
    def has_beam(self) -> bool:
        return self.beam_left is not None or self.beam_right is not None


def beam_center_lines(dets, width: float | None = None) -> np.ndarray:
    """(n_frames, N_LINES) beam-center positions.

    With a single visible edge the center is inferred from the median beam
    width over frames where both edges are seen.
    """
    L = np.array([d.beam_left_lines for d in dets], dtype=np.float64).reshape(len(dets), N_LINES)
    R = np.array([d.beam_right_lines for d in dets], dtype=np.float64).reshape(len(dets), N_LINES)
    if width is None:
        both = np.isfinite(L) & np.isfinite(R)
        width = float(np.median((R - L)[both])) if both.any() else float("nan")
    center = np.where(np.isfinite(L) & np.isfinite(R), 0.5 * (L + R), np.nan)
    if math.isfinite(width):
        center = np.where(np.isfinite(center), center, L + 0.5 * width)
        center = np.where(np.isfinite(center), center, R - 0.5 * width)
    return center


def beam_positions(dets) -> np.ndarray:
    """Median beam-center position per frame (NaN when no beam)."""
    c = beam_center_lines(dets)
    out = np.full(len(dets), np.nan)
    ok = np.isfinite(c).any(axis=1)
    out[ok] = np.nanmedian(c[ok], axis=1)
    return out


CSV_COLUMNS = (
    ["frame_index"]
    + [f"{n}_{k}" for n in FIDUCIAL_NAMES for k in ("x", "y", "flag")]
    + ["beam_left", "beam_right", "pupil_cx", "pupil_cy", "pupil_r", "reflex_left", "reflex_right"]
    + ["working_distance_est", "dropped"]
)


def _fmt(x):
    return "" if x is None else repr(float(x))


def detections_to_csv(dets) -> str:
    buf = io.StringIO()
    buf.write(f"# schema_version={SCHEMA_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for d in dets:
        row = [d.frame_index]
        for i in range(5):
            if d.fiducials is None:
                row += ["", "", ""]
            else:
                flag = "detected" if d.fiducial_detected[i] else "interpolated"
                row += [_fmt(d.fiducials[i, 0]), _fmt(d.fiducials[i, 1]), flag]
        p = d.pupil or (None, None, None)
        row += [_fmt(d.beam_left), _fmt(d.beam_right), _fmt(p[0]), _fmt(p[1]), _fmt(p[2])]
        row += [_fmt(d.reflex_left), _fmt(d.reflex_right), _fmt(d.working_distance_est), d.dropped or ""]
        w.writerow(row)
    return buf.getvalue()
