"""Pass segmentation, timestamp selection and displacement-ratio measurement."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientTrack, NoPasses, ZeroBeamDisplacement
from ..optics import MovementRatio
from ..robust import LineFit, huber_line, huber_location
from .beam import N_LINES
from .detections import beam_center_lines, beam_positions

MIN_PASS_FRAMES = 5
MIN_BEAM_FRAMES = 20
MIN_BEAM_DISPLACEMENT_PX = 2.0


@dataclass(frozen=True)
class PassSegment:
    start: int  # first frame index (inclusive)
    stop: int  # last frame index (inclusive)
    direction: int  # +1 left-to-right, -1 right-to-left

    def __post_init__(self):
        if self.stop - self.start + 1 < MIN_PASS_FRAMES:
            raise ValueError(f"a pass needs >= {MIN_PASS_FRAMES} frames")
        if self.direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")

    @property
    def n_frames(self) -> int:
        return self.stop - self.start + 1

    @property
    def label(self) -> str:
        return "left_to_right" if self.direction > 0 else "right_to_left"


def _smooth(v, half: int = 3):
    out = np.empty_like(v)
    for i in range(len(v)):
        out[i] = huber_location(v[max(i - half, 0) : i + half + 1])
    return out


def segment_passes(positions, min_speed: float = 0.2, min_frames: int = MIN_PASS_FRAMES) -> list:
    """Split a beam trajectory into monotone sweeps.

    ``positions`` holds one beam x-position per frame (NaN when absent).
    Finite differences between consecutive valid frames are smoothed with a
    running Huber location; runs of constant velocity sign, ignoring speeds
    below ``min_speed`` px/frame, become passes.
    """
    x = np.asarray(positions, dtype=np.float64)
    idx = np.flatnonzero(np.isfinite(x))
    if len(idx) < MIN_BEAM_FRAMES:
        raise NoPasses(f"only {len(idx)} frames with a beam detection")
    v = np.diff(x[idx]) / np.diff(idx)
    vs = _smooth(v)
    sign = np.where(np.abs(vs) < min_speed, 0, np.sign(vs)).astype(int)
    # each valid frame takes the sign of the step leaving it; the last inherits
    frame_sign = np.append(sign, sign[-1])
    passes = []
    k = 0
    while k < len(idx):
        j = k
        while j + 1 < len(idx) and frame_sign[j + 1] == frame_sign[k]:
            j += 1
        if frame_sign[k] != 0 and idx[j] - idx[k] + 1 >= min_frames and j - k + 1 >= min_frames:
            passes.append(PassSegment(int(idx[k]), int(idx[j]), int(frame_sign[k])))
        k = j + 1
    if not passes:
        raise NoPasses("beam never sweeps monotonically for long enough")
    return passes


@dataclass
class TimestampSelection:
    t1: int
    t2: int
    edge: str  # "left" or "right"
    reflex_fit: LineFit
    beam_fit: LineFit


def _edge_track(dets, seg: PassSegment, edge: str):
    frames, pos = [], []
    for d in dets[seg.start : seg.stop + 1]:
        x = d.reflex_left if edge == "left" else d.reflex_right
        if x is not None and math.isfinite(x):
            frames.append(d.frame_index)
            pos.append(x)
    return np.array(frames, dtype=np.float64), np.array(pos, dtype=np.float64)


def select_timestamps(seg: PassSegment, dets, pupil, coverage=(0.25, 0.75), tol: float = 0.05) -> TimestampSelection:
    """Pick the frame window where the tracked reflex edge crosses the central half of the pupil.

    ``dets`` is indexed by frame; ``pupil`` is the session ``(cx, cy, r)``.
    The edge (left or right) with more valid frames in the pass is tracked.
    """
    cx, _, r = pupil
    beam = beam_positions(dets)
    tracks = {e: _edge_track(dets, seg, e) for e in ("left", "right")}

    def quality(e):
        f, x = tracks[e]
        both = np.isfinite(beam[f.astype(int)]) if len(f) else np.zeros(0, bool)
        span = float(np.ptp(x)) if len(x) else 0.0
        return (int(both.sum()), span)

    edge = max(("left", "right"), key=lambda e: (quality(e), e == "left"))
    f, x = tracks[edge]
    if quality(edge)[0] < MIN_PASS_FRAMES:
        raise InsufficientTrack("fewer than 5 frames with both reflex and beam edges")
    frac = (x - (cx - r)) / (2 * r)
    if frac.min() > coverage[0] + tol or frac.max() < coverage[1] - tol:
        raise InsufficientTrack(f"{edge} edge spans only {frac.min():.2f}..{frac.max():.2f} of the pupil")
    fit = huber_line(f, x)
    if abs(fit.slope) < 1e-9:
        raise InsufficientTrack("reflex edge is stationary")
    ta = fit.solve(cx - r + 2 * r * coverage[0])
    tb = fit.solve(cx - r + 2 * r * coverage[1])
    t1 = max(int(math.ceil(min(ta, tb) - 1e-9)), seg.start)
    t2 = min(int(math.floor(max(ta, tb) + 1e-9)), seg.stop)
    if t2 - t1 < 2:
        raise InsufficientTrack("central band crossed in fewer than three frames")
    fb = np.arange(t1, t2 + 1)
    ok = np.isfinite(beam[fb])
    if ok.sum() < 2:
        raise InsufficientTrack("beam missing inside the timestamp window")
    beam_fit = huber_line(fb[ok].astype(np.float64), beam[fb][ok])
    return TimestampSelection(t1, t2, edge, fit, beam_fit)


def _line_displacements(frames, lines, span):
    out = []
    for k in range(lines.shape[1]):
        ok = np.isfinite(lines[:, k])
        if ok.sum() >= 3:
            out.append(huber_line(frames[ok], lines[ok, k]).slope * span)
    return out


def measure_ratio(seg: PassSegment, sel: TimestampSelection, dets) -> MovementRatio:
    """Median reflex displacement over median beam displacement between ``t1`` and ``t2``.

    Each of the scan lines is fitted with a Huber line over ``[t1, t2]`` and
    its displacement taken from the fit; all positions share the rectified
    x axis, so the sign of ``r`` does not depend on the sweep direction.
    """
    window = dets[sel.t1 : sel.t2 + 1]
    frames = np.array([d.frame_index for d in window], dtype=np.float64)
    span = float(sel.t2 - sel.t1)
    attr = "reflex_left_lines" if sel.edge == "left" else "reflex_right_lines"
    reflex = np.array([getattr(d, attr) for d in window], dtype=np.float64).reshape(len(window), N_LINES)
    beam = beam_center_lines(dets)[sel.t1 : sel.t2 + 1]
    d_reflex = _line_displacements(frames, reflex, span)
    d_beam = _line_displacements(frames, beam, span)
    if not d_beam or abs(float(np.median(d_beam))) < MIN_BEAM_DISPLACEMENT_PX:
        raise ZeroBeamDisplacement("beam moved less than 2 px between t1 and t2")
    if not d_reflex:
        raise InsufficientTrack("no scan line has enough reflex samples")
    return MovementRatio(float(np.median(d_reflex)) / float(np.median(d_beam)))
