"""Beam-edge localization in the rectified beam search region."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import Degenerate
from ..imgproc import bilateral, canny, nonlocal_means, otsu_threshold

#: The beam is bright: frames whose Otsu level in the region is below this
#: fraction of full scale carry no beam.
BEAM_FLOOR = 0.55
N_LINES = 5


@dataclass
class BeamEdges:
    """Sub-pixel beam edges in rectified pixels (NaN when absent)."""

    left: float
    right: float
    left_lines: np.ndarray
    right_lines: np.ndarray
    threshold: float

    @property
    def present(self) -> bool:
        return bool(np.isfinite(self.left) or np.isfinite(self.right))


def _line_rows(n_rows: int, n_lines: int = N_LINES):
    return np.unique(np.round(np.linspace(0.25 * (n_rows - 1), 0.75 * (n_rows - 1), n_lines)).astype(int))


def subpixel_edge(profile_grad, x_guess: float, polarity: int, half: int = 6, iterations: int = 3) -> float:
    """Gradient-weighted centroid of one polarity within ``half`` px of the estimate.

    The window is re-centered on the centroid a few times so that a coarse
    guess does not bias the result.
    """
    n = len(profile_grad)
    g_all = np.maximum(polarity * np.asarray(profile_grad, dtype=np.float64), 0.0)
    x = float(x_guess)
    for _ in range(iterations):
        c = int(round(x))
        lo, hi = max(c - half, 0), min(c + half + 1, n)
        if hi - lo < 2:
            return float("nan")
        g = g_all[lo:hi]
        s = g.sum()
        if s <= 0:
            return float("nan")
        x_new = float((g * np.arange(lo, hi)).sum() / s)
        if abs(x_new - x) < 1e-3:
            return x_new
        x = x_new
    return x


def _dominant_column(xs, n_cols, min_count):
    if len(xs) == 0:
        return None
    hist = np.bincount(np.round(xs).astype(int), minlength=n_cols)
    smooth = np.convolve(hist, np.ones(3), mode="same")
    c = int(np.argmax(smooth))
    if smooth[c] < min_count:
        return None
    sel = np.abs(xs - c) <= 3
    return float(np.mean(xs[sel]))


def detect_beam_edges(region, col_offset: float = 0.0, floor: float = BEAM_FLOOR, denoise: bool = True) -> BeamEdges:
    """Locate the left (rising) and right (falling) beam edges in ``region``.

    ``region`` is the red channel of the beam search strip (0..255 scale);
    ``col_offset`` converts region columns back to rectified columns.
    """
    img = np.asarray(region, dtype=np.float64)
    nan = float("nan")
    empty = BeamEdges(nan, nan, np.full(N_LINES, nan), np.full(N_LINES, nan), nan)
    if img.shape[0] < 3 or img.shape[1] < 5:
        return empty
    if denoise:
        img = nonlocal_means(bilateral(img), h=10.0)
    try:
        t = otsu_threshold(np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8))
    except Degenerate:
        return empty
    empty.threshold = float(t)
    if t < floor * 255:
        return empty
    hi = float(t)
    med = float(np.median(img))
    em = canny(img, 0.5 * hi, hi) | canny(img, 0.5 * med, med)
    ys, xs = np.nonzero(em.edges)
    keep = (xs > 1) & (xs < img.shape[1] - 2)
    ys, xs = ys[keep], xs[keep]
    gx = em.gx[ys, xs]
    n_rows, n_cols = img.shape
    min_count = 0.3 * n_rows
    grad = np.gradient(img, axis=1)
    rows = _line_rows(n_rows)
    out = {}
    for name, pol in (("left", 1), ("right", -1)):
        col = _dominant_column(xs[pol * gx > 0].astype(np.float64), n_cols, min_count)
        lines = np.full(N_LINES, nan)
        if col is not None:
            for k, r in enumerate(rows):
                lines[k] = subpixel_edge(grad[r], col, pol) + col_offset
        out[name] = lines
    left = float(np.nanmedian(out["left"])) if np.isfinite(out["left"]).any() else nan
    right = float(np.nanmedian(out["right"])) if np.isfinite(out["right"]).any() else nan
    if np.isfinite(left) and np.isfinite(right) and right <= left:
        # a bright stripe has its rising edge first; anything else is clutter
        return empty
    return BeamEdges(left, right, out["left"], out["right"], float(t))
