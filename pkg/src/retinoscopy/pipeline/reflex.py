"""Reflex-edge localization inside the pupil."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import Degenerate, ReflexNotFound
from ..imgproc import otsu_threshold, upsample
from .beam import N_LINES, subpixel_edge
from .pupil import Pupil

MASK_FRACTION = 0.9
MIN_COLUMN_FILL = 0.4
MIN_CONTRAST = 40.0
RIM_MARGIN_PX = 3.0


@dataclass
class ReflexEdges:
    """Reflex band edges in rectified pixels; NaN when not found."""

    left: float
    right: float
    left_lines: np.ndarray
    right_lines: np.ndarray
    left_at_rim: bool
    right_at_rim: bool


def localize_reflex_edges(
    red,
    pupil: Pupil,
    factor: int = 4,
    method: str = "bicubic",
    min_contrast: float = MIN_CONTRAST,
    rim_margin: float = RIM_MARGIN_PX,
) -> ReflexEdges:
    """Find the bright reflex band inside ``pupil`` on the rectified red channel.

    The pupil crop is upsampled by ``factor``, thresholded with Otsu inside
    the pupil, and columns whose pupil chord is mostly bright form the band.
    Edges are refined on ``N_LINES`` horizontal scan lines spanning the
    middle half of the pupil. A scan-line edge closer than ``rim_margin``
    pixels to the pupil mask is discarded because the rim truncates its
    gradient; an edge left with fewer than a majority of lines is flagged
    as at the rim.
    """
    red = np.asarray(red, dtype=np.float64)
    h, w = red.shape
    pad = int(0.1 * pupil.radius) + 4
    x0 = max(int(np.floor(pupil.cx - pupil.radius)) - pad, 0)
    x1 = min(int(np.ceil(pupil.cx + pupil.radius)) + pad + 1, w)
    y0 = max(int(np.floor(pupil.cy - pupil.radius)) - pad, 0)
    y1 = min(int(np.ceil(pupil.cy + pupil.radius)) + pad + 1, h)
    if x1 - x0 < 4 or y1 - y0 < 4:
        raise ReflexNotFound("pupil crop is empty")
    up = upsample(red[y0:y1, x0:x1], factor, method)
    # upsampled pixel j sits at source coordinate (j + 0.5) / factor - 0.5
    uy, ux = np.mgrid[0 : up.shape[0], 0 : up.shape[1]]
    sx = (ux + 0.5) / factor - 0.5 + x0
    sy = (uy + 0.5) / factor - 0.5 + y0
    rin = MASK_FRACTION * pupil.radius
    mask = (sx - pupil.cx) ** 2 + (sy - pupil.cy) ** 2 <= rin * rin
    if mask.sum() < 16:
        raise ReflexNotFound("pupil mask too small")
    u8 = np.clip(np.floor(up + 0.5), 0, 255).astype(np.uint8)
    try:
        t = otsu_threshold(u8, mask)
    except Degenerate as exc:
        raise ReflexNotFound("flat pupil") from exc
    vals = up[mask]
    bright = vals > t
    if bright.all() or not bright.any() or vals[bright].mean() - vals[~bright].mean() < min_contrast:
        # uniform pupil: either no reflex or a reflex filling the whole pupil;
        # the surrounding iris/skin ring tells the two apart
        r2 = (sx - pupil.cx) ** 2 + (sy - pupil.cy) ** 2
        ring = (r2 >= (1.1 * pupil.radius) ** 2) & (r2 <= (1.1 * pupil.radius + 2) ** 2)
        if ring.any() and vals.mean() - up[ring].mean() >= min_contrast:
            nanl = np.full(N_LINES, float("nan"))
            return ReflexEdges(pupil.cx - pupil.radius, pupil.cx + pupil.radius, nanl, nanl.copy(), True, True)
        raise ReflexNotFound("no reflex contrast inside the pupil")
    band = (up > t) & mask
    chord = mask.sum(axis=0)
    fill = np.where(chord > 0, band.sum(axis=0) / np.maximum(chord, 1), 0.0)
    cols = fill >= MIN_COLUMN_FILL
    if not cols.any():
        raise ReflexNotFound("no column is mostly reflex")
    # longest run of accepted columns
    d = np.diff(np.concatenate([[0], cols.astype(int), [0]]))
    starts, stops = np.flatnonzero(d == 1), np.flatnonzero(d == -1)
    k = int(np.argmax(stops - starts))
    c_lo, c_hi = starts[k], stops[k] - 1

    grad = np.gradient(up, axis=1)
    rows_src = pupil.cy + pupil.radius * np.linspace(-0.5, 0.5, N_LINES)
    rows = np.clip(np.round((rows_src - y0 + 0.5) * factor - 0.5).astype(int), 0, up.shape[0] - 1)
    half = 3 * factor
    nan = float("nan")
    out = {}
    margin_up = rim_margin * factor
    for name, guess, pol in (("left", c_lo - 0.5, 1), ("right", c_hi + 0.5, -1)):
        lines = np.full(N_LINES, nan)
        for j, r in enumerate(rows):
            inside = np.flatnonzero(mask[r])
            if inside.size == 0:
                continue
            g = np.where(mask[r], grad[r], 0.0)
            xu = subpixel_edge(g, guess, pol, half)
            if np.isfinite(xu) and inside[0] + margin_up <= xu <= inside[-1] - margin_up:
                lines[j] = (xu + 0.5) / factor - 0.5 + x0
        out[name] = lines
    # a minority of lines is not trusted: those are usually clipped by the
    # rim or caught on a specular highlight
    need = N_LINES // 2 + 1
    left_rim = int(np.isfinite(out["left"]).sum()) < need
    right_rim = int(np.isfinite(out["right"]).sum()) < need
    left = nan if left_rim else float(np.nanmedian(out["left"]))
    right = nan if right_rim else float(np.nanmedian(out["right"]))
    return ReflexEdges(left, right, out["left"], out["right"], left_rim, right_rim)
