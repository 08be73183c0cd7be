from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..errors import Degenerate

_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass
class EdgeMap:
    """Boolean edge mask plus gradients kept only at edge pixels.

    ``sign`` is the sign of the horizontal gradient; where that is exactly
    zero (horizontal edges) the vertical gradient sign is stored instead so
    every edge pixel carries a nonzero sign.
    """

    edges: np.ndarray
    gx: np.ndarray
    gy: np.ndarray

    @property
    def shape(self):
        return self.edges.shape

    @property
    def sign(self) -> np.ndarray:
        s = np.sign(self.gx)
        s = np.where(s == 0, np.sign(self.gy), s)
        return np.where(self.edges, s, 0).astype(np.int8)

    def points(self):
        ys, xs = np.nonzero(self.edges)
        return xs, ys

    def __or__(self, other: "EdgeMap") -> "EdgeMap":
        edges = self.edges | other.edges
        gx = np.where(self.edges, self.gx, other.gx)
        gy = np.where(self.edges, self.gy, other.gy)
        return EdgeMap(edges, gx, gy)


def sobel(img):
    img = np.asarray(img, dtype=np.float64)
    p = np.pad(img, 1, mode="edge")
    gx = (p[:-2, 2:] + 2 * p[1:-1, 2:] + p[2:, 2:]) - (p[:-2, :-2] + 2 * p[1:-1, :-2] + p[2:, :-2])
    gy = (p[2:, :-2] + 2 * p[2:, 1:-1] + p[2:, 2:]) - (p[:-2, :-2] + 2 * p[:-2, 1:-1] + p[:-2, 2:])
    return gx, gy


def _non_max_suppression(mag, gx, gy):
    h, w = mag.shape
    p = np.pad(mag, 1, mode="constant")
    angle = np.mod(np.degrees(np.arctan2(gy, gx)), 180.0)
    # neighbor offsets (dy, dx) along the gradient for 4 quantized directions
    sector = np.zeros(mag.shape, dtype=np.int8)
    sector[(angle >= 22.5) & (angle < 67.5)] = 1
    sector[(angle >= 67.5) & (angle < 112.5)] = 2
    sector[(angle >= 112.5) & (angle < 157.5)] = 3
    offsets = {0: (0, 1), 1: (1, 1), 2: (1, 0), 3: (1, -1)}
    keep = np.zeros(mag.shape, dtype=bool)
    for s, (dy, dx) in offsets.items():
        fwd = p[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
        back = p[1 - dy : 1 - dy + h, 1 - dx : 1 - dx + w]
        # ties go to the pixel on the negative side of the gradient
        keep |= (sector == s) & (mag > back) & (mag >= fwd)
    return keep


def canny(img, lo: float, hi: float, sigma: float = 0.0) -> EdgeMap:
    """Canny edges on Sobel gradients with hysteresis thresholds ``lo <= hi``.

    Thresholds are in unnormalized Sobel magnitude units (a step of height
    ``h`` produces magnitude ``4h``).
    """
    if lo < 0 or hi < lo:
        raise ValueError("require 0 <= lo <= hi")
    img = np.asarray(img, dtype=np.float64)
    if sigma > 0:
        img = ndimage.gaussian_filter(img, sigma, mode="nearest")
    gx, gy = sobel(img)
    mag = np.hypot(gx, gy)
    thin = _non_max_suppression(mag, gx, gy) & (mag > 0)
    weak = thin & (mag >= lo)
    strong = thin & (mag >= hi)
    labels, n = ndimage.label(weak, structure=_EIGHT)
    if n:
        has_strong = np.zeros(n + 1, dtype=bool)
        has_strong[labels[strong]] = True
        has_strong[0] = False
        edges = has_strong[labels]
    else:
        edges = np.zeros(img.shape, dtype=bool)
    return EdgeMap(edges, np.where(edges, gx, 0.0), np.where(edges, gy, 0.0))


def auto_canny(img, lo_ratio: float = 0.4, sigma: float = 0.0) -> EdgeMap:
    """Canny with ``hi`` from Otsu on the gradient magnitude and ``lo = lo_ratio * hi``."""
    img = np.asarray(img, dtype=np.float64)
    src = ndimage.gaussian_filter(img, sigma, mode="nearest") if sigma > 0 else img
    gx, gy = sobel(src)
    mag = np.hypot(gx, gy)
    top = mag.max()
    if top <= 0:
        return EdgeMap(np.zeros(img.shape, bool), np.zeros(img.shape), np.zeros(img.shape))
    scaled = mag * (255.0 / top)
    try:
        hi = (otsu_threshold(scaled) + 0.5) * top / 255.0
    except Degenerate:
        hi = top
    return canny(src, lo_ratio * hi, hi)


def histogram256(img, mask=None) -> np.ndarray:
    levels = np.clip(np.floor(np.asarray(img, dtype=np.float64) + 0.5), 0, 255).astype(np.intp)
    if mask is not None:
        levels = levels[np.asarray(mask, dtype=bool)]
    return np.bincount(levels.ravel(), minlength=256)


def otsu_from_histogram(hist) -> int:
    """Level ``t`` maximizing between-class variance of ``{<= t}`` vs ``{> t}``.

    Comparison is done in exact integer arithmetic so ties resolve to the
    lowest level deterministically.
    """
    hist = [int(c) for c in hist]
    if len(hist) != 256:
        raise ValueError("expected a 256-bin histogram")
    if sum(1 for c in hist if c > 0) < 2:
        raise Degenerate("region has fewer than two distinct levels")
    total = sum(hist)
    total_sum = sum(i * c for i, c in enumerate(hist))
    best_t, best_num, best_den = -1, -1, 1
    n0 = s0 = 0
    for t in range(255):
        n0 += hist[t]
        s0 += t * hist[t]
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            continue
        # sigma_b^2 * total^2 = (total*s0 - total_sum*n0)^2 / (n0 * n1)
        num = (total * s0 - total_sum * n0) ** 2
        den = n0 * n1
        if best_t < 0 or num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den
    return best_t


def otsu_threshold(img, mask=None) -> int:
    return otsu_from_histogram(histogram256(img, mask))
