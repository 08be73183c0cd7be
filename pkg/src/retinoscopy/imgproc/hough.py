from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .edges import EdgeMap


@dataclass(frozen=True)
class Circle:
    cx: float
    cy: float
    radius: float
    votes: float

    @property
    def support(self) -> float:
        """Votes normalized by circumference."""
        return self.votes / (2 * np.pi * self.radius)


def hough_circles(
    edges: EdgeMap,
    r_min: int,
    r_max: int,
    min_votes: float = 0.0,
    max_results: int | None = None,
    window: int = 5,
) -> list:
    """Circle Hough transform on a 1 px (center, radius) grid.

    Every edge pixel votes once per sampled angle on each candidate circle.
    Returns local accumulator maxima sorted by votes, descending.
    """
    if r_min < 3 or r_max < r_min:
        raise ValueError("require 3 <= r_min <= r_max")
    xs, ys = edges.points()
    if xs.size == 0:
        return []
    h, w = edges.shape
    radii = np.arange(r_min, r_max + 1)
    acc = np.zeros(len(radii) * h * w, dtype=np.float64)
    for k, r in enumerate(radii):
        n = int(np.ceil(2 * np.pi * r))
        theta = np.arange(n) * (2 * np.pi / n)
        cx = np.rint(xs[:, None] - r * np.cos(theta)[None, :]).astype(np.intp)
        cy = np.rint(ys[:, None] - r * np.sin(theta)[None, :]).astype(np.intp)
        ok = (cx >= 0) & (cx < w) & (cy >= 0) & (cy < h)
        idx = k * h * w + cy[ok] * w + cx[ok]
        acc += np.bincount(idx, minlength=acc.size)
    acc = acc.reshape(len(radii), h, w)
    peaks = (acc == ndimage.maximum_filter(acc, size=(3, window, window), mode="constant")) & (acc > 0)
    peaks &= acc >= min_votes
    ks, cys, cxs = np.nonzero(peaks)
    votes = acc[ks, cys, cxs]
    order = np.lexsort((cxs, cys, ks, -votes))
    out = [Circle(float(cxs[i]), float(cys[i]), float(radii[ks[i]]), float(votes[i])) for i in order]
    # plateaus can leave several equal maxima for one circle
    kept = []
    for c in out:
        if all(abs(c.cx - o.cx) > 1 or abs(c.cy - o.cy) > 1 or abs(c.radius - o.radius) > 1 for o in kept):
            kept.append(c)
        if max_results is not None and len(kept) >= max_results:
            break
    return kept
