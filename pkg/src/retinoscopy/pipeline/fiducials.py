"""Fiducial quad detection, ROI tracking and pattern identification.

All point coordinates are full-frame image pixels (x right, y down, pixel
centers at integers).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ..errors import FrameNotFound, PatternNotFound
from ..imgproc import auto_canny, clahe, median_filter, to_gray_ccir601
from .framespec import PaperFrameSpec

_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class ROI:
    x0: int
    y0: int
    x1: int
    y1: int
    # quads (full-frame coordinates) found while locating this box
    quads: tuple = field(default=(), compare=False, repr=False)

    @property
    def width(self):
        return self.x1 - self.x0

    @property
    def height(self):
        return self.y1 - self.y0

    def expanded(self, frac: float, shape) -> "ROI":
        dx, dy = int(np.ceil(frac * self.width)), int(np.ceil(frac * self.height))
        h, w = shape[:2]
        return ROI(
            max(self.x0 - dx, 0), max(self.y0 - dy, 0), min(self.x1 + dx, w), min(self.y1 + dy, h), self.quads
        )

    def union(self, other: "ROI") -> "ROI":
        return ROI(
            min(self.x0, other.x0),
            min(self.y0, other.y0),
            max(self.x1, other.x1),
            max(self.y1, other.y1),
            self.quads,
        )

    @classmethod
    def around(cls, points, pad: float, shape) -> "ROI":
        """Box around ``points`` grown by ``pad`` pixels, clipped to ``shape``."""
        pts = np.asarray(points, dtype=np.float64)
        h, w = shape[:2]
        x0 = int(np.floor(pts[:, 0].min() - pad))
        y0 = int(np.floor(pts[:, 1].min() - pad))
        x1 = int(np.ceil(pts[:, 0].max() + pad)) + 1
        y1 = int(np.ceil(pts[:, 1].max() + pad)) + 1
        return cls(max(x0, 0), max(y0, 0), min(x1, w), min(y1, h))

    def crop(self, img):
        return img[self.y0 : self.y1, self.x0 : self.x1]

    def as_list(self):
        return [self.x0, self.y0, self.x1, self.y1]


@dataclass(frozen=True)
class Quad:
    center: tuple
    area: float
    corners: np.ndarray
    bbox: tuple  # x0, y0, x1, y1 inclusive pixel bounds

    @property
    def side(self) -> float:
        return float(np.sqrt(self.area))


def _convex_hull(points):
    """Andrew's monotone chain; ``points`` is (N, 2), returns CCW hull vertices."""
    pts = np.unique(points, axis=0)
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(tuple(p))
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(tuple(p))
    return np.array(lower[:-1] + upper[:-1], dtype=np.float64)


def _polygon_area(poly):
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _quad_from_hull(hull):
    """Four hull vertices spanning the largest area: a diagonal plus the two farthest side points."""
    if len(hull) < 4:
        return None
    d = np.linalg.norm(hull[:, None, :] - hull[None, :, :], axis=-1)
    i, j = np.unravel_index(np.argmax(d), d.shape)
    a, b = hull[i], hull[j]
    n = np.array([-(b - a)[1], (b - a)[0]])
    side = (hull - a) @ n
    k, m = int(np.argmax(side)), int(np.argmin(side))
    if side[k] <= 0 or side[m] >= 0:
        return None
    quad = np.array([a, hull[k], b, hull[m]])
    return quad


def is_quad(hull, min_fill=0.65, max_side_ratio=1.6):
    quad = _quad_from_hull(hull)
    if quad is None:
        return None
    hull_area = _polygon_area(hull)
    if hull_area <= 0 or _polygon_area(quad) / hull_area < min_fill:
        return None
    sides = np.linalg.norm(quad - np.roll(quad, -1, axis=0), axis=1)
    if sides.min() <= 0 or sides.max() / sides.min() > max_side_ratio:
        return None
    return quad


def preprocess_gray(gray):
    """Median 5x5 denoising followed by CLAHE."""
    return clahe(median_filter(gray, 5))


def find_quads(gray, expected_side_px: float | None = None, offset=(0, 0)) -> list:
    """Detect roughly square closed contours in the edge map of ``gray``."""
    g = preprocess_gray(gray)
    edges = auto_canny(g).edges
    # regions enclosed by edge contours: components of the non-edge mask
    # that do not touch the crop border (a nested-contour-safe fill)
    # close one-pixel gaps that noise leaves in small contours
    edges = ndimage.binary_closing(edges, structure=_EIGHT) | edges
    labels, n = ndimage.label(~edges)
    if n == 0:
        return []
    if expected_side_px:
        lo_area, hi_area = (0.35 * expected_side_px) ** 2, (1.8 * expected_side_px) ** 2
    else:
        lo_area, hi_area = 9.0, 0.05 * gray.size
    h, w = gray.shape
    quads = []
    for idx, sl in enumerate(ndimage.find_objects(labels), start=1):
        if sl is None:
            continue
        if sl[0].start == 0 or sl[1].start == 0 or sl[0].stop == h or sl[1].stop == w:
            continue
        region = labels[sl] == idx
        area = float(region.sum())
        if not lo_area <= area <= hi_area:
            continue
        ys, xs = np.nonzero(region)
        xs = xs + sl[1].start + offset[0]
        ys = ys + sl[0].start + offset[1]
        # the hull only depends on the leftmost and rightmost pixel of each row
        rows = region.any(axis=1)
        left = np.argmax(region, axis=1)[rows]
        right = region.shape[1] - 1 - np.argmax(region[:, ::-1], axis=1)[rows]
        ry = np.flatnonzero(rows)
        ext = np.column_stack([np.concatenate([left, right]), np.concatenate([ry, ry])])
        hull = _convex_hull(ext + (sl[1].start + offset[0], sl[0].start + offset[1]))
        corners = is_quad(hull)
        if corners is None:
            continue
        quads.append(
            Quad(
                center=(float(xs.mean()), float(ys.mean())),
                area=area,
                corners=corners,
                bbox=(int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max())),
            )
        )
    return quads


def filter_by_median_area(quads, lo=0.5, hi=2.0) -> list:
    if len(quads) < 3:
        return list(quads)
    med = float(np.median([q.area for q in quads]))
    return [q for q in quads if lo * med <= q.area <= hi * med]


def detect_roi(frame, prev: ROI | None = None, expected_side_px: float | None = None, margin=0.10) -> ROI:
    """Bounding box of fiducial-like quads plus ``margin``.

    With ``prev`` the search is limited to ``prev`` grown by 25% per side,
    falling back to the whole frame when nothing is found there.
    """
    frame = np.asarray(frame)
    shape = frame.shape
    windows = []
    if prev is not None:
        windows.append(prev.expanded(0.25, shape))
    windows.append(ROI(0, 0, shape[1], shape[0]))
    for win in windows:
        crop = win.crop(frame)
        gray = to_gray_ccir601(crop) if crop.ndim == 3 else crop
        if min(gray.shape) < 8:
            continue
        quads = filter_by_median_area(find_quads(gray, expected_side_px, offset=(win.x0, win.y0)))
        if quads:
            break
    else:
        raise FrameNotFound("no fiducial-like quadrilaterals in frame")
    x0 = min(q.bbox[0] for q in quads)
    y0 = min(q.bbox[1] for q in quads)
    x1 = max(q.bbox[2] for q in quads) + 1
    y1 = max(q.bbox[3] for q in quads) + 1
    return ROI(x0, y0, x1, y1, tuple(quads)).expanded(margin, shape)


@dataclass
class FiducialSet:
    centers: np.ndarray  # (5, 2) full-frame pixels
    detected: np.ndarray  # (5,) bool, False means interpolated
    sides_px: np.ndarray = field(default_factory=lambda: np.full(5, np.nan))

    @property
    def n_detected(self) -> int:
        return int(self.detected.sum())


def _similarity(src, dst):
    """Least-squares similarity (scale, rotation, translation) mapping src -> dst."""
    sc, dc = src.mean(0), dst.mean(0)
    s0, d0 = src - sc, dst - dc
    a = np.sum(s0[:, 0] * d0[:, 0] + s0[:, 1] * d0[:, 1])
    b = np.sum(s0[:, 0] * d0[:, 1] - s0[:, 1] * d0[:, 0])
    den = np.sum(s0**2)
    if den <= 0:
        raise PatternNotFound("coincident points")
    a, b = a / den, b / den
    M = np.array([[a, -b], [b, a]])
    return M, dc - M @ sc


def _affine(src, dst):
    A = np.column_stack([src, np.ones(len(src))])
    coef, *_ = np.linalg.lstsq(A, dst, rcond=None)
    return coef[:2].T, coef[2]


def _fit_transform(src, dst):
    if len(src) >= 3:
        M, t = _affine(src, dst)
        if abs(np.linalg.det(M)) > 1e-9 * max(np.abs(M).max(), 1e-300) ** 2:
            return M, t
    return _similarity(src, dst)


def _assign(pred, pts, tol_px):
    dist = np.linalg.norm(pred[:, None, :] - pts[None, :, :], axis=-1)
    assign, resid = {}, 0.0
    for slot in range(len(pred)):
        k = int(np.argmin(dist[slot]))
        if dist[slot, k] <= tol_px and k not in assign.values():
            assign[slot] = k
            resid += float(dist[slot, k])
    return assign, resid


def match_pattern(quads, spec: PaperFrameSpec, max_rotation_deg=20.0, tol=0.4):
    """Assign quads to pattern slots by trying every quad pair as anchor.

    Each ordered quad pair is hypothesized to be each ordered pair of
    pattern fiducials; hypotheses implying an implausible scale or rotation
    are skipped, the rest are scored by how many quads land on predicted
    slots. Returns ``{slot: quad_index}`` for the best hypothesis.
    """
    if len(quads) < 2:
        return {}
    pattern = spec.fiducial_centers
    pts = np.array([q.center for q in quads], dtype=np.float64)
    side = float(np.median([q.side for q in quads]))
    scale_exp = side / spec.fiducial_side
    n = len(pts)
    ii, jj, aa, bb = np.meshgrid(np.arange(n), np.arange(n), np.arange(5), np.arange(5), indexing="ij")
    keep = (ii != jj) & (aa != bb)
    ii, jj, aa, bb = ii[keep], jj[keep], aa[keep], bb[keep]
    v = pts[jj] - pts[ii]
    w = pattern[bb] - pattern[aa]
    scale = np.hypot(v[:, 0], v[:, 1]) / np.hypot(w[:, 0], w[:, 1])
    rot = np.arctan2(v[:, 1], v[:, 0]) - np.arctan2(w[:, 1], w[:, 0])
    rot = (rot + np.pi) % (2 * np.pi) - np.pi
    ok = (scale >= 0.6 * scale_exp) & (scale <= 1.6 * scale_exp) & (np.abs(rot) <= np.radians(max_rotation_deg))
    best_key, best = None, {}
    tol_px = tol * side
    for h in np.flatnonzero(ok):
        c, sn = scale[h] * np.cos(rot[h]), scale[h] * np.sin(rot[h])
        M = np.array([[c, -sn], [sn, c]])
        t = pts[ii[h]] - M @ pattern[aa[h]]
        assign, resid = _assign(pattern @ M.T + t, pts, tol_px)
        key = (len(assign), -resid)
        if best_key is None or key > best_key:
            best_key, best = key, assign
    if len(best) >= 3:
        # refit on every matched point and re-match once
        slots = sorted(best)
        M, t = _fit_transform(pattern[slots], pts[[best[s] for s in slots]])
        refined, _ = _assign(pattern @ M.T + t, pts, tol_px)
        if len(refined) >= len(best):
            best = refined
    return best


def refine_center(gray, quad: Quad, pad: int = 4):
    """Darkness-weighted centroid and side lengths of one fiducial.

    Weights are ``(255 - gray)`` minus the local paper level, unclipped so
    that background noise averages out. Returns ``(cx, cy, side_x, side_y)``.
    """
    h, w = gray.shape
    half = 0.5 * quad.side + pad
    cx, cy = quad.center
    x0, x1 = max(int(np.floor(cx - half)), 0), min(int(np.ceil(cx + half)) + 1, w)
    y0, y1 = max(int(np.floor(cy - half)), 0), min(int(np.ceil(cy + half)) + 1, h)
    win = 255.0 - gray[y0:y1, x0:x1].astype(np.float64)
    if win.shape[0] < 3 or win.shape[1] < 3:
        return cx, cy, quad.side, quad.side
    ring = np.concatenate([win[0], win[-1], win[1:-1, 0], win[1:-1, -1]])
    wgt = win - np.median(ring)
    total = wgt.sum()
    if total <= 0:
        return cx, cy, quad.side, quad.side
    ys, xs = np.mgrid[y0:y1, x0:x1]
    mx = float((wgt * xs).sum() / total)
    my = float((wgt * ys).sum() / total)
    # extent along an axis = total darkness / darkness per line through the middle
    rows = wgt.sum(axis=1)
    cols = wgt.sum(axis=0)
    ry = np.abs(np.arange(y0, y1) - my) <= 0.25 * quad.side
    rx = np.abs(np.arange(x0, x1) - mx) <= 0.25 * quad.side
    side_y = total / rows[ry].mean() if ry.any() and rows[ry].mean() > 0 else quad.side
    side_x = total / cols[rx].mean() if rx.any() and cols[rx].mean() > 0 else quad.side
    return mx, my, float(side_x), float(side_y)


def _interpolate_missing(centers, detected, history, spec):
    missing = [m for m in range(5) if not detected[m]]
    cur_idx = [k for k in range(5) if detected[k]]
    estimates = {m: [] for m in missing}
    for past in history[-3:]:
        common = [k for k in cur_idx if past.detected[k]]
        if len(common) < 2:
            continue
        M, t = _fit_transform(past.centers[common], centers[common])
        for m in missing:
            estimates[m].append(M @ past.centers[m] + t)
    out = centers.copy()
    pattern = spec.fiducial_centers
    fallback = None
    for m in missing:
        if estimates[m]:
            out[m] = np.mean(estimates[m], axis=0)
        else:
            if fallback is None:
                fallback = _fit_transform(pattern[cur_idx], centers[cur_idx])
            M, t = fallback
            out[m] = M @ pattern[m] + t
    return out


def detect_fiducials(
    roi_gray,
    spec: PaperFrameSpec,
    history=(),
    expected_side_px: float | None = None,
    offset=(0, 0),
    quads=None,
) -> FiducialSet:
    """Identify the five fiducials in a ROI crop.

    Up to three missing fiducials are filled in by mapping recent detections
    onto the current ones (or, lacking history, from the pattern geometry).
    ``quads`` may pass in contours already found on the same pixels (in
    full-frame coordinates) to skip a second detection pass.
    """
    gray = np.asarray(roi_gray)
    if quads is None:
        quads = find_quads(gray, expected_side_px, offset=offset)
    else:
        h, w = gray.shape
        quads = [
            q
            for q in quads
            if 0 <= q.center[0] - offset[0] < w and 0 <= q.center[1] - offset[1] < h
        ]
        # the same contour can arrive twice from overlapping search windows
        uniq = {}
        for q in quads:
            uniq.setdefault((round(q.center[0], 6), round(q.center[1], 6)), q)
        quads = list(uniq.values())
    quads = filter_by_median_area(quads)
    assign = match_pattern(quads, spec)
    centers = np.full((5, 2), np.nan)
    sides = np.full(5, np.nan)
    detected = np.zeros(5, dtype=bool)
    local = gray.astype(np.float64)
    for slot, k in assign.items():
        q = quads[k]
        shifted = Quad((q.center[0] - offset[0], q.center[1] - offset[1]), q.area, q.corners, q.bbox)
        mx, my, _, side_y = refine_center(local, shifted)
        centers[slot] = (mx + offset[0], my + offset[1])
        sides[slot] = side_y
        detected[slot] = True
    history = [h for h in history if h is not None]
    n = int(detected.sum())
    if n == 5:
        return FiducialSet(centers, detected, sides)
    if n >= 2:
        return FiducialSet(_interpolate_missing(centers, detected, history, spec), detected, sides)
    usable = [h for h in history if h.n_detected >= 2]
    if not usable:
        raise PatternNotFound(f"only {n} fiducial(s) identified and no usable history")
    last = usable[-1]
    out = last.centers.copy()
    if n == 1:
        k = int(np.flatnonzero(detected)[0])
        out = out + (centers[k] - last.centers[k])
        out[k] = centers[k]
    return FiducialSet(out, detected, sides)
