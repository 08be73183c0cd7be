"""Planar homographies: estimation and image warping."""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateConfig, SingularHomography


def _normalizer(pts):
    c = pts.mean(axis=0)
    spread = np.sqrt(((pts - c) ** 2).sum(axis=1)).mean()
    if spread < 1e-15:
        raise DegenerateConfig("all points coincide")
    s = np.sqrt(2) / spread
    return np.array([[s, 0, -s * c[0]], [0, s, -s * c[1]], [0, 0, 1.0]])


def apply_homography(H, pts) -> np.ndarray:
    pts = np.asarray(pts, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    q = np.column_stack([pts, np.ones(len(pts))]) @ np.asarray(H).T
    out = q[:, :2] / q[:, 2:3]
    return out[0] if single else out


def estimate_homography(src, dst) -> np.ndarray:
    """Normalized DLT least-squares homography mapping ``src`` to ``dst``.

    Needs at least 4 correspondences in general position. The result is
    scaled so that ``H[2, 2] == 1``.
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[1] != 2:
        raise ValueError("expected matching (N, 2) point arrays")
    n = len(src)
    if n < 4:
        raise DegenerateConfig(f"need >= 4 correspondences, got {n}")
    Ts, Td = _normalizer(src), _normalizer(dst)
    s = apply_homography(Ts, src)
    d = apply_homography(Td, dst)
    A = np.zeros((2 * n, 9))
    A[0::2, 0:2] = s
    A[0::2, 2] = 1
    A[0::2, 6:8] = -d[:, :1] * s
    A[0::2, 8] = -d[:, 0]
    A[1::2, 3:5] = s
    A[1::2, 5] = 1
    A[1::2, 6:8] = -d[:, 1:2] * s
    A[1::2, 8] = -d[:, 1]
    _, sv, vt = np.linalg.svd(A)
    # a unique solution needs rank 8: the second-smallest singular value must be nonzero
    if sv[7] < 1e-9 * sv[0]:
        raise DegenerateConfig("design matrix is rank-deficient (collinear points?)")
    Hn = vt[-1].reshape(3, 3)
    H = np.linalg.inv(Td) @ Hn @ Ts
    if abs(H[2, 2]) < 1e-15:
        raise DegenerateConfig("homography maps the origin to infinity")
    H = H / H[2, 2]
    if abs(np.linalg.det(H)) < 1e-12:
        raise DegenerateConfig("estimated homography is singular")
    return H


def _bilinear(img, x, y):
    h, w = img.shape[:2]
    valid = (x >= 0) & (x <= w - 1) & (y >= 0) & (y <= h - 1)
    xc = np.clip(x, 0, w - 1)
    yc = np.clip(y, 0, h - 1)
    x0 = np.minimum(np.floor(xc).astype(np.intp), w - 2) if w > 1 else np.zeros_like(xc, dtype=np.intp)
    y0 = np.minimum(np.floor(yc).astype(np.intp), h - 2) if h > 1 else np.zeros_like(yc, dtype=np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    tx = xc - x0
    ty = yc - y0
    src = img.astype(np.float64)
    if src.ndim == 3:
        tx = tx[..., None]
        ty = ty[..., None]
        valid_b = valid[..., None]
    else:
        valid_b = valid
    top = src[y0, x0] * (1 - tx) + src[y0, x1] * tx
    bottom = src[y1, x0] * (1 - tx) + src[y1, x1] * tx
    return np.where(valid_b, top * (1 - ty) + bottom * ty, 0.0)


def warp_perspective(img, H, out_size, keep_float: bool = False) -> np.ndarray:
    """Warp ``img`` by ``H`` (source -> destination) into ``out_size = (width, height)``.

    Destination pixels are inverse-mapped and sampled bilinearly; samples
    falling outside the source are zero.
    """
    H = np.asarray(H, dtype=np.float64)
    if abs(np.linalg.det(H)) < 1e-12:
        raise SingularHomography("homography is not invertible")
    Hinv = np.linalg.inv(H)
    width, height = out_size
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    q0 = Hinv[0, 0] * xx + Hinv[0, 1] * yy + Hinv[0, 2]
    q1 = Hinv[1, 0] * xx + Hinv[1, 1] * yy + Hinv[1, 2]
    q2 = Hinv[2, 0] * xx + Hinv[2, 1] * yy + Hinv[2, 2]
    out = _bilinear(np.asarray(img), q0 / q2, q1 / q2)
    if keep_float:
        return out
    if np.asarray(img).dtype == np.uint8:
        return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)
    return out.astype(np.asarray(img).dtype)
