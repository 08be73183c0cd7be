"""Denoising and contrast filters. Borders are clamp-replicated throughout."""

from __future__ import annotations

import numpy as np

from ..errors import BadKernel


def median_filter(img, k: int = 5) -> np.ndarray:
    if not isinstance(k, (int, np.integer)) or k <= 0 or k % 2 == 0:
        raise BadKernel(f"kernel size must be a positive odd integer, got {k!r}")
    img = np.asarray(img)
    if k == 1:
        return img.copy()
    if k > min(img.shape[:2]):
        raise BadKernel(f"kernel {k} larger than image {img.shape[:2]}")
    pad = k // 2
    padded = np.pad(img, pad, mode="edge")
    h, w = img.shape[:2]
    # shifted copies stacked on a leading axis partition much faster than
    # a trailing window axis
    stack = np.stack([padded[dy : dy + h, dx : dx + w] for dy in range(k) for dx in range(k)])
    mid = (k * k) // 2
    return np.partition(stack, mid, axis=0)[mid].astype(img.dtype)


def _tile_lut(hist, clip, area):
    """Clipped-histogram equalization LUTs; ``hist`` is (..., 256), ``area`` broadcasts."""
    area = np.asarray(area, dtype=np.float64)[..., None]
    if np.isfinite(clip):
        limit = np.maximum(clip * area / 256.0, 1.0 / 256.0)
        excess = np.sum(np.maximum(hist - limit, 0.0), axis=-1, keepdims=True)
        hist = np.minimum(hist, limit) + excess / 256.0
    cdf = np.cumsum(hist, axis=-1)
    return np.clip(np.floor(cdf * 255.0 / area + 0.5), 0, 255)


def clahe(img, tile: int = 8, clip: float = 2.0) -> np.ndarray:
    """Contrast-limited adaptive histogram equalization.

    ``tile`` is the tile side in pixels; the last row/column of tiles may be
    partial. Tile lookup tables are blended bilinearly between tile centers.
    """
    img = np.asarray(img)
    levels = np.clip(np.floor(img.astype(np.float64) + 0.5), 0, 255).astype(np.intp)
    h, w = levels.shape
    ny, nx = -(-h // tile), -(-w // tile)

    tiles = (np.arange(h) // tile)[:, None] * nx + (np.arange(w) // tile)[None, :]
    hist = np.bincount((tiles * 256 + levels).ravel(), minlength=ny * nx * 256).astype(np.float64)
    edges_y = np.minimum(np.arange(ny + 1) * tile, h)
    edges_x = np.minimum(np.arange(nx + 1) * tile, w)
    area = np.diff(edges_y)[:, None] * np.diff(edges_x)[None, :]
    luts = _tile_lut(hist.reshape(ny, nx, 256), clip, area)
    centers_y = (edges_y[:-1] + edges_y[1:] - 1) / 2.0
    centers_x = (edges_x[:-1] + edges_x[1:] - 1) / 2.0

    def axis_weights(coords, centers):
        n = len(centers)
        if n == 1:
            zeros = np.zeros(len(coords), dtype=np.intp)
            return zeros, zeros, np.zeros(len(coords))
        i1 = np.clip(np.searchsorted(centers, coords, side="right"), 1, n - 1)
        i0 = i1 - 1
        t = (coords - centers[i0]) / (centers[i1] - centers[i0])
        return i0, i1, np.clip(t, 0.0, 1.0)

    y0i, y1i, ty_w = axis_weights(np.arange(h, dtype=np.float64), centers_y)
    x0i, x1i, tx_w = axis_weights(np.arange(w, dtype=np.float64), centers_x)
    Y0, X0 = np.meshgrid(y0i, x0i, indexing="ij")
    Y1, X1 = np.meshgrid(y1i, x1i, indexing="ij")
    TY, TX = np.meshgrid(ty_w, tx_w, indexing="ij")
    v00 = luts[Y0, X0, levels]
    v01 = luts[Y0, X1, levels]
    v10 = luts[Y1, X0, levels]
    v11 = luts[Y1, X1, levels]
    top = v00 * (1 - TX) + v01 * TX
    bottom = v10 * (1 - TX) + v11 * TX
    out = top * (1 - TY) + bottom * TY
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def _shifted(padded, dy, dx, pad, shape):
    h, w = shape
    return padded[pad + dy : pad + dy + h, pad + dx : pad + dx + w]


def bilateral(img, sigma_space: float = 1.5, sigma_range: float = 20.0, radius: int | None = None):
    img = np.asarray(img, dtype=np.float64)
    if radius is None:
        radius = max(1, int(np.ceil(2 * sigma_space)))
    padded = np.pad(img, radius, mode="edge")
    num = np.zeros_like(img)
    den = np.zeros_like(img)
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            nb = _shifted(padded, dy, dx, radius, img.shape)
            w = np.exp(-(dy * dy + dx * dx) / (2 * sigma_space**2) - (nb - img) ** 2 / (2 * sigma_range**2))
            num += w * nb
            den += w
    return num / den


def _box_mean(img, r):
    """Mean over (2r+1)^2 windows with edge replication, via integral image."""
    k = 2 * r + 1
    padded = np.pad(img, r, mode="edge")
    c = np.cumsum(np.cumsum(np.pad(padded, ((1, 0), (1, 0))), axis=0), axis=1)
    s = c[k:, k:] - c[:-k, k:] - c[k:, :-k] + c[:-k, :-k]
    return s / (k * k)


def nonlocal_means(img, h: float = 10.0, patch_radius: int = 1, search_radius: int = 3):
    img = np.asarray(img, dtype=np.float64)
    padded = np.pad(img, search_radius, mode="edge")
    num = np.zeros_like(img)
    den = np.zeros_like(img)
    for dy in range(-search_radius, search_radius + 1):
        for dx in range(-search_radius, search_radius + 1):
            nb = _shifted(padded, dy, dx, search_radius, img.shape)
            d2 = _box_mean((nb - img) ** 2, patch_radius)
            w = np.exp(-d2 / (h * h))
            num += w * nb
            den += w
    return num / den


def denoise_edge_preserving(img, mode: str = "bilateral", **params) -> np.ndarray:
    """Edge-preserving smoothing; ``mode`` is ``bilateral`` or ``nonlocal_means``."""
    if mode == "bilateral":
        return bilateral(img, **params)
    if mode in ("nonlocal_means", "nlm"):
        return nonlocal_means(img, **params)
    raise ValueError(f"unknown denoising mode {mode!r}")
