"""Integer-factor upsampling behind a small plug-in registry.

Any registered upsampler must return an image ``factor`` times larger in each
dimension whose mean intensity stays within 1% of the input's.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

_UPSAMPLERS: dict[str, Callable] = {}


def register_upsampler(name: str, fn: Callable) -> None:
    _UPSAMPLERS[name] = fn


def _keys(t, a=-0.5):
    t = np.abs(t)
    return np.where(
        t <= 1,
        (a + 2) * t**3 - (a + 3) * t**2 + 1,
        np.where(t < 2, a * t**3 - 5 * a * t**2 + 8 * a * t - 4 * a, 0.0),
    )


def _cubic_matrix(n_in, factor):
    # pixel-center aligned: output j samples input coordinate (j + 0.5) / factor - 0.5
    n_out = n_in * factor
    pos = (np.arange(n_out) + 0.5) / factor - 0.5
    base = np.floor(pos).astype(np.intp)
    M = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    for off in (-1, 0, 1, 2):
        idx = base + off
        w = _keys(pos - idx)
        np.add.at(M, (rows, np.clip(idx, 0, n_in - 1)), w)
    return M


def bicubic(img, factor: int) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    My = _cubic_matrix(img.shape[0], factor)
    Mx = _cubic_matrix(img.shape[1], factor)
    if img.ndim == 3:
        return np.einsum("ij,jkc,lk->ilc", My, img, Mx)
    return My @ img @ Mx.T


register_upsampler("bicubic", bicubic)


def upsample(img, factor: int = 4, method: str = "bicubic") -> np.ndarray:
    if factor not in (2, 4):
        raise ValueError("upsampling factor must be 2 or 4")
    try:
        fn = _UPSAMPLERS[method]
    except KeyError:
        raise ValueError(f"unknown upsampler {method!r}; registered: {sorted(_UPSAMPLERS)}") from None
    return fn(img, factor)


def to_upsampled(x, factor):
    """Map an original-pixel coordinate to the upsampled grid."""
    return (np.asarray(x, dtype=np.float64) + 0.5) * factor - 0.5


def from_upsampled(x, factor):
    return (np.asarray(x, dtype=np.float64) + 0.5) / factor - 0.5
