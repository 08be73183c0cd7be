"""Huber M-estimation by iteratively reweighted least squares."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HUBER_C = 1.345
HUBER_ITERATIONS = 20


def _mad_scale(resid):
    scale = 1.4826 * np.median(np.abs(resid - np.median(resid)))
    return scale


def huber_weights(resid, scale, c=HUBER_C):
    if scale <= 0:
        return np.ones_like(resid)
    z = np.abs(resid) / (c * scale)
    return np.where(z <= 1.0, 1.0, 1.0 / np.maximum(z, 1e-300))


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float

    def __call__(self, x):
        return self.slope * np.asarray(x, dtype=float) + self.intercept

    def solve(self, y: float) -> float:
        """x at which the line reaches ``y``."""
        if self.slope == 0:
            raise ZeroDivisionError("flat line never reaches the target")
        return (y - self.intercept) / self.slope


def huber_line(x, y, c=HUBER_C, n_iter=HUBER_ITERATIONS) -> LineFit:
    """Fit ``y = slope * x + intercept`` under Huber loss.

    Scale is re-estimated from the residual MAD each iteration. A zero MAD
    (exact fit on most points) keeps uniform weights.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise ValueError("need at least two paired samples")
    A = np.column_stack([x, np.ones_like(x)])
    w = np.ones_like(x)
    coef = np.zeros(2)
    for _ in range(n_iter):
        sw = np.sqrt(w)
        coef, *_ = np.linalg.lstsq(A * sw[:, None], y * sw, rcond=None)
        resid = y - A @ coef
        scale = _mad_scale(resid)
        if scale < 1e-12:
            break
        w = huber_weights(resid, scale, c)
    return LineFit(float(coef[0]), float(coef[1]))


def huber_location(values, c=HUBER_C, n_iter=HUBER_ITERATIONS) -> float:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("empty sample")
    mu = float(np.median(values))
    scale = _mad_scale(values)
    if scale < 1e-12:
        return mu
    for _ in range(n_iter):
        w = huber_weights(values - mu, scale, c)
        mu = float(np.sum(w * values) / np.sum(w))
    return mu
