"""Image processing primitives (8-bit gray/RGB numpy arrays, row-major)."""

from .color import to_gray_ccir601, to_uint8
from .edges import EdgeMap, auto_canny, canny, histogram256, otsu_from_histogram, otsu_threshold, sobel
from .filters import bilateral, clahe, denoise_edge_preserving, median_filter, nonlocal_means
from .geometry import apply_homography, estimate_homography, warp_perspective
from .hough import Circle, hough_circles
from .io import read_png, write_png
from .resample import register_upsampler, upsample

__all__ = [
    "to_gray_ccir601",
    "to_uint8",
    "EdgeMap",
    "auto_canny",
    "canny",
    "sobel",
    "histogram256",
    "otsu_from_histogram",
    "otsu_threshold",
    "bilateral",
    "clahe",
    "denoise_edge_preserving",
    "median_filter",
    "nonlocal_means",
    "apply_homography",
    "estimate_homography",
    "warp_perspective",
    "Circle",
    "hough_circles",
    "read_png",
    "write_png",
    "register_upsampler",
    "upsample",
]
