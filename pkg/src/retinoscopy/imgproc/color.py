import numpy as np

CCIR601 = (0.299, 0.587, 0.114)


def as_gray_float(img) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim == 3:
        img = to_gray_ccir601(img)
    return img.astype(np.float64)


def to_gray_ccir601(img) -> np.ndarray:
    """Luma per CCIR-601, rounded half-up to uint8."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] < 3:
        raise ValueError("expected an (H, W, 3) RGB image")
    rgb = img[..., :3].astype(np.float64)
    y = CCIR601[0] * rgb[..., 0] + CCIR601[1] * rgb[..., 1] + CCIR601[2] * rgb[..., 2]
    return np.clip(np.floor(y + 0.5), 0, 255).astype(np.uint8)


def to_uint8(img) -> np.ndarray:
    return np.clip(np.floor(np.asarray(img, dtype=np.float64) + 0.5), 0, 255).astype(np.uint8)
