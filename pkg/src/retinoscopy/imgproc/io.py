from pathlib import Path

import numpy as np
from PIL import Image


def read_png(path) -> np.ndarray:
    with Image.open(path) as im:
        if im.mode not in ("RGB", "L"):
            im = im.convert("RGB")
        return np.asarray(im).copy()


def write_png(path, img) -> None:
    img = np.asarray(img)
    if img.dtype != np.uint8:
        raise ValueError("PNG output expects uint8 samples")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(img).save(path, format="PNG", compress_level=6)
