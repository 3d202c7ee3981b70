"""PNG and float-dump image I/O.

Float images live in [0, 1]; quantization to 8-bit happens only here, as
``round(v * 255)``. Part maps are stored with labels shifted by +1 so that
0 is background.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

PART_BACKGROUND = -1


def save_png_rgb(path, rgb):
    arr = np.rint(np.clip(rgb, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")


def load_png_rgb(path):
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0


def save_png_mask(path, mask):
    arr = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path, format="PNG")


def load_png_mask(path):
    with Image.open(path) as im:
        return np.asarray(im.convert("L")) >= 128


def save_png_part_map(path, part_map):
    """Labels shifted +1 into uint8; background (-1) becomes 0."""
    arr = (np.asarray(part_map, dtype=np.int16) + 1).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path, format="PNG")


def load_png_part_map(path):
    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.int16) - 1


def save_png_gray(path, values):
    """Grayscale heatmap PNG from floats in [0, 1]."""
    arr = np.rint(np.clip(values, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path, format="PNG")


def load_png_gray(path):
    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.float64) / 255.0


def save_depth_npy(path, depth):
    np.save(path, np.asarray(depth, dtype=np.float32))


def load_float_dump(path):
    """Float image dump (.npy, any float dtype)."""
    return np.load(path).astype(np.float64)


def load_background(path, size):
    """Load an RGB background scaled and center-cropped to ``size=(W, H)``."""
    width, height = size
    with Image.open(path) as im:
        im = im.convert("RGB")
        scale = max(width / im.width, height / im.height)
        resized = im.resize(
            (max(width, round(im.width * scale)), max(height, round(im.height * scale))),
            Image.BILINEAR,
        )
        left = (resized.width - width) // 2
        top = (resized.height - height) // 2
        cropped = resized.crop((left, top, left + width, top + height))
        return np.asarray(cropped, dtype=np.float64) / 255.0
