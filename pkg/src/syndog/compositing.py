"""Background compositing and the 2D repositioning transform.

Compositing is exact additive matting: ``out = bg * (1 - mask) + rgb``,
which relies on the renderer's guarantee that rgb is black outside the
silhouette. Repositioning shifts every image-plane channel by the same
integer translation; content pushed off-frame is dropped.
"""

from __future__ import annotations

import numpy as np

from .boxes import mask_bbox
from .rendering import PART_BACKGROUND, RenderOutput


def composite(rendered, background):
    """Overlay a rendered subject on a background image.

    ``rendered`` is a RenderOutput or an ``(rgb, mask)`` pair; the
    background must match the render size exactly.
    """
    if isinstance(rendered, RenderOutput):
        rgb, mask = rendered.rgb, rendered.mask
    else:
        rgb, mask = rendered
    background = np.asarray(background, dtype=np.float64)
    if background.shape != rgb.shape:
        raise ValueError(
            f"background shape {background.shape} does not match render {rgb.shape}"
        )
    keep = 1.0 - mask.astype(np.float64)
    return background * keep[:, :, None] + rgb


def shift_image(array, dx, dy, fill):
    """Shift a (H, W[, C]) array by integer pixels, filling vacated space."""
    out = np.full_like(array, fill)
    height, width = array.shape[:2]
    src_x0, src_x1 = max(0, -dx), min(width, width - dx)
    src_y0, src_y1 = max(0, -dy), min(height, height - dy)
    if src_x0 < src_x1 and src_y0 < src_y1:
        out[src_y0 + dy : src_y1 + dy, src_x0 + dx : src_x1 + dx] = array[
            src_y0:src_y1, src_x0:src_x1
        ]
    return out


def apply_g(rendered: RenderOutput, translation) -> RenderOutput:
    """Reposition a render by an integer (dx, dy).

    All image-plane channels move together; joints shift by the same
    amount (visibility re-checked against the frame) and the bbox is
    recomputed from the surviving mask.
    """
    dx, dy = int(translation[0]), int(translation[1])
    height, width = rendered.mask.shape
    mask = shift_image(rendered.mask, dx, dy, False)
    joints_2d = rendered.joints_2d + np.array([dx, dy], dtype=float)
    with np.errstate(invalid="ignore"):
        joints_visible = (
            rendered.joints_visible
            & (joints_2d[:, 0] >= 0) & (joints_2d[:, 0] < width)
            & (joints_2d[:, 1] >= 0) & (joints_2d[:, 1] < height)
        )
    return RenderOutput(
        rgb=shift_image(rendered.rgb, dx, dy, 0.0),
        mask=mask,
        part_map=shift_image(rendered.part_map, dx, dy, PART_BACKGROUND),
        depth=shift_image(rendered.depth, dx, dy, np.inf),
        joints_2d=joints_2d,
        joints_visible=joints_visible,
        bbox=mask_bbox(mask),
    )
