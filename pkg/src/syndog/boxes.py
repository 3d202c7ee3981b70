"""Pixel bounding boxes with inclusive integer corners."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PixelBox:
    """Axis-aligned box over pixel indices; all four corners inclusive."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise ValueError(f"degenerate pixel box {self}")

    @property
    def width(self):
        return self.x1 - self.x0 + 1

    @property
    def height(self):
        return self.y1 - self.y0 + 1

    @property
    def area(self):
        return self.width * self.height

    @property
    def center(self):
        """Continuous center (pixel i spans [i, i+1))."""
        return ((self.x0 + self.x1 + 1) / 2.0, (self.y0 + self.y1 + 1) / 2.0)

    def translated(self, dx, dy):
        return PixelBox(self.x0 + dx, self.y0 + dy, self.x1 + dx, self.y1 + dy)

    def inside(self, width, height):
        return self.x0 >= 0 and self.y0 >= 0 and self.x1 < width and self.y1 < height

    def intersects(self, width, height):
        return self.x1 >= 0 and self.y1 >= 0 and self.x0 < width and self.y0 < height


def mask_bbox(mask) -> PixelBox | None:
    """Tight box around the true pixels of a 2-D mask, or None if empty."""
    mask = np.asarray(mask, dtype=bool)
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(mask.any(axis=0))
    return PixelBox(int(cols[0]), int(rows[0]), int(cols[-1]), int(rows[-1]))
