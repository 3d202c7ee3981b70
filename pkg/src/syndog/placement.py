"""Statistics-driven placement: camera distance and 2D image position.

An empirical distribution of (bounding-box size fraction, box center)
pairs harvested from real images drives where the subject lands: big
observed boxes mean close to the camera, and the 2D target center is
drawn from a Gaussian fitted to the centers of similarly-sized boxes.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass

import numpy as np

from .boxes import PixelBox
from .validation import as_float_array, check_rng

log = logging.getLogger(__name__)

CENTER_WINDOW = 0.10       # +-10% window on box-size fraction
WINDOW_GROWTH = 1.5


@dataclass(frozen=True)
class BBoxStats:
    """Observed (size fraction, normalized center) pairs; non-empty."""

    sizes: np.ndarray      # (n,) box-area fractions in (0, 1]
    centers: np.ndarray    # (n, 2) in [0, 1]^2

    def __post_init__(self):
        sizes = as_float_array(self.sizes, "sizes").reshape(-1)
        centers = as_float_array(self.centers, "centers").reshape(-1, 2)
        if sizes.size == 0:
            raise ValueError("bounding-box stats must be non-empty")
        if sizes.shape[0] != centers.shape[0]:
            raise ValueError("sizes and centers must pair up")
        if sizes.min() <= 0.0 or sizes.max() > 1.0:
            raise ValueError("size fractions must lie in (0, 1]")
        if centers.min() < 0.0 or centers.max() > 1.0:
            raise ValueError("centers must lie in [0, 1]^2")
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "centers", centers)

    def __len__(self):
        return self.sizes.shape[0]


@dataclass(frozen=True)
class DepthBounds:
    near: float = 1.5
    far: float = 8.0

    def __post_init__(self):
        if not (0.0 < self.near < self.far):
            raise ValueError("need 0 < near < far")


@dataclass(frozen=True)
class PlacementSample:
    d_root: float
    cp: tuple              # sampled target center, normalized
    translation: tuple     # (dx, dy) integer pixels

    def __post_init__(self):
        object.__setattr__(self, "cp", (float(self.cp[0]), float(self.cp[1])))
        object.__setattr__(self, "translation", (int(self.translation[0]), int(self.translation[1])))


def depth_from_size(size_fraction, stats: BBoxStats, bounds: DepthBounds):
    """Monotone map of a size fraction onto [near, far]: the largest
    observed box lands at near, the smallest at far. Degenerate stats
    (all sizes identical) map to the midpoint."""
    s_min, s_max = float(stats.sizes.min()), float(stats.sizes.max())
    if s_max == s_min:
        return 0.5 * (bounds.near + bounds.far)
    frac = (size_fraction - s_min) / (s_max - s_min)
    return bounds.far - (bounds.far - bounds.near) * frac


def sample_root_depth(stats: BBoxStats, bounds: DepthBounds, rng):
    """Draw a size fraction uniformly from the stats and map it to depth."""
    rng = check_rng(rng)
    size = stats.sizes[int(rng.integers(len(stats)))]
    return depth_from_size(size, stats, bounds)


def select_center_window(stats: BBoxStats, box_size):
    """Indices of entries within +-10% of ``box_size``, widening the
    window by x1.5 until at least two match or it covers everything."""
    if not 0.0 < box_size <= 1.0:
        raise ValueError("rendered box size must lie in (0, 1]")
    half = CENTER_WINDOW * box_size
    while True:
        idx = np.flatnonzero(
            (stats.sizes >= box_size - half) & (stats.sizes <= box_size + half)
        )
        if len(idx) >= 2:
            return idx
        if box_size - half <= stats.sizes.min() and box_size + half >= stats.sizes.max():
            return np.arange(len(stats))
        half *= WINDOW_GROWTH


def sample_center(stats: BBoxStats, rendered_box_size, rng):
    """Draw a target center from a diagonal Gaussian fitted to the centers
    of similarly-sized observed boxes."""
    rng = check_rng(rng)
    idx = select_center_window(stats, rendered_box_size)
    chosen = stats.centers[idx]
    mean = chosen.mean(axis=0)
    if len(chosen) >= 2:
        std = chosen.std(axis=0, ddof=1)
    else:
        std = np.zeros(2)
    return mean + rng.standard_normal(2) * std


def clamp_translation(dog_box: PixelBox, cp, image_size):
    """Integer translation aligning the box center with cp, reduced per
    axis so the box stays inside the image.

    Each axis clamps independently: if moving the full amount on an axis
    would push the box out of bounds, that axis's translation shrinks to
    the largest in-bounds magnitude (zero if the box is wider or taller
    than the image); the other axis is unaffected.
    """
    width, height = image_size
    if not dog_box.intersects(width, height):
        raise ValueError("dog box does not intersect the image")
    center_x, center_y = dog_box.center
    dx = round(cp[0] * width - center_x)
    dy = round(cp[1] * height - center_y)

    if dog_box.width > width:
        dx = 0
    else:
        dx = min(max(dx, -dog_box.x0), (width - 1) - dog_box.x1)
    if dog_box.height > height:
        dy = 0
    else:
        dy = min(max(dy, -dog_box.y0), (height - 1) - dog_box.y1)
    return int(dx), int(dy)


# -- deriving stats from annotations --------------------------------------

def derive_bbox_stats(records):
    """Build stats from joint-annotation records.

    Each record is ``{"image_w": int, "image_h": int, "joints": [[x, y], ...]}``;
    joints outside the image are dropped and records with fewer than two
    surviving joints are skipped (counted and warned about).

    Returns ``(BBoxStats, n_skipped)``.
    """
    sizes, centers = [], []
    skipped = 0
    for rec in records:
        w, h = float(rec["image_w"]), float(rec["image_h"])
        joints = np.asarray(rec["joints"], dtype=float).reshape(-1, 2)
        ok = (
            (joints[:, 0] >= 0) & (joints[:, 0] < w)
            & (joints[:, 1] >= 0) & (joints[:, 1] < h)
        )
        joints = joints[ok]
        if len(joints) < 2:
            skipped += 1
            continue
        lo, hi = joints.min(axis=0), joints.max(axis=0)
        area = (hi[0] - lo[0]) * (hi[1] - lo[1])
        if area <= 0:
            skipped += 1
            continue
        sizes.append(area / (w * h))
        centers.append(((lo[0] + hi[0]) / 2.0 / w, (lo[1] + hi[1]) / 2.0 / h))
    if not sizes:
        raise ValueError("no usable annotation records")
    if skipped:
        log.warning("skipped %d annotation records with fewer than 2 in-image joints", skipped)
    return BBoxStats(np.array(sizes), np.array(centers)), skipped


def read_annotations_jsonl(path):
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


# -- stats file format -----------------------------------------------------

def save_stats_csv(path, stats: BBoxStats):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["size_fraction", "cx", "cy"])
        for size, (cx, cy) in zip(stats.sizes, stats.centers):
            writer.writerow([f"{size:.8g}", f"{cx:.8g}", f"{cy:.8g}"])


def load_stats_csv(path) -> BBoxStats:
    sizes, centers = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["size_fraction", "cx", "cy"]:
            raise ValueError(f"{path}: expected header 'size_fraction,cx,cy'")
        for row in reader:
            if not row:
                continue
            sizes.append(float(row[0]))
            centers.append((float(row[1]), float(row[2])))
    return BBoxStats(np.array(sizes), np.array(centers))


def make_synthetic_bbox_stats(n=2000, seed=0) -> BBoxStats:
    """Stand-in stats when no real annotation dump is available: log-normal
    box sizes, centers biased toward the middle of the frame. Clearly
    synthetic; derive real stats from annotations when you have them."""
    rng = np.random.default_rng(seed)
    sizes = np.clip(rng.lognormal(mean=np.log(0.16), sigma=0.55, size=n), 0.01, 0.85)
    cx = np.clip(rng.normal(0.5, 0.12, size=n), 0.05, 0.95)
    cy = np.clip(rng.normal(0.52, 0.08, size=n), 0.05, 0.95)
    return BBoxStats(sizes, np.stack([cx, cy], axis=1))
