"""Perspective z-buffer rasterizer.

Turns a posed, per-face-textured triangle mesh plus camera and lighting
into an RGB image, silhouette mask, part map, depth buffer and projected
joints. Shading is flat (per-face normal, ambient plus one directional
light), coverage follows the pixel-center rule with top-left tie-breaking,
and depth is perspective-correct (1/w interpolated in screen space).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .boxes import PixelBox, mask_bbox
from .validation import as_float_array, check_positive, check_rng

DEFAULT_IMAGE_SIZE = (455, 256)
DEFAULT_FOCAL = 500.0
NEAR_EPS = 1e-3
PART_BACKGROUND = -1


@dataclass(frozen=True)
class Camera:
    """Pinhole camera; the optical axis looks down -z, +y is up in world.

    ``extrinsic`` maps world points into the camera frame. Pixel (u, v)
    has u growing right and v growing down, so v flips the sign of y.
    """

    focal: float = DEFAULT_FOCAL
    principal: tuple = None
    size: tuple = DEFAULT_IMAGE_SIZE       # (W, H)
    extrinsic: np.ndarray = None

    def __post_init__(self):
        check_positive(self.focal, "focal length")
        width, height = self.size
        if width < 1 or height < 1:
            raise ValueError("image size must be positive")
        principal = self.principal
        if principal is None:
            principal = (width / 2.0, height / 2.0)
        if not (0 <= principal[0] < width and 0 <= principal[1] < height):
            raise ValueError("principal point must lie inside the image")
        extrinsic = np.eye(4) if self.extrinsic is None else as_float_array(self.extrinsic, "extrinsic")
        if extrinsic.shape != (4, 4):
            raise ValueError("extrinsic must be a 4x4 rigid transform")
        object.__setattr__(self, "principal", (float(principal[0]), float(principal[1])))
        object.__setattr__(self, "size", (int(width), int(height)))
        object.__setattr__(self, "extrinsic", extrinsic)

    def to_camera(self, points):
        points = np.atleast_2d(points)
        return points @ self.extrinsic[:3, :3].T + self.extrinsic[:3, 3]

    def project(self, points):
        """Project world points.

        Returns ``(pixels, depth)``: depth is distance along the optical
        axis (positive in front). Points at or behind the camera plane get
        NaN pixels.
        """
        cam = self.to_camera(points)
        depth = -cam[:, 2]
        cx, cy = self.principal
        with np.errstate(divide="ignore", invalid="ignore"):
            u = cx + self.focal * cam[:, 0] / depth
            v = cy - self.focal * cam[:, 1] / depth
        pixels = np.stack([u, v], axis=1)
        pixels[depth <= NEAR_EPS] = np.nan
        return pixels, depth


@dataclass(frozen=True)
class Lighting:
    """One ambient term plus one directional light.

    ``direction`` points from the surface toward the light and must be
    unit-norm.
    """

    ambient: np.ndarray
    direction: np.ndarray
    directional: np.ndarray

    def __post_init__(self):
        ambient = as_float_array(self.ambient, "ambient").reshape(3)
        direction = as_float_array(self.direction, "direction").reshape(3)
        directional = as_float_array(self.directional, "directional").reshape(3)
        if abs(np.linalg.norm(direction) - 1.0) > 1e-6:
            raise ValueError("light direction must be unit-norm")
        object.__setattr__(self, "ambient", ambient)
        object.__setattr__(self, "direction", direction)
        object.__setattr__(self, "directional", directional)

    @classmethod
    def flat_white(cls):
        return cls(np.ones(3), np.array([0.0, 0.0, 1.0]), np.zeros(3))


@dataclass(frozen=True)
class LightingRanges:
    ambient: tuple = (0.3, 0.7)
    directional: tuple = (0.2, 0.8)

    def __post_init__(self):
        for name, (lo, hi) in (("ambient", self.ambient), ("directional", self.directional)):
            if not (0.0 <= lo <= hi <= 1.0):
                raise ValueError(f"{name} range must satisfy 0 <= lo <= hi <= 1")


def sample_lighting(rng, ranges: LightingRanges = LightingRanges()) -> Lighting:
    """Random ambient and directional light, direction uniform on the
    camera-side hemisphere (+z pole)."""
    rng = check_rng(rng)
    ambient = rng.uniform(ranges.ambient[0], ranges.ambient[1], size=3)
    directional = rng.uniform(ranges.directional[0], ranges.directional[1], size=3)
    z = rng.random()
    phi = rng.uniform(0.0, 2.0 * np.pi)
    s = np.sqrt(max(0.0, 1.0 - z * z))
    direction = np.array([s * np.cos(phi), s * np.sin(phi), z])
    direction /= np.linalg.norm(direction)
    return Lighting(ambient, direction, directional)


@dataclass
class RenderOutput:
    rgb: np.ndarray             # (H, W, 3) floats in [0, 1], black off-mask
    mask: np.ndarray            # (H, W) bool silhouette
    part_map: np.ndarray        # (H, W) int16, PART_BACKGROUND off-mask
    depth: np.ndarray           # (H, W) float, +inf off-mask
    joints_2d: np.ndarray       # (J, 2) pixel coords (NaN behind camera)
    joints_visible: np.ndarray  # (J,) bool: in front and inside the image
    bbox: PixelBox | None

    def check_consistent(self, atol=0.0):
        """Mask, depth, part map and rgb must agree pixel-for-pixel."""
        finite = np.isfinite(self.depth)
        if not np.array_equal(finite, self.mask):
            raise AssertionError("depth finiteness disagrees with mask")
        if not np.array_equal(self.part_map != PART_BACKGROUND, self.mask):
            raise AssertionError("part map coverage disagrees with mask")
        off = ~self.mask
        if self.rgb[off].max(initial=0.0) > atol:
            raise AssertionError("rgb is nonzero outside the mask")


def texel_lookup(texture, face_index, barycentric):
    """Texel for one face at given barycentrics.

    Each barycentric axis maps to its texel axis as
    ``index = floor(b * (d - 1) + 0.5)``.
    """
    texture = np.asarray(texture)
    f, d = texture.shape[0], texture.shape[1]
    if not 0 <= face_index < f:
        raise ValueError(f"face index {face_index} out of range for {f} faces")
    b = as_float_array(barycentric, "barycentric").reshape(3)
    if b.min() < -1e-9 or abs(b.sum() - 1.0) > 1e-6:
        raise ValueError("barycentrics must be non-negative and sum to 1")
    idx = np.clip(np.floor(b * (d - 1) + 0.5).astype(int), 0, d - 1)
    return texture[face_index, idx[0], idx[1], idx[2]]


def _face_shades(vertices, faces, lighting):
    """Per-face RGB multiplier from flat Lambert shading (world space)."""
    tri = vertices[faces]
    normals = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    norms = np.linalg.norm(normals, axis=1, keepdims=True)
    normals = np.divide(normals, norms, out=np.zeros_like(normals), where=norms > 0)
    lambert = np.maximum(normals @ lighting.direction, 0.0)
    return lighting.ambient[None, :] + lambert[:, None] * lighting.directional[None, :]


def _clip_near(points_cam, depths, eps=NEAR_EPS):
    """Sutherland-Hodgman clip of one camera-space triangle against the
    near plane. Returns (points, depths, corner barycentrics) of the kept
    polygon; barycentrics refer to the original triangle."""
    bary = np.eye(3)
    out_pts, out_depth, out_bary = [], [], []
    for i in range(3):
        j = (i + 1) % 3
        a_in = depths[i] > eps
        b_in = depths[j] > eps
        if a_in:
            out_pts.append(points_cam[i])
            out_depth.append(depths[i])
            out_bary.append(bary[i])
        if a_in != b_in:
            t = (eps - depths[i]) / (depths[j] - depths[i])
            out_pts.append(points_cam[i] + t * (points_cam[j] - points_cam[i]))
            out_depth.append(eps)
            out_bary.append(bary[i] + t * (bary[j] - bary[i]))
    return np.array(out_pts), np.array(out_depth), np.array(out_bary)


def _is_top_left(ax, ay, bx, by):
    # Positive-area winding in x-right/y-down pixel coords: edges going up
    # are left edges, horizontal edges going right are top edges.
    return (by < ay) or (by == ay and bx > ax)


def render(
    vertices,
    faces,
    texture,
    camera: Camera,
    lighting: Lighting,
    face_parts=None,
    joints_3d=None,
) -> RenderOutput:
    """Rasterize a textured mesh to image-space buffers.

    ``texture`` has shape (f, d, d, d, 3) matching the face count; pixel
    color is texel times the face's flat shade, clamped to [0, 1].
    ``face_parts`` fills the part map (background is -1); ``joints_3d``
    are projected with the same camera. An empty render (no visible
    geometry) is a valid output, not an error.
    """
    vertices = as_float_array(vertices, "vertices")
    faces = np.asarray(faces, dtype=np.int64)
    texture = np.asarray(texture, dtype=np.float64)
    if texture.ndim != 5 or texture.shape[0] != faces.shape[0]:
        raise ValueError(
            f"texture has {texture.shape[0] if texture.ndim == 5 else '?'} faces, "
            f"mesh has {faces.shape[0]}"
        )
    d = texture.shape[1]
    width, height = camera.size
    if face_parts is None:
        face_parts = np.zeros(faces.shape[0], dtype=np.int16)
    else:
        face_parts = np.asarray(face_parts, dtype=np.int16)

    rgb = np.zeros((height, width, 3))
    depth_buf = np.full((height, width), np.inf)
    part_map = np.full((height, width), PART_BACKGROUND, dtype=np.int16)
    face_shades = _face_shades(vertices, faces, lighting)

    cam_pts = camera.to_camera(vertices)
    depths = -cam_pts[:, 2]
    cx, cy = camera.principal
    focal = camera.focal

    tri_depth = depths[faces]                      # (f, 3)
    front = tri_depth > NEAR_EPS
    n_front = front.sum(axis=1)

    for fi in np.flatnonzero(n_front > 0):
        if n_front[fi] == 3:
            pts = cam_pts[faces[fi]]
            w = tri_depth[fi]
            corner_bary = np.eye(3)
            polys = [(pts, w, corner_bary)]
        else:
            pts, w, corner_bary = _clip_near(cam_pts[faces[fi]], tri_depth[fi])
            if len(pts) < 3:
                continue
            polys = [
                (pts[[0, k, k + 1]], w[[0, k, k + 1]], corner_bary[[0, k, k + 1]])
                for k in range(1, len(pts) - 1)
            ]
        for pts, w, corner_bary in polys:
            sx = cx + focal * pts[:, 0] / w
            sy = cy - focal * pts[:, 1] / w
            _raster_triangle(
                sx, sy, 1.0 / w, corner_bary, fi,
                texture, d, face_shades[fi], face_parts[fi],
                rgb, depth_buf, part_map, width, height,
            )

    mask = np.isfinite(depth_buf)

    n_joints = 0 if joints_3d is None else len(joints_3d)
    if n_joints:
        joints_2d, jdepth = camera.project(np.asarray(joints_3d, dtype=float))
        in_img = (
            (jdepth > NEAR_EPS)
            & (joints_2d[:, 0] >= 0) & (joints_2d[:, 0] < width)
            & (joints_2d[:, 1] >= 0) & (joints_2d[:, 1] < height)
        )
    else:
        joints_2d = np.zeros((0, 2))
        in_img = np.zeros(0, dtype=bool)

    return RenderOutput(
        rgb=rgb,
        mask=mask,
        part_map=part_map,
        depth=depth_buf,
        joints_2d=joints_2d,
        joints_visible=in_img,
        bbox=mask_bbox(mask),
    )


def _raster_triangle(
    sx, sy, inv_w, corner_bary, face_index,
    texture, d, shade, part,
    rgb, depth_buf, part_map, width, height,
):
    # Orient to positive area in pixel coords (x right, y down).
    area2 = (sx[1] - sx[0]) * (sy[2] - sy[0]) - (sy[1] - sy[0]) * (sx[2] - sx[0])
    if area2 < 0:
        sx = sx[[0, 2, 1]]
        sy = sy[[0, 2, 1]]
        inv_w = inv_w[[0, 2, 1]]
        corner_bary = corner_bary[[0, 2, 1]]
        area2 = -area2
    if area2 < 1e-12:
        return

    x_lo = max(0, int(np.ceil(sx.min() - 0.5)))
    x_hi = min(width - 1, int(np.floor(sx.max() - 0.5)))
    y_lo = max(0, int(np.ceil(sy.min() - 0.5)))
    y_hi = min(height - 1, int(np.floor(sy.max() - 0.5)))
    if x_lo > x_hi or y_lo > y_hi:
        return

    px = np.arange(x_lo, x_hi + 1) + 0.5
    py = np.arange(y_lo, y_hi + 1) + 0.5
    gx, gy = np.meshgrid(px, py)

    inside = np.ones(gx.shape, dtype=bool)
    lam = np.empty((3,) + gx.shape)
    for k in range(3):
        a, b = (k + 1) % 3, (k + 2) % 3  # edge opposite vertex k
        e = (sx[b] - sx[a]) * (gy - sy[a]) - (sy[b] - sy[a]) * (gx - sx[a])
        if _is_top_left(sx[a], sy[a], sx[b], sy[b]):
            inside &= e >= 0
        else:
            inside &= e > 0
        lam[k] = e / area2
    if not inside.any():
        return

    inv_w_pix = lam[0] * inv_w[0] + lam[1] * inv_w[1] + lam[2] * inv_w[2]
    depth = np.where(inv_w_pix > 0, 1.0 / np.maximum(inv_w_pix, 1e-300), np.inf)

    sub_depth = depth_buf[y_lo : y_hi + 1, x_lo : x_hi + 1]
    update = inside & (depth < sub_depth)
    if not update.any():
        return

    bary_sub = lam[:, update] * inv_w[:, None] / inv_w_pix[update]  # (3, n)
    orig_bary = corner_bary.T @ bary_sub                            # (3, n)
    idx = np.clip(np.floor(orig_bary * (d - 1) + 0.5).astype(int), 0, d - 1)
    texels = texture[face_index, idx[0], idx[1], idx[2]]            # (n, 3)
    colors = np.clip(texels * shade[None, :], 0.0, 1.0)

    sub_depth[update] = depth[update]
    rgb[y_lo : y_hi + 1, x_lo : x_hi + 1][update] = colors
    part_map[y_lo : y_hi + 1, x_lo : x_hi + 1][update] = part
