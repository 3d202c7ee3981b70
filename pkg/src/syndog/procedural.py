"""Deterministic procedural quadruped assets.

Builds a rigged dog mesh (ellipsoid torso, tapered-tube limbs/neck/tail,
head, muzzle, ear stubs) over a 25-joint skeleton, with skinning weights
assigned by distance falloff to the nearest bones. Also provides
proportion-perturbed variants for fitting a shape space, and a procedural
stand/walk pose library.

Axes: +x forward (nose), +y up, +z to the dog's left. Units are meters.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace, fields

import numpy as np

from .pca import PcaModel, SampleMatrix, fit_pca, LAYOUT_MESH
from .rigging import (
    Joint,
    PoseLibrary,
    RiggedMesh,
    Skeleton,
    SkinningWeights,
)
from .transforms import quat_from_euler_xyz_deg, quat_identity
from .validation import check_rng

log = logging.getLogger(__name__)

MIN_FACE_BUDGET = 200
DEFAULT_FACE_BUDGET = 4848

WEIGHT_EPS = 0.015      # softening length for inverse-square bone falloff
JITTER_BUMPS = 6


@dataclass(frozen=True)
class DogProportions:
    """Body dimensions in meters; all must be positive."""

    torso_length: float = 0.62
    torso_height: float = 0.30
    torso_width: float = 0.24
    leg_length: float = 0.42
    leg_radius: float = 0.035
    neck_length: float = 0.16
    head_size: float = 0.20
    tail_length: float = 0.30
    ear_size: float = 0.09

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"proportion {f.name} must be positive, got {value}")


@dataclass(frozen=True)
class DogConfig:
    proportions: DogProportions = DogProportions()
    face_budget: int = DEFAULT_FACE_BUDGET
    seed: int = 0
    jitter: float = 0.006   # amplitude of the smooth organic displacement field

    def __post_init__(self):
        if self.face_budget < MIN_FACE_BUDGET:
            raise ValueError(f"face budget must be at least {MIN_FACE_BUDGET}")


# -- primitive builders ----------------------------------------------------

def _orient_outward(vertices, faces):
    """Flip winding if the closed mesh's signed volume is negative."""
    shifted = vertices - vertices.mean(axis=0)
    tri = shifted[faces]
    volume = np.einsum("ij,ij->", tri[:, 0], np.cross(tri[:, 1], tri[:, 2])) / 6.0
    if volume < 0:
        faces = faces[:, [0, 2, 1]]
    return faces


def build_ellipsoid(center, radii, n_lat, n_lon):
    """UV-sphere ellipsoid with poles along +y; outward-wound triangles."""
    center = np.asarray(center, dtype=float)
    rx, ry, rz = radii
    verts = [center + np.array([0.0, ry, 0.0])]
    for i in range(1, n_lat):
        theta = np.pi * i / n_lat
        y = np.cos(theta)
        s = np.sin(theta)
        for k in range(n_lon):
            phi = 2.0 * np.pi * k / n_lon
            verts.append(center + np.array([rx * s * np.cos(phi), ry * y, rz * s * np.sin(phi)]))
    verts.append(center + np.array([0.0, -ry, 0.0]))
    verts = np.array(verts)

    faces = []
    ring = lambda i, k: 1 + (i - 1) * n_lon + (k % n_lon)
    bottom = len(verts) - 1
    for k in range(n_lon):
        faces.append([0, ring(1, k + 1), ring(1, k)])
    for i in range(1, n_lat - 1):
        for k in range(n_lon):
            a, b = ring(i, k), ring(i, k + 1)
            c, d = ring(i + 1, k), ring(i + 1, k + 1)
            faces.append([a, b, d])
            faces.append([a, d, c])
    for k in range(n_lon):
        faces.append([bottom, ring(n_lat - 1, k), ring(n_lat - 1, k + 1)])
    faces = np.array(faces, dtype=np.int64)
    return verts, _orient_outward(verts, faces)


def ellipsoid_face_count(n_lat, n_lon):
    return 2 * n_lon * (n_lat - 1)


def build_tube(p0, p1, r0, r1, n_radial, n_len):
    """Capped tapered tube from p0 to p1; outward-wound triangles."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    axis = p1 - p0
    length = np.linalg.norm(axis)
    if length == 0:
        raise ValueError("tube endpoints coincide")
    axis = axis / length
    ref = np.array([0.0, 1.0, 0.0]) if abs(axis[1]) < 0.9 else np.array([1.0, 0.0, 0.0])
    u = np.cross(axis, ref)
    u /= np.linalg.norm(u)
    v = np.cross(axis, u)

    verts = [p0]
    for i in range(n_len + 1):
        t = i / n_len
        c = p0 + (p1 - p0) * t
        r = r0 + (r1 - r0) * t
        for k in range(n_radial):
            phi = 2.0 * np.pi * k / n_radial
            verts.append(c + r * (np.cos(phi) * u + np.sin(phi) * v))
    verts.append(p1)
    verts = np.array(verts)

    faces = []
    ring = lambda i, k: 1 + i * n_radial + (k % n_radial)
    top_cap, bottom_cap = 0, len(verts) - 1
    for k in range(n_radial):
        faces.append([top_cap, ring(0, k), ring(0, k + 1)])
    for i in range(n_len):
        for k in range(n_radial):
            a, b = ring(i, k), ring(i, k + 1)
            c, d = ring(i + 1, k), ring(i + 1, k + 1)
            faces.append([a, b, d])
            faces.append([a, d, c])
    for k in range(n_radial):
        faces.append([bottom_cap, ring(n_len, k + 1), ring(n_len, k)])
    faces = np.array(faces, dtype=np.int64)
    return verts, _orient_outward(verts, faces)


def tube_face_count(n_radial, n_len):
    return 2 * n_radial * n_len + 2 * n_radial


# -- skeleton --------------------------------------------------------------

def _joint_table(p: DogProportions):
    """(name, parent name, local offset) rows in topological order."""
    L, TH, TW = p.torso_length, p.torso_height, p.torso_width
    LEG, NK, HD, TL = p.leg_length, p.neck_length, p.head_size, p.tail_length
    hip = 0.35 * TH + LEG  # root height putting the paws near the ground

    rows = [
        ("root", None, (0.0, hip, 0.0)),
        ("spine1", "root", (L / 3, 0.0, 0.0)),
        ("spine2", "spine1", (L / 3, 0.0, 0.0)),
        ("spine3", "spine2", (L / 3, 0.0, 0.0)),
        ("neck", "spine3", (0.05, 0.28 * TH, 0.0)),
        ("head", "neck", (0.7 * NK, 0.7 * NK, 0.0)),
        ("jaw", "head", (0.45 * HD, -0.12 * HD, 0.0)),
        ("ear_l", "head", (-0.05 * HD, 0.38 * HD, 0.28 * HD)),
        ("ear_r", "head", (-0.05 * HD, 0.38 * HD, -0.28 * HD)),
    ]
    for side, sz in (("l", 1.0), ("r", -1.0)):
        rows += [
            (f"leg_f{side}_upper", "spine3", (0.02, -0.35 * TH, sz * 0.42 * TW)),
            (f"leg_f{side}_lower", f"leg_f{side}_upper", (0.0, -0.45 * LEG, 0.0)),
            (f"leg_f{side}_foot", f"leg_f{side}_lower", (0.0, -0.35 * LEG, 0.0)),
        ]
    for side, sz in (("l", 1.0), ("r", -1.0)):
        rows += [
            (f"leg_h{side}_upper", "root", (0.02, -0.35 * TH, sz * 0.42 * TW)),
            (f"leg_h{side}_lower", f"leg_h{side}_upper", (0.0, -0.45 * LEG, 0.0)),
            (f"leg_h{side}_foot", f"leg_h{side}_lower", (0.0, -0.35 * LEG, 0.0)),
        ]
    rows += [
        ("tail1", "root", (-0.12 * L, 0.18 * TH, 0.0)),
        ("tail2", "tail1", (-TL / 3, 0.08 * TL, 0.0)),
        ("tail3", "tail2", (-TL / 3, 0.04 * TL, 0.0)),
        ("tail4", "tail3", (-TL / 3, 0.0, 0.0)),
    ]
    return rows


def build_dog_skeleton(p: DogProportions) -> Skeleton:
    rows = _joint_table(p)
    index = {name: i for i, (name, _, _) in enumerate(rows)}
    joints = tuple(
        Joint(
            name=name,
            parent=-1 if parent is None else index[parent],
            rest_rotation=quat_identity(),
            rest_translation=np.array(offset),
        )
        for name, parent, offset in rows
    )
    return Skeleton(joints)


# -- body parts ------------------------------------------------------------

def _part_specs(p: DogProportions, joints):
    """Primitive descriptors: (kind, geometry args, base (a, b) divisions)."""
    L, TH, TW = p.torso_length, p.torso_height, p.torso_width
    LEG, LR, HD, TL, ER = p.leg_length, p.leg_radius, p.head_size, p.tail_length, p.ear_size
    j = joints  # name -> rest position

    specs = [
        ("ellipsoid", ((L / 2, j["root"][1] + 0.02 * TH, 0.0), (0.62 * L, 0.52 * TH, 0.5 * TW)), (10, 14)),
        ("tube", (j["neck"], j["head"], 0.22 * TH, 0.30 * HD), (8, 3)),
        ("ellipsoid", (j["head"] + np.array([0.1 * HD, 0.05 * HD, 0.0]), (0.5 * HD, 0.42 * HD, 0.38 * HD)), (7, 9)),
        ("ellipsoid", (j["jaw"] + np.array([0.12 * HD, 0.0, 0.0]), (0.32 * HD, 0.16 * HD, 0.18 * HD)), (4, 6)),
        ("ellipsoid", (j["ear_l"] + np.array([0.0, 0.3 * ER, 0.0]), (0.22 * ER, 0.5 * ER, 0.12 * ER)), (3, 4)),
        ("ellipsoid", (j["ear_r"] + np.array([0.0, 0.3 * ER, 0.0]), (0.22 * ER, 0.5 * ER, 0.12 * ER)), (3, 4)),
    ]
    for leg in ("fl", "fr", "hl", "hr"):
        upper, lower, foot = (j[f"leg_{leg}_{seg}"] for seg in ("upper", "lower", "foot"))
        paw_tip = foot + np.array([0.1 * LEG, -0.18 * LEG, 0.0])
        specs += [
            ("tube", (upper, lower, 1.3 * LR, 1.0 * LR), (7, 2)),
            ("tube", (lower, foot, 1.0 * LR, 0.8 * LR), (7, 2)),
            ("tube", (foot, paw_tip, 0.8 * LR, 0.85 * LR), (7, 2)),
        ]
    tail_pts = [j[f"tail{i}"] for i in (1, 2, 3, 4)]
    tail_pts.append(tail_pts[-1] + np.array([-0.18 * TL, 0.0, 0.0]))
    tail_radii = [0.8 * LR, 0.65 * LR, 0.5 * LR, 0.35 * LR, 0.2 * LR]
    for i in range(4):
        specs.append(
            ("tube", (tail_pts[i], tail_pts[i + 1], tail_radii[i], tail_radii[i + 1]), (5, 1))
        )
    return specs


def _divisions(kind, base, res):
    a, b = base
    if kind == "ellipsoid":
        return max(3, round(a * res)), max(3, round(b * res))
    return max(3, round(a * res)), max(1, round(b * res))


def _face_count(specs, res):
    total = 0
    for kind, _, base in specs:
        a, b = _divisions(kind, base, res)
        total += ellipsoid_face_count(a, b) if kind == "ellipsoid" else tube_face_count(a, b)
    return total


def plan_resolution(specs, face_budget):
    """Resolution scale whose total face count is closest to the budget."""
    lo, hi = 0.2, 40.0
    if _face_count(specs, hi) < face_budget:
        raise ValueError(f"face budget {face_budget} is not achievable")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _face_count(specs, mid) >= face_budget:
            hi = mid
        else:
            lo = mid
    candidates = [(abs(_face_count(specs, r) - face_budget), r) for r in (lo, hi)]
    return min(candidates)[1]


def _jitter_field(vertices, amplitude, rng):
    """Smooth random displacement: a sum of wide Gaussian radial bumps."""
    lo, hi = vertices.min(axis=0), vertices.max(axis=0)
    span = np.linalg.norm(hi - lo)
    out = np.zeros_like(vertices)
    for _ in range(JITTER_BUMPS):
        center = lo + rng.random(3) * (hi - lo)
        amp = rng.uniform(-amplitude, amplitude)
        sigma = rng.uniform(0.15, 0.35) * span
        delta = vertices - center
        dist = np.linalg.norm(delta, axis=1, keepdims=True)
        direction = delta / np.maximum(dist, 1e-9)
        out += amp * np.exp(-0.5 * (dist / sigma) ** 2) * direction
    return out


def _bone_segments(skeleton: Skeleton):
    """Per-joint influence segment: joint position to mean child position
    (leaves extend along their own bone direction)."""
    pos = skeleton.rest_joint_positions()
    children = [[] for _ in range(skeleton.n_joints)]
    for i, joint in enumerate(skeleton.joints):
        if joint.parent >= 0:
            children[joint.parent].append(i)
    starts = pos.copy()
    ends = np.empty_like(pos)
    for i in range(skeleton.n_joints):
        if children[i]:
            ends[i] = pos[list(children[i])].mean(axis=0)
        elif skeleton.joints[i].parent >= 0:
            direction = pos[i] - pos[skeleton.joints[i].parent]
            ends[i] = pos[i] + 0.6 * direction
        else:
            ends[i] = pos[i]
    return starts, ends


def _segment_distances(points, starts, ends):
    """Distance of each point to each segment, (n_points, n_segments)."""
    d = ends - starts                                    # (s, 3)
    len2 = np.maximum(np.einsum("sd,sd->s", d, d), 1e-18)
    rel = points[:, None, :] - starts[None, :, :]        # (p, s, 3)
    t = np.clip(np.einsum("psd,sd->ps", rel, d) / len2, 0.0, 1.0)
    nearest = starts[None] + t[:, :, None] * d[None]
    return np.linalg.norm(points[:, None, :] - nearest, axis=2)


def compute_skinning_weights(vertices, skeleton: Skeleton) -> SkinningWeights:
    """Inverse-square falloff to the four nearest bone segments."""
    starts, ends = _bone_segments(skeleton)
    dist = _segment_distances(vertices, starts, ends)
    raw = 1.0 / (dist**2 + WEIGHT_EPS**2)
    keep = np.argpartition(raw, -4, axis=1)[:, -4:]
    matrix = np.zeros_like(raw)
    rows = np.arange(raw.shape[0])[:, None]
    matrix[rows, keep] = raw[rows, keep]
    matrix /= matrix.sum(axis=1, keepdims=True)
    return SkinningWeights(matrix)


def generate_canonical_dog(config: DogConfig = DogConfig()) -> RiggedMesh:
    """Build the procedural rigged dog; deterministic in the config."""
    skeleton = build_dog_skeleton(config.proportions)
    joint_pos = dict(zip(skeleton.names, skeleton.rest_joint_positions()))
    specs = _part_specs(config.proportions, joint_pos)
    res = plan_resolution(specs, config.face_budget)

    all_verts, all_faces = [], []
    offset = 0
    for kind, args, base in specs:
        a, b = _divisions(kind, base, res)
        if kind == "ellipsoid":
            verts, faces = build_ellipsoid(args[0], args[1], a, b)
        else:
            verts, faces = build_tube(args[0], args[1], args[2], args[3], a, b)
        all_verts.append(verts)
        all_faces.append(faces + offset)
        offset += len(verts)
    vertices = np.concatenate(all_verts)
    faces = np.concatenate(all_faces)

    achieved = len(faces)
    if abs(achieved - config.face_budget) > 0.02 * config.face_budget:
        log.warning(
            "procedural dog reached %d faces for a budget of %d", achieved, config.face_budget
        )
    else:
        log.info("procedural dog: %d faces (budget %d)", achieved, config.face_budget)

    if config.jitter > 0:
        rng = np.random.default_rng(config.seed)
        vertices = vertices + _jitter_field(vertices, config.jitter, rng)

    weights = compute_skinning_weights(vertices, skeleton)
    return RiggedMesh(vertices, faces, skeleton, weights)


def dog_variants(base: DogConfig, n_variants, rng, spread=0.15):
    """Proportion-perturbed dogs sharing the base topology."""
    rng = check_rng(rng)
    out = []
    for _ in range(n_variants):
        factors = {
            f.name: getattr(base.proportions, f.name) * (1.0 + rng.uniform(-spread, spread))
            for f in fields(base.proportions)
        }
        cfg = replace(
            base,
            proportions=DogProportions(**factors),
            seed=int(rng.integers(2**31)),
        )
        out.append(generate_canonical_dog(cfg))
    return out


def synthesize_shape_pca(meshes) -> PcaModel:
    """Fit the shape space over flattened vertex coordinates."""
    if len(meshes) < 2:
        raise ValueError("need at least 2 meshes to fit a shape space")
    first = meshes[0]
    for mesh in meshes[1:]:
        if mesh.n_vertices != first.n_vertices or not np.array_equal(mesh.faces, first.faces):
            raise ValueError("all meshes must share topology (faces and vertex count)")
    data = np.stack([m.vertices.reshape(-1) for m in meshes], axis=1)
    return fit_pca(SampleMatrix(data, layout=LAYOUT_MESH, dims=(first.n_vertices,)))


def mesh_from_shape_vector(vector, template: RiggedMesh) -> RiggedMesh:
    vertices = np.asarray(vector, dtype=float).reshape(template.n_vertices, 3)
    return template.with_vertices(vertices)


# -- pose library ------------------------------------------------------------

def _zero_pose(names):
    return {name: np.zeros(3) for name in names}

def _set(pose, name, rx=0.0, ry=0.0, rz=0.0):
    pose[name] = np.array([rx, ry, rz], dtype=float)


def build_pose_library_degrees(skeleton: Skeleton, n_walk_phases=12):
    """Named stand/walk poses as per-joint Euler XYZ degrees.

    Legs hang along -y, so swinging a leg forward is a rotation about +z.
    The walk is a trot: diagonal leg pairs move in phase.
    """
    names = skeleton.names
    poses = {}

    def finish(tag, pose):
        poses[tag] = np.stack([pose[n] for n in names])

    base = _zero_pose(names)
    _set(base, "tail1", rz=18.0)
    _set(base, "tail2", rz=8.0)
    finish("stand_00", base)

    for i, (head_yaw, tail_yaw) in enumerate([(14, 12), (-14, -12), (0, 25), (22, -8)]):
        pose = _zero_pose(names)
        _set(pose, "head", ry=head_yaw, rz=4.0)
        _set(pose, "neck", rz=6.0)
        _set(pose, "tail1", ry=tail_yaw, rz=16.0)
        _set(pose, "tail2", ry=tail_yaw * 0.5, rz=6.0)
        finish(f"stand_{i + 1:02d}", pose)

    for phase in range(n_walk_phases):
        t = 2.0 * np.pi * phase / n_walk_phases
        swing, counter = 20.0 * np.sin(t), 20.0 * np.sin(t + np.pi)
        pose = _zero_pose(names)
        for leg, s in (("fl", swing), ("hr", swing), ("fr", counter), ("hl", counter)):
            _set(pose, f"leg_{leg}_upper", rz=s)
            _set(pose, f"leg_{leg}_lower", rz=max(0.0, -0.8 * s))
            _set(pose, f"leg_{leg}_foot", rz=0.3 * s)
        _set(pose, "spine2", ry=2.5 * np.sin(t))
        _set(pose, "neck", rz=5.0 + 2.0 * np.sin(t))
        _set(pose, "tail1", ry=10.0 * np.sin(t), rz=14.0)
        finish(f"walk_{phase:02d}", pose)
    return {name: poses[name] for name in sorted(poses)}


def build_pose_library(skeleton: Skeleton, n_walk_phases=12) -> PoseLibrary:
    degrees = build_pose_library_degrees(skeleton, n_walk_phases)
    quats = {
        name: np.stack([quat_from_euler_xyz_deg(row) for row in angles])
        for name, angles in degrees.items()
    }
    return PoseLibrary(tuple(skeleton.names), quats)
