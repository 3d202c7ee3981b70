"""Rigged meshes: skeleton hierarchy, forward kinematics, linear blend
skinning and part labeling, plus the OBJ / sidecar-JSON asset formats."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .transforms import (
    check_unit_quat,
    quat_from_euler_xyz_deg,
    quat_identity,
    transform_from_quat,
    invert_rigid,
    upright_tilt_deg,
)
from .validation import as_float_array

WEIGHT_ROW_TOL = 1e-6
MAX_BONES_PER_VERTEX = 4
DEGENERATE_AREA = 1e-12

DEFAULT_UPRIGHT_TILT_DEG = 25.0


@dataclass(frozen=True)
class Joint:
    name: str
    parent: int                     # -1 for the root
    rest_rotation: np.ndarray       # unit quaternion
    rest_translation: np.ndarray    # offset from parent, meters

    def __post_init__(self):
        object.__setattr__(self, "rest_rotation", check_unit_quat(self.rest_rotation, "rest rotation"))
        object.__setattr__(self, "rest_translation", as_float_array(self.rest_translation, "rest translation").reshape(3))


@dataclass(frozen=True)
class Skeleton:
    joints: tuple

    def __post_init__(self):
        joints = tuple(self.joints)
        if not joints:
            raise ValueError("skeleton needs at least one joint")
        if joints[0].parent != -1:
            raise ValueError("joint 0 must be the root (parent -1)")
        for i, joint in enumerate(joints[1:], start=1):
            if not 0 <= joint.parent < i:
                raise ValueError(
                    f"joint {i} ({joint.name}) has parent {joint.parent}; "
                    "parents must precede children and only joint 0 is a root"
                )
        names = [j.name for j in joints]
        if len(set(names)) != len(names):
            raise ValueError("joint names must be unique")
        object.__setattr__(self, "joints", joints)

    @property
    def n_joints(self):
        return len(self.joints)

    @property
    def names(self):
        return [j.name for j in self.joints]

    @property
    def parents(self):
        return np.array([j.parent for j in self.joints], dtype=int)

    def rest_locals(self):
        """Per-joint 4x4 rest transforms relative to the parent."""
        return np.stack(
            [transform_from_quat(j.rest_rotation, j.rest_translation) for j in self.joints]
        )

    def rest_globals(self):
        """Rest-pose global transforms (identity pose, no root offset)."""
        locals_ = self.rest_locals()
        out = np.empty_like(locals_)
        out[0] = locals_[0]
        for i, joint in enumerate(self.joints[1:], start=1):
            out[i] = out[joint.parent] @ locals_[i]
        return out

    def rest_joint_positions(self):
        return self.rest_globals()[:, :3, 3].copy()


@dataclass(frozen=True)
class SkinningWeights:
    """Dense row-stochastic vertex-to-joint weights, <= 4 bones per vertex."""

    matrix: np.ndarray

    def __post_init__(self):
        m = as_float_array(self.matrix, "skinning weights")
        if m.ndim != 2:
            raise ValueError("weights must be (n_vertices, n_joints)")
        if m.size and m.min() < 0:
            raise ValueError("skinning weights must be non-negative")
        row_sums = m.sum(axis=1)
        if np.any(np.abs(row_sums - 1.0) > WEIGHT_ROW_TOL):
            worst = np.abs(row_sums - 1.0).max()
            raise ValueError(f"weight rows must sum to 1 (worst deviation {worst:.3g})")
        if np.any((m > 0).sum(axis=1) > MAX_BONES_PER_VERTEX):
            raise ValueError(f"at most {MAX_BONES_PER_VERTEX} bones may influence a vertex")
        object.__setattr__(self, "matrix", m)

    @property
    def n_vertices(self):
        return self.matrix.shape[0]

    @property
    def n_joints(self):
        return self.matrix.shape[1]


@dataclass(frozen=True)
class RiggedMesh:
    vertices: np.ndarray    # (n_v, 3) rest pose
    faces: np.ndarray       # (f, 3) vertex indices
    skeleton: Skeleton
    weights: SkinningWeights

    def __post_init__(self):
        vertices = as_float_array(self.vertices, "vertices")
        faces = np.asarray(self.faces)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise ValueError("vertices must be (n_v, 3)")
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise ValueError("faces must be (f, 3)")
        faces = faces.astype(np.int64)
        if faces.size and (faces.min() < 0 or faces.max() >= vertices.shape[0]):
            raise ValueError("face indices out of range")
        tri = vertices[faces]
        areas = 0.5 * np.linalg.norm(
            np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1
        )
        if faces.size and areas.min() < DEGENERATE_AREA:
            raise ValueError("mesh contains degenerate zero-area faces at rest")
        if self.weights.n_vertices != vertices.shape[0]:
            raise ValueError("weights row count must match vertex count")
        if self.weights.n_joints != self.skeleton.n_joints:
            raise ValueError("weights column count must match joint count")
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "faces", faces)

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_faces(self):
        return self.faces.shape[0]

    def with_vertices(self, vertices):
        return RiggedMesh(vertices, self.faces, self.skeleton, self.weights)


@dataclass(frozen=True)
class PoseParams:
    joint_rotations: np.ndarray     # (n_joints, 4) unit quaternions
    root_rotation: np.ndarray       # unit quaternion
    root_depth: float               # meters from the camera plane

    def __post_init__(self):
        rotations = as_float_array(self.joint_rotations, "joint rotations")
        if rotations.ndim != 2 or rotations.shape[1] != 4:
            raise ValueError("joint rotations must be (n_joints, 4)")
        norms = np.linalg.norm(rotations, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            raise ValueError("all joint rotations must be unit quaternions")
        root = check_unit_quat(self.root_rotation, "root rotation")
        object.__setattr__(self, "joint_rotations", rotations)
        object.__setattr__(self, "root_rotation", root)
        object.__setattr__(self, "root_depth", float(self.root_depth))

    @property
    def n_joints(self):
        return self.joint_rotations.shape[0]

    def check_upright(self, max_tilt_deg=DEFAULT_UPRIGHT_TILT_DEG):
        tilt = upright_tilt_deg(self.root_rotation)
        if tilt > max_tilt_deg:
            raise ValueError(f"root tilt {tilt:.1f} deg exceeds upright bound {max_tilt_deg}")
        return tilt

    @classmethod
    def rest(cls, skeleton: Skeleton, root_depth=0.0):
        rotations = np.tile(quat_identity(), (skeleton.n_joints, 1))
        return cls(rotations, quat_identity(), root_depth)


def forward_kinematics(skeleton: Skeleton, pose: PoseParams):
    """Global joint transforms and positions for a pose.

    Each joint composes its parent's global transform with its rest local
    transform and its pose rotation. The root is additionally rotated by
    the pose's root rotation and translated to ``(0, 0, -root_depth)``
    (the default camera looks down -z).

    Returns ``(globals, positions)``: (n_joints, 4, 4) and (n_joints, 3).
    """
    if pose.n_joints != skeleton.n_joints:
        raise ValueError(
            f"pose has {pose.n_joints} joints, skeleton has {skeleton.n_joints}"
        )
    locals_ = skeleton.rest_locals()
    root_xform = transform_from_quat(
        pose.root_rotation, np.array([0.0, 0.0, -pose.root_depth])
    )
    out = np.empty_like(locals_)
    for i, joint in enumerate(skeleton.joints):
        local = locals_[i] @ transform_from_quat(pose.joint_rotations[i])
        if i == 0:
            out[i] = root_xform @ local
        else:
            out[i] = out[joint.parent] @ local
    return out, out[:, :3, 3].copy()


def skinning_matrices(skeleton: Skeleton, globals_):
    """Per-joint ``G_j @ inv(G_rest_j)`` used by linear blend skinning."""
    rest = skeleton.rest_globals()
    return np.stack([globals_[j] @ invert_rigid(rest[j]) for j in range(len(rest))])


def apply_lbs(mesh: RiggedMesh, globals_):
    """Pose vertices: each is the weight-blended rigid transform of itself.

    ``globals_`` are the posed global joint transforms (from
    :func:`forward_kinematics`); the rest globals are taken from the mesh's
    own skeleton.
    """
    if globals_.shape[0] != mesh.skeleton.n_joints:
        raise ValueError("one global transform per joint required")
    skin = skinning_matrices(mesh.skeleton, globals_)
    blended = np.einsum("vj,jab->vab", mesh.weights.matrix, skin)
    return np.einsum("vab,vb->va", blended[:, :3, :3], mesh.vertices) + blended[:, :3, 3]


def vertex_part_labels(weights: SkinningWeights):
    """Dominant joint per vertex; ties resolve to the lowest joint index."""
    return np.argmax(weights.matrix, axis=1)


def face_part_labels(faces, vertex_labels):
    """Majority label of each face's three vertices, lowest index on ties."""
    tri = vertex_labels[np.asarray(faces)]
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    out = np.minimum(np.minimum(a, b), c)
    out = np.where(a == b, a, out)
    out = np.where(a == c, a, out)
    out = np.where(b == c, b, out)
    return out


def part_labels(mesh: RiggedMesh):
    """(per-vertex label, per-face label) from the skinning weights."""
    per_vertex = vertex_part_labels(mesh.weights)
    return per_vertex, face_part_labels(mesh.faces, per_vertex)


# -- asset files ---------------------------------------------------------

def save_obj(path, vertices, faces):
    """Minimal Wavefront OBJ writer (v/f records only, 1-based indices)."""
    with open(path, "w") as fh:
        for v in np.asarray(vertices, dtype=float):
            fh.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for f in np.asarray(faces, dtype=int):
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


def load_obj(path):
    vertices, faces = [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                vertices.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(tok.split("/")[0]) - 1 for tok in parts[1:]]
                if len(idx) != 3:
                    raise ValueError(f"{path}: only triangle faces are supported")
                faces.append(idx)
    return np.array(vertices, dtype=float), np.array(faces, dtype=np.int64)


def save_rig_json(path, skeleton: Skeleton, weights: SkinningWeights):
    """Sidecar rig file: joint list plus sparse per-vertex weight rows."""
    rows = []
    for row in weights.matrix:
        nz = np.flatnonzero(row)
        rows.append([[int(j), float(row[j])] for j in nz])
    doc = {
        "schema": 1,
        "joints": [
            {
                "name": j.name,
                "parent": j.parent,
                "rest_rotation_wxyz": [float(x) for x in j.rest_rotation],
                "rest_translation": [float(x) for x in j.rest_translation],
            }
            for j in skeleton.joints
        ],
        "weights": rows,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_rig_json(path):
    with open(path) as fh:
        doc = json.load(fh)
    joints = tuple(
        Joint(
            name=j["name"],
            parent=int(j["parent"]),
            rest_rotation=np.array(j["rest_rotation_wxyz"], dtype=float),
            rest_translation=np.array(j["rest_translation"], dtype=float),
        )
        for j in doc["joints"]
    )
    skeleton = Skeleton(joints)
    matrix = np.zeros((len(doc["weights"]), skeleton.n_joints))
    for v, row in enumerate(doc["weights"]):
        for joint_idx, weight in row:
            matrix[v, int(joint_idx)] = float(weight)
    return skeleton, SkinningWeights(matrix)


def load_rigged_mesh(obj_path, rig_path) -> RiggedMesh:
    vertices, faces = load_obj(obj_path)
    skeleton, weights = load_rig_json(rig_path)
    return RiggedMesh(vertices, faces, skeleton, weights)


# -- pose libraries ------------------------------------------------------

@dataclass(frozen=True)
class PoseLibrary:
    """Named per-joint rotations keyed to a joint-name list."""

    joint_names: tuple
    poses: dict = field(default_factory=dict)   # name -> (n_joints, 4) quats

    def __post_init__(self):
        object.__setattr__(self, "joint_names", tuple(self.joint_names))
        for name, quats in self.poses.items():
            if np.asarray(quats).shape != (len(self.joint_names), 4):
                raise ValueError(f"pose {name!r} has the wrong joint count")

    @property
    def names(self):
        return sorted(self.poses)

    def sample(self, rng):
        names = self.names
        return self.poses[names[int(rng.integers(len(names)))]]


def save_pose_library(path, joint_names, poses_degrees):
    """Pose library JSON: named poses as per-joint Euler XYZ degrees."""
    doc = {
        "schema": 1,
        "joint_names": list(joint_names),
        "poses": {
            name: [[float(a) for a in row] for row in np.asarray(angles)]
            for name, angles in poses_degrees.items()
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_pose_library(path) -> PoseLibrary:
    with open(path) as fh:
        doc = json.load(fh)
    joint_names = tuple(doc["joint_names"])
    poses = {}
    for name, rows in doc["poses"].items():
        quats = np.stack([quat_from_euler_xyz_deg(row) for row in rows])
        poses[name] = quats
    return PoseLibrary(joint_names, poses)
