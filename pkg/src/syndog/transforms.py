"""Quaternion and rigid-transform utilities.

Quaternions are stored as ``(w, x, y, z)`` ndarrays. Rigid transforms are
4x4 homogeneous matrices acting on column points, composed left to right
as ``parent @ child``.
"""

from __future__ import annotations

import numpy as np

from .validation import as_float_array

UNIT_TOL = 1e-6


def quat_identity():
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_norm(q):
    return float(np.linalg.norm(q))


def quat_normalize(q):
    q = as_float_array(q, "quaternion")
    n = np.linalg.norm(q)
    if n == 0:
        raise ValueError("cannot normalize a zero quaternion")
    return q / n


def check_unit_quat(q, name="quaternion", tol=UNIT_TOL):
    q = as_float_array(q, name)
    if q.shape != (4,):
        raise ValueError(f"{name} must have shape (4,), got {q.shape}")
    if abs(np.linalg.norm(q) - 1.0) > tol:
        raise ValueError(f"{name} is not unit-norm within {tol}")
    return q


def quat_multiply(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_from_axis_angle(axis, angle_rad):
    axis = as_float_array(axis, "axis")
    n = np.linalg.norm(axis)
    if n == 0:
        raise ValueError("rotation axis must be nonzero")
    half = 0.5 * angle_rad
    return np.concatenate(([np.cos(half)], np.sin(half) * axis / n))


def quat_to_matrix(q):
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_euler_xyz_deg(angles_deg):
    """Extrinsic X-then-Y-then-Z rotation from degrees (``R = Rz Ry Rx``)."""
    rx, ry, rz = np.deg2rad(as_float_array(angles_deg, "euler angles"))
    qx = quat_from_axis_angle((1.0, 0.0, 0.0), rx)
    qy = quat_from_axis_angle((0.0, 1.0, 0.0), ry)
    qz = quat_from_axis_angle((0.0, 0.0, 1.0), rz)
    return quat_multiply(qz, quat_multiply(qy, qx))


def random_quat(rng):
    """Uniform random rotation (Shoemake's subgroup algorithm)."""
    u1, u2, u3 = rng.random(3)
    a, b = np.sqrt(1.0 - u1), np.sqrt(u1)
    return np.array(
        [
            a * np.sin(2 * np.pi * u2),
            a * np.cos(2 * np.pi * u2),
            b * np.sin(2 * np.pi * u3),
            b * np.cos(2 * np.pi * u3),
        ]
    )


def make_transform(rotation=None, translation=None):
    """Build a 4x4 rigid transform from a 3x3 rotation and/or a translation."""
    m = np.eye(4)
    if rotation is not None:
        m[:3, :3] = rotation
    if translation is not None:
        m[:3, 3] = translation
    return m


def transform_from_quat(q, translation=None):
    return make_transform(quat_to_matrix(q), translation)


def invert_rigid(m):
    """Invert a rigid 4x4 transform via transpose (no general inverse)."""
    r = m[:3, :3]
    out = np.eye(4)
    out[:3, :3] = r.T
    out[:3, 3] = -r.T @ m[:3, 3]
    return out


def transform_points(m, points):
    points = np.atleast_2d(points)
    return points @ m[:3, :3].T + m[:3, 3]


def upright_tilt_deg(q):
    """Angle in degrees between the rotated +Y axis and world +Y."""
    up = quat_to_matrix(q)[:, 1]
    return float(np.degrees(np.arccos(np.clip(up[1], -1.0, 1.0))))
