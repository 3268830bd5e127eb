"""Homogeneous 4x4 rigid transforms.

All poses in the package are plain ``(4, 4)`` float arrays; composition is
matrix multiplication, ``a @ b`` applies ``b`` first.
"""

import numpy as np


def make(rot=None, pos=None):
    T = np.eye(4)
    if rot is not None:
        T[:3, :3] = rot
    if pos is not None:
        T[:3, 3] = pos
    return T


def translate(x, y=0.0, z=0.0):
    if np.ndim(x) > 0:
        return make(pos=np.asarray(x, dtype=float))
    return make(pos=(x, y, z))


def rotz(angle):
    c, s = np.cos(angle), np.sin(angle)
    return make(rot=np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]))


def rotx(angle):
    c, s = np.cos(angle), np.sin(angle)
    return make(rot=np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]))


def axis_angle(axis, angle):
    """Rotation matrix (3x3) about a unit ``axis`` (Rodrigues)."""
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def inverse(T):
    R = T[..., :3, :3]
    t = T[..., :3, 3]
    out = np.zeros_like(T)
    Rt = np.swapaxes(R, -1, -2)
    out[..., :3, :3] = Rt
    out[..., :3, 3] = -np.einsum("...ij,...j->...i", Rt, t)
    out[..., 3, 3] = 1.0
    return out


def apply(T, points):
    """Apply transform ``T`` to an ``(n, 3)`` array of points."""
    points = np.asarray(points, dtype=float)
    return points @ T[:3, :3].T + T[:3, 3]


def rotate_vectors(T, vectors):
    return np.asarray(vectors, dtype=float) @ T[:3, :3].T


def align_vectors(a, b):
    """Minimal rotation (3x3) taking unit vector ``a`` onto unit vector ``b``."""
    a = np.asarray(a, dtype=float) / np.linalg.norm(a)
    b = np.asarray(b, dtype=float) / np.linalg.norm(b)
    v = np.cross(a, b)
    c = float(np.dot(a, b))
    s = np.linalg.norm(v)
    if s < 1e-12:
        if c > 0:
            return np.eye(3)
        # antiparallel: half-turn about any axis orthogonal to a
        helper = np.eye(3)[int(np.argmin(np.abs(a)))]
        axis = np.cross(a, helper)
        return axis_angle(axis, np.pi)
    return axis_angle(v / s, np.arctan2(s, c))


def perpendicular(v):
    """Deterministic unit vector orthogonal to ``v``."""
    v = np.asarray(v, dtype=float)
    helper = np.eye(3)[int(np.argmin(np.abs(v)))]
    u = np.cross(v, helper)
    return u / np.linalg.norm(u)


def rotation_angle(R):
    """Geodesic angle of a rotation matrix (radians)."""
    c = (np.trace(R) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def is_rigid(T, tol=1e-9):
    R = T[:3, :3]
    return (
        np.allclose(R.T @ R, np.eye(3), atol=tol)
        and abs(np.linalg.det(R) - 1.0) < tol * 10
        and np.allclose(T[3], [0.0, 0.0, 0.0, 1.0])
    )
