"""Vectorised triangle queries: ray casting, box SAT, segment distance.

Every function takes triangle corners as an ``(m, 3, 3)`` array and returns
one result per triangle.
"""

import numpy as np


def ray_triangles(origin, direction, corners, eps=1e-12):
    """Möller-Trumbore ray parameters ``t`` per triangle (``inf`` for a miss)."""
    a = corners[:, 0]
    e1 = corners[:, 1] - a
    e2 = corners[:, 2] - a
    pvec = np.cross(direction, e2)
    det = np.einsum("ij,ij->i", e1, pvec)
    ok = np.abs(det) > eps
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    tvec = origin - a
    u = np.einsum("ij,ij->i", tvec, pvec) * inv
    qvec = np.cross(tvec, e1)
    v = (qvec @ direction) * inv
    t = np.einsum("ij,ij->i", e2, qvec) * inv
    tol = 1e-10
    hit = ok & (u >= -tol) & (v >= -tol) & (u + v <= 1.0 + tol)
    return np.where(hit, t, np.inf)


def first_hit(origin, direction, corners, exclude=None, t_min=1e-9):
    """Nearest triangle hit along a ray; returns ``(t, index)`` or ``(inf, -1)``."""
    t = ray_triangles(origin, direction, corners)
    t = np.where(t > t_min, t, np.inf)
    if exclude is not None:
        t[exclude] = np.inf
    idx = int(np.argmin(t))
    if not np.isfinite(t[idx]):
        return np.inf, -1
    return float(t[idx]), idx


def box_corners(pose, half_extents):
    """The 8 corners of an oriented box given its centre pose (4x4)."""
    signs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=float)
    local = signs * np.asarray(half_extents, dtype=float)
    return local @ pose[:3, :3].T + pose[:3, 3]


def triangles_overlap_box(corners, pose, half_extents):
    """Separating-axis test of each triangle against an oriented box.

    Touching counts as overlap. ``pose`` is the box centre frame (4x4).
    """
    h = np.asarray(half_extents, dtype=float)
    R = pose[:3, :3]
    v = (corners - pose[:3, 3]) @ R  # box frame
    m = len(v)
    if m == 0:
        return np.zeros(0, dtype=bool)
    separated = np.zeros(m, dtype=bool)

    # box face axes
    separated |= np.any(v.min(axis=1) > h, axis=1)
    separated |= np.any(v.max(axis=1) < -h, axis=1)

    f = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 1], v[:, 0] - v[:, 2]], axis=1)  # (m, 3, 3)

    # triangle normal
    n = np.cross(f[:, 0], f[:, 1])
    p = np.einsum("ij,ij->i", n, v[:, 0])
    r = np.abs(n) @ h
    separated |= np.abs(p) > r

    # edge cross products: e_i x f_j for box axes e_i
    eye = np.eye(3)
    for i in range(3):
        for j in range(3):
            axis = np.cross(eye[i], f[:, j])  # (m, 3)
            proj = np.einsum("mk,mvk->mv", axis, v)
            r = np.abs(axis) @ h
            separated |= (proj.min(axis=1) > r) | (proj.max(axis=1) < -r)
    return ~separated


def point_triangle_distance(points, corners):
    """Distance from point ``i`` to triangle ``i`` (broadcast over matching rows)."""
    a, b, c = corners[:, 0], corners[:, 1], corners[:, 2]
    n = np.cross(b - a, c - a)
    nn = np.linalg.norm(n, axis=1)
    n = n / nn[:, None]
    d = np.einsum("ij,ij->i", points - a, n)
    proj = points - d[:, None] * n
    inside = _inside_triangle(proj, a, b, c, n)
    edge = np.minimum.reduce(
        [
            _point_segment(points, a, b),
            _point_segment(points, b, c),
            _point_segment(points, c, a),
        ]
    )
    return np.where(inside, np.abs(d), edge)


def _inside_triangle(p, a, b, c, n):
    s0 = np.einsum("ij,ij->i", np.cross(b - a, p - a), n)
    s1 = np.einsum("ij,ij->i", np.cross(c - b, p - b), n)
    s2 = np.einsum("ij,ij->i", np.cross(a - c, p - c), n)
    return (s0 >= 0) & (s1 >= 0) & (s2 >= 0)


def _point_segment(p, a, b):
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    t = np.clip(np.einsum("ij,ij->i", p - a, ab) / np.where(denom > 0, denom, 1.0), 0.0, 1.0)
    return np.linalg.norm(p - (a + t[:, None] * ab), axis=1)


def segment_segment_distance(p1, q1, p2, q2):
    """Row-wise closest distance between segments ``p1q1`` and ``p2q2``."""
    eps = 1e-30
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = np.einsum("ij,ij->i", d1, d1)
    e = np.einsum("ij,ij->i", d2, d2)
    f = np.einsum("ij,ij->i", d2, r)
    c = np.einsum("ij,ij->i", d1, r)
    b = np.einsum("ij,ij->i", d1, d2)
    safe_a = np.where(a > eps, a, 1.0)
    safe_e = np.where(e > eps, e, 1.0)
    denom = a * e - b * b
    s = np.where(denom > eps, np.clip((b * f - c * e) / np.where(denom > eps, denom, 1.0), 0.0, 1.0), 0.0)
    t = (b * s + f) / safe_e
    s = np.where(t < 0, np.clip(-c / safe_a, 0.0, 1.0), np.where(t > 1, np.clip((b - c) / safe_a, 0.0, 1.0), s))
    t = np.clip(t, 0.0, 1.0)
    # degenerate (point-like) segments
    point2 = e <= eps
    s = np.where(point2, np.clip(-c / safe_a, 0.0, 1.0), s)
    t = np.where(point2, 0.0, t)
    point1 = a <= eps
    s = np.where(point1, 0.0, s)
    t = np.where(point1, np.clip(f / safe_e, 0.0, 1.0), t)
    t = np.where(point1 & point2, 0.0, t)
    c1 = p1 + s[:, None] * d1
    c2 = p2 + t[:, None] * d2
    return np.linalg.norm(c1 - c2, axis=1)


def segment_triangle_distance(p, q, corners):
    """Distance between one segment ``pq`` and each triangle (0 when crossing)."""
    m = len(corners)
    if m == 0:
        return np.zeros(0)
    P = np.broadcast_to(p, (m, 3))
    Q = np.broadcast_to(q, (m, 3))
    a, b, c = corners[:, 0], corners[:, 1], corners[:, 2]
    n = np.cross(b - a, c - a)
    n = n / np.linalg.norm(n, axis=1)[:, None]
    dp = np.einsum("ij,ij->i", P - a, n)
    dq = np.einsum("ij,ij->i", Q - a, n)
    crossing = dp * dq < 0
    t = np.where(crossing, dp / np.where(crossing, dp - dq, 1.0), 0.0)
    x = P + t[:, None] * (Q - P)
    through = crossing & _inside_triangle(x, a, b, c, n)
    dist = np.minimum.reduce(
        [
            point_triangle_distance(P, corners),
            point_triangle_distance(Q, corners),
            segment_segment_distance(P, Q, a, b),
            segment_segment_distance(P, Q, b, c),
            segment_segment_distance(P, Q, c, a),
        ]
    )
    return np.where(through, 0.0, dist)
