"""Convex hulls (Qhull via scipy) with outward-oriented triangles."""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError


class DegenerateHullError(ValueError):
    """Input points are coplanar, collinear, or too few."""


@dataclass(frozen=True, eq=False)
class Hull:
    points: np.ndarray
    vertex_ids: np.ndarray
    triangles: np.ndarray  # (k, 3) indices into points, counter-clockwise seen from outside
    normals: np.ndarray  # (k, 3) outward unit normals
    offsets: np.ndarray  # normal . x + offset = 0 on the plane
    volume: float

    def contains(self, points, tol=1e-9):
        points = np.atleast_2d(points)
        return np.all(points @ self.normals.T + self.offsets <= tol, axis=1)

    def planar_faces(self, angle_tol=1e-4):
        """Group coplanar triangles; returns a list of (normal, offset, triangle index list)."""
        groups = []
        cos_tol = np.cos(angle_tol)
        scale = max(float(np.ptp(self.points, axis=0).max()), 1e-12)
        for i, (n, d) in enumerate(zip(self.normals, self.offsets)):
            for g in groups:
                if n @ g[0] >= cos_tol and abs(d - g[1]) <= 1e-9 * scale + angle_tol * scale:
                    g[2].append(i)
                    break
            else:
                groups.append((n, d, [i]))
        return groups


def convex_hull(points):
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(points) < 4:
        raise DegenerateHullError("need at least 4 points for a 3D hull")
    try:
        qh = ConvexHull(points)
    except QhullError as exc:
        raise DegenerateHullError(f"degenerate point set: {exc.args[0].splitlines()[0]}") from None
    tris = qh.simplices.copy()
    normals = qh.equations[:, :3]
    offsets = qh.equations[:, 3]
    a, b, c = (points[tris[:, i]] for i in range(3))
    flip = np.einsum("ij,ij->i", np.cross(b - a, c - a), normals) < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    if qh.volume <= 0:
        raise DegenerateHullError("hull has zero volume")
    return Hull(
        points=points,
        vertex_ids=np.sort(qh.vertices),
        triangles=tris,
        normals=normals,
        offsets=offsets,
        volume=float(qh.volume),
    )
