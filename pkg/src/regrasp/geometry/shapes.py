"""Procedural test solids (all outward-oriented, watertight)."""

import numpy as np

from .hull import convex_hull
from .mesh import TriangleMesh

_BOX_TRIS = np.array(
    [
        [0, 2, 1], [0, 3, 2],  # z-
        [4, 5, 6], [4, 6, 7],  # z+
        [0, 1, 5], [0, 5, 4],  # y-
        [2, 3, 7], [2, 7, 6],  # y+
        [1, 2, 6], [1, 6, 5],  # x+
        [0, 4, 7], [0, 7, 3],  # x-
    ]
)


def box(extents=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0)):
    hx, hy, hz = np.asarray(extents, dtype=float) / 2.0
    v = np.array(
        [
            [-hx, -hy, -hz], [hx, -hy, -hz], [hx, hy, -hz], [-hx, hy, -hz],
            [-hx, -hy, hz], [hx, -hy, hz], [hx, hy, hz], [-hx, hy, hz],
        ]
    ) + np.asarray(center, dtype=float)
    return TriangleMesh.from_arrays(v, _BOX_TRIS)


def box_arrays(half_extents):
    """Raw corner/triangle arrays of a box centred at the origin."""
    hx, hy, hz = half_extents
    v = np.array(
        [
            [-hx, -hy, -hz], [hx, -hy, -hz], [hx, hy, -hz], [-hx, hy, -hz],
            [-hx, -hy, hz], [hx, -hy, hz], [hx, hy, hz], [-hx, hy, hz],
        ]
    )
    return v, _BOX_TRIS.copy()


def cylinder_prism(radius=0.04, height=0.06, sides=32):
    """Closed n-gon prism along z, centred at the origin.

    Triangles: side quads first (two per side, in angular order), then the
    bottom and top cap fans.
    """
    ang = 2.0 * np.pi * np.arange(sides) / sides
    ring = np.stack([radius * np.cos(ang), radius * np.sin(ang)], axis=1)
    h = height / 2.0
    bottom = np.column_stack([ring, np.full(sides, -h)])
    top = np.column_stack([ring, np.full(sides, h)])
    verts = np.vstack([bottom, top, [[0.0, 0.0, -h], [0.0, 0.0, h]]])
    cb, ct = 2 * sides, 2 * sides + 1
    tris = []
    for i in range(sides):
        j = (i + 1) % sides
        tris.append([i, j, sides + j])
        tris.append([i, sides + j, sides + i])
    for i in range(sides):
        j = (i + 1) % sides
        tris.append([cb, j, i])
    for i in range(sides):
        j = (i + 1) % sides
        tris.append([ct, sides + i, sides + j])
    return TriangleMesh.from_arrays(verts, tris)


def l_bracket(leg=0.06, thickness=0.015, depth=0.04):
    """Extruded L profile (two legs of length ``leg``) along z."""
    t, a = thickness, leg
    profile = np.array([[0, 0], [a, 0], [a, t], [t, t], [t, a], [0, a]], dtype=float)
    n = len(profile)
    verts = np.vstack(
        [np.column_stack([profile, np.zeros(n)]), np.column_stack([profile, np.full(n, depth)])]
    )
    verts -= verts.mean(axis=0)
    tris = []
    # star-shaped around vertex 0, so a fan from it is valid
    for k in range(1, n - 1):
        tris.append([0, k + 1, k])
        tris.append([n, n + k, n + k + 1])
    for i in range(n):
        j = (i + 1) % n
        tris.append([i, j, n + j])
        tris.append([i, n + j, n + i])
    return TriangleMesh.from_arrays(verts, tris)


def icosphere(radius=1.0, subdivisions=2):
    phi = (1.0 + 5.0**0.5) / 2.0
    verts = [
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ]
    faces = [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
    verts = [np.array(v, dtype=float) / np.linalg.norm(v) for v in verts]
    for _ in range(subdivisions):
        cache = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = new_faces
    return TriangleMesh.from_arrays(np.array(verts) * radius, faces)


def random_convex(rng, n_points=30, scale=0.05):
    """Hull of random points in a ball, as an outward-oriented mesh."""
    while True:
        pts = rng.normal(size=(n_points, 3))
        pts *= (rng.random(n_points) ** (1 / 3) / np.linalg.norm(pts, axis=1))[:, None]
        pts *= scale
        try:
            hull = convex_hull(pts)
        except ValueError:
            continue
        return TriangleMesh.from_arrays(pts, hull.triangles)


def bumpy_sphere(rng, subdivisions=2, radius=0.05, noise=0.15):
    """Icosphere with random radial displacement of every vertex."""
    base = icosphere(1.0, subdivisions)
    r = radius * (1.0 + noise * (rng.random(len(base.vertices)) - 0.5) * 2.0)
    return TriangleMesh.from_arrays(base.vertices * r[:, None], base.triangles)
