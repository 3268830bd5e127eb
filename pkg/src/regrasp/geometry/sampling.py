"""Area-weighted uniform surface sampling."""

from dataclasses import dataclass

import numpy as np

from .segmentation import facets_of_triangles

MAX_SAMPLES = 10_000


@dataclass(frozen=True, eq=False)
class SamplePoint:
    position: np.ndarray
    normal: np.ndarray
    triangle_id: int
    facet_ids: frozenset


def sample_count(mesh, density, max_samples=None):
    n = int(np.floor(density * mesh.total_area + 0.5))
    if max_samples is not None:
        n = min(n, max_samples)
    return n


def sample_surface(mesh, density, rng_seed, facets=None, max_samples=None):
    """Draw ``round(density * area)`` points uniformly over the surface.

    Host triangles are chosen with probability proportional to area and the
    point is placed with the square-root barycentric map. When ``facets`` is
    given, each sample records every facet that contains its host triangle.
    """
    if density <= 0:
        raise ValueError("density must be positive")
    n = sample_count(mesh, density, max_samples)
    if n == 0:
        return []
    rng = np.random.default_rng(rng_seed)
    tri = rng.choice(mesh.n_triangles, size=n, p=mesh.face_areas / mesh.total_area)
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    bary = np.stack([1.0 - r1, r1 * (1.0 - r2), r1 * r2], axis=1)
    positions = np.einsum("ij,ijk->ik", bary, mesh.corners()[tri])

    owners = facets_of_triangles(facets, mesh.n_triangles) if facets is not None else None
    empty = frozenset()
    return [
        SamplePoint(
            position=positions[i],
            normal=mesh.face_normals[tri[i]],
            triangle_id=int(tri[i]),
            facet_ids=frozenset(owners[tri[i]]) if owners is not None else empty,
        )
        for i in range(n)
    ]


def barycentric(point, corners):
    """Barycentric coordinates of ``point`` w.r.t. a (3, 3) triangle."""
    a, b, c = corners
    v0, v1, v2 = b - a, c - a, point - a
    d00, d01, d11 = v0 @ v0, v0 @ v1, v1 @ v1
    d20, d21 = v2 @ v0, v2 @ v1
    denom = d00 * d11 - d01 * d01
    v = (d11 * d20 - d01 * d21) / denom
    w = (d00 * d21 - d01 * d20) / denom
    return np.array([1.0 - v - w, v, w])
