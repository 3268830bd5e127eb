"""Region-growing mesh segmentation into near-planar facets.

Two growers share the same seed schedule (ascending triangle index):

* :func:`oversegment` never removes triangles from the candidate pool, so a
  triangle can belong to several facets, and every member stays within
  ``tau`` of its facet's seed normal.
* :func:`segment_conventional` claims triangles as it grows and compares each
  candidate against the neighbour it was reached from; facets partition the
  mesh and may drift far from planar on smooth curved surfaces.
"""

from collections import Counter, deque
from dataclasses import dataclass

import numpy as np

DEFAULT_TAU = np.deg2rad(10.0)


@dataclass(frozen=True, eq=False)
class Facet:
    triangle_ids: frozenset
    seed_id: int
    normal: np.ndarray
    boundary: tuple  # loops of vertex indices
    boundary_edges: np.ndarray  # (k, 2) vertex index pairs
    area: float

    def __len__(self):
        return len(self.triangle_ids)


def _check_tau(tau):
    if not 0.0 < tau < np.pi / 2:
        raise ValueError(f"tau must lie in (0, pi/2), got {tau!r}")


def oversegment(mesh, tau=DEFAULT_TAU):
    """Overlapping facets grown breadth-first from each uncovered seed."""
    _check_tau(tau)
    cos_tau = np.cos(tau)
    normals = mesh.face_normals
    covered = np.zeros(mesh.n_triangles, dtype=bool)
    seen_sets = set()
    facets = []
    for seed in range(mesh.n_triangles):
        if covered[seed]:
            continue
        ref = normals[seed]
        members = {seed}
        queue = deque([seed])
        while queue:
            t = queue.popleft()
            for nb in mesh.adjacency[t]:
                if nb not in members and normals[nb] @ ref >= cos_tau - 1e-12:
                    members.add(nb)
                    queue.append(nb)
        key = frozenset(members)
        covered[list(members)] = True
        if key in seen_sets:
            continue
        seen_sets.add(key)
        facets.append(make_facet(mesh, key, seed))
    return facets


def segment_conventional(mesh, tau=DEFAULT_TAU):
    """Partitioning region growth with a neighbour-to-neighbour normal test."""
    _check_tau(tau)
    cos_tau = np.cos(tau)
    normals = mesh.face_normals
    claimed = np.zeros(mesh.n_triangles, dtype=bool)
    facets = []
    for seed in range(mesh.n_triangles):
        if claimed[seed]:
            continue
        claimed[seed] = True
        members = [seed]
        queue = deque([seed])
        while queue:
            t = queue.popleft()
            for nb in mesh.adjacency[t]:
                if not claimed[nb] and normals[nb] @ normals[t] >= cos_tau - 1e-12:
                    claimed[nb] = True
                    members.append(nb)
                    queue.append(nb)
        facets.append(make_facet(mesh, frozenset(members), seed))
    return facets


def make_facet(mesh, triangle_ids, seed_id):
    ids = np.fromiter(sorted(triangle_ids), dtype=np.int64)
    areas = mesh.face_areas[ids]
    weighted = (mesh.face_normals[ids] * areas[:, None]).sum(axis=0)
    norm = np.linalg.norm(weighted)
    if norm < 1e-6 * areas.sum():
        # normals cancel out (e.g. a whole cylinder wall); fall back to the seed
        normal = mesh.face_normals[seed_id].copy()
    else:
        normal = weighted / norm
    edges = _boundary_edges(mesh.triangles[ids])
    return Facet(
        triangle_ids=frozenset(int(i) for i in ids),
        seed_id=int(seed_id),
        normal=normal,
        boundary=_chain_loops(edges),
        boundary_edges=edges,
        area=float(areas.sum()),
    )


def _boundary_edges(tris):
    counts = Counter()
    directed = []
    for a, b, c in tris:
        for u, v in ((a, b), (b, c), (c, a)):
            counts[(min(u, v), max(u, v))] += 1
            directed.append((int(u), int(v)))
    edges = [(u, v) for u, v in directed if counts[(min(u, v), max(u, v))] == 1]
    return np.array(edges, dtype=np.int64).reshape(-1, 2)


def _chain_loops(edges):
    """Group directed boundary edges into vertex loops (best effort on pinches)."""
    outgoing = {}
    for u, v in edges:
        outgoing.setdefault(int(u), []).append(int(v))
    loops = []
    for start in sorted(outgoing):
        while outgoing.get(start):
            loop = [start]
            cur = outgoing[start].pop(0)
            while cur != start and outgoing.get(cur):
                loop.append(cur)
                cur = outgoing[cur].pop(0)
            loops.append(tuple(loop))
    return tuple(loops)


def facets_of_triangles(facets, n_triangles):
    """Map triangle index -> sorted tuple of facet indices containing it."""
    owners = [[] for _ in range(n_triangles)]
    for fid, facet in enumerate(facets):
        for t in facet.triangle_ids:
            owners[t].append(fid)
    return [tuple(sorted(o)) for o in owners]


def boundary_distance(mesh, facet, points):
    """Distance from each point to the nearest boundary edge of ``facet``.

    A closed facet (no boundary) gives ``inf``.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if len(facet.boundary_edges) == 0:
        return np.full(len(points), np.inf)
    a = mesh.vertices[facet.boundary_edges[:, 0]]
    b = mesh.vertices[facet.boundary_edges[:, 1]]
    return point_segment_distance(points, a, b).min(axis=1)


def point_segment_distance(points, a, b):
    """Pairwise distances, shape ``(len(points), len(a))``."""
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    denom = np.where(denom > 0, denom, 1.0)
    ap = points[:, None, :] - a[None, :, :]
    t = np.clip(np.einsum("pij,ij->pi", ap, ab) / denom, 0.0, 1.0)
    closest = a[None] + t[..., None] * ab[None]
    return np.linalg.norm(points[:, None, :] - closest, axis=2)
