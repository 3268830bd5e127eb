"""Triangle mesh container with derived quantities."""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

WELD_TOLERANCE = 1e-7
MIN_TRIANGLE_AREA = 1e-14


class InvalidMeshError(ValueError):
    """Raised when a mesh has no usable triangles."""


@dataclass(eq=False)
class TriangleMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    face_normals: np.ndarray
    face_areas: np.ndarray
    adjacency: list
    total_area: float
    com: np.ndarray
    volume: float = 0.0
    edge_faces: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_arrays(cls, vertices, triangles, weld_tol=WELD_TOLERANCE):
        """Build a cleaned mesh: weld near-duplicate vertices, drop degenerate faces."""
        vertices = np.asarray(vertices, dtype=float).reshape(-1, 3)
        triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
        if len(triangles) == 0:
            raise InvalidMeshError("mesh has no triangles")
        if triangles.min() < 0 or triangles.max() >= len(vertices):
            raise InvalidMeshError("triangle references a missing vertex")

        remap = _weld_map(vertices, weld_tol)
        triangles = remap[triangles]

        a, b, c = (vertices[triangles[:, i]] for i in range(3))
        cross = np.cross(b - a, c - a)
        areas = 0.5 * np.linalg.norm(cross, axis=1)
        distinct = (
            (triangles[:, 0] != triangles[:, 1])
            & (triangles[:, 1] != triangles[:, 2])
            & (triangles[:, 0] != triangles[:, 2])
        )
        keep = distinct & (areas > MIN_TRIANGLE_AREA)
        triangles = triangles[keep]
        if len(triangles) == 0:
            raise InvalidMeshError("every triangle is degenerate")

        used, triangles = np.unique(triangles, return_inverse=True)
        triangles = triangles.reshape(-1, 3)
        return cls._derive(vertices[used], triangles)

    @classmethod
    def _derive(cls, vertices, triangles):
        a, b, c = (vertices[triangles[:, i]] for i in range(3))
        cross = np.cross(b - a, c - a)
        norms = np.linalg.norm(cross, axis=1)
        normals = cross / norms[:, None]
        areas = 0.5 * norms
        adjacency, edge_faces = _edge_adjacency(triangles)
        volume, com = _mass_properties(vertices, triangles, cross, areas)
        return cls(
            vertices=vertices,
            triangles=triangles,
            face_normals=normals,
            face_areas=areas,
            adjacency=adjacency,
            total_area=float(areas.sum()),
            com=com,
            volume=volume,
            edge_faces=edge_faces,
        )

    @property
    def n_triangles(self):
        return len(self.triangles)

    def corners(self):
        """``(m, 3, 3)`` array of triangle corner coordinates."""
        return self.vertices[self.triangles]

    def face_centers(self):
        return self.corners().mean(axis=1)

    def bounding_radius(self):
        """Largest vertex distance from the center of mass."""
        return float(np.linalg.norm(self.vertices - self.com, axis=1).max())

    def transformed(self, T):
        verts = self.vertices @ T[:3, :3].T + T[:3, 3]
        return TriangleMesh._derive(verts, self.triangles.copy())


def _weld_map(vertices, tol):
    n = len(vertices)
    parent = np.arange(n)
    if tol > 0 and n > 1:
        pairs = cKDTree(vertices).query_pairs(r=tol, output_type="ndarray")

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for i, j in pairs:
            ri, rj = find(i), find(j)
            if ri != rj:
                # the lower index survives so welding is order-stable
                parent[max(ri, rj)] = min(ri, rj)
        for i in range(n):
            parent[i] = find(i)
    return parent


def _edge_adjacency(triangles):
    m = len(triangles)
    edges = np.concatenate(
        [triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]], axis=0
    )
    edges.sort(axis=1)
    owner = np.tile(np.arange(m), 3)
    keys, inverse = np.unique(edges, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    order = np.argsort(inverse, kind="stable")
    bounds = np.searchsorted(inverse[order], np.arange(len(keys) + 1))

    neighbours = [set() for _ in range(m)]
    edge_faces = {}
    for k in range(len(keys)):
        faces = owner[order[bounds[k] : bounds[k + 1]]]
        edge_faces[(int(keys[k, 0]), int(keys[k, 1]))] = tuple(int(f) for f in faces)
        if len(faces) > 1:
            for f in faces:
                neighbours[f].update(int(g) for g in faces if g != f)
    return [sorted(s) for s in neighbours], edge_faces


def _mass_properties(vertices, triangles, cross, areas):
    """Volume and uniform-density centroid by the divergence theorem.

    Falls back to the area-weighted surface centroid when the mesh encloses
    no volume (open or flat meshes).
    """
    a, b, c = (vertices[triangles[:, i]] for i in range(3))
    volume = float(np.einsum("ij,ij->", a, cross)) / 6.0
    extent = np.ptp(vertices, axis=0).max()
    if abs(volume) > 1e-9 * extent**3:
        quad = (a + b) ** 2 + (b + c) ** 2 + (c + a) ** 2
        first_moment = (cross * quad).sum(axis=0) / 48.0
        return volume, first_moment / volume
    centers = (a + b + c) / 3.0
    return volume, (centers * areas[:, None]).sum(axis=0) / areas.sum()
