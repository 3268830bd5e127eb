"""Mesh ingestion, segmentation, sampling and convex hulls."""

from .hull import DegenerateHullError, Hull, convex_hull
from .io import MeshFormatError, load_mesh
from .mesh import InvalidMeshError, TriangleMesh
from .sampling import SamplePoint, sample_surface
from .segmentation import DEFAULT_TAU, Facet, oversegment, segment_conventional

__all__ = [
    "DEFAULT_TAU",
    "DegenerateHullError",
    "Facet",
    "Hull",
    "InvalidMeshError",
    "MeshFormatError",
    "SamplePoint",
    "TriangleMesh",
    "convex_hull",
    "load_mesh",
    "oversegment",
    "sample_surface",
    "segment_conventional",
]
