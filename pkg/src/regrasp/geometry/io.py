"""Mesh readers (STL ascii/binary, OBJ) and PLY/OBJ writers."""

import struct
from pathlib import Path

import numpy as np

from .mesh import InvalidMeshError, TriangleMesh

FORMATS = ("stl-ascii", "stl-binary", "obj")


class MeshFormatError(ValueError):
    """Parse failure; ``line`` (text formats) or ``offset`` (binary) locate it."""

    def __init__(self, message, line=None, offset=None):
        where = ""
        if line is not None:
            where = f" (line {line})"
        elif offset is not None:
            where = f" (byte {offset})"
        super().__init__(message + where)
        self.line = line
        self.offset = offset


def detect_format(path):
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".obj":
        return "obj"
    if suffix == ".stl":
        size = path.stat().st_size
        with open(path, "rb") as fh:
            head = fh.read(84)
        if len(head) >= 84:
            (count,) = struct.unpack("<I", head[80:84])
            if 84 + 50 * count == size:
                return "stl-binary"
        return "stl-ascii"
    raise MeshFormatError(f"cannot infer mesh format from suffix {suffix!r}")


def load_mesh(path, format=None, scale=1.0):
    """Read a mesh file and return a cleaned :class:`TriangleMesh`.

    ``scale`` multiplies every coordinate (e.g. ``0.001`` for millimetre models).
    """
    path = Path(path)
    if format is None:
        format = detect_format(path)
    if format not in FORMATS:
        raise MeshFormatError(f"unknown mesh format {format!r}")
    if format == "obj":
        vertices, triangles = _read_obj(path)
    elif format == "stl-ascii":
        vertices, triangles = _read_stl_ascii(path)
    else:
        vertices, triangles = _read_stl_binary(path)
    if len(triangles) == 0:
        raise InvalidMeshError(f"{path} contains no triangles")
    return TriangleMesh.from_arrays(np.asarray(vertices) * scale, triangles)


def _floats(tokens, lineno, count):
    try:
        values = [float(t) for t in tokens[:count]]
    except ValueError:
        raise MeshFormatError("expected numeric coordinates", line=lineno) from None
    if len(values) != count:
        raise MeshFormatError(f"expected {count} coordinates", line=lineno)
    return values


def _read_obj(path):
    vertices, triangles = [], []
    with open(path, encoding="utf-8", errors="replace") as fh:
        for lineno, raw in enumerate(fh, start=1):
            tokens = raw.split()
            if not tokens or tokens[0].startswith("#"):
                continue
            if tokens[0] == "v":
                vertices.append(_floats(tokens[1:], lineno, 3))
            elif tokens[0] == "f":
                idx = []
                for tok in tokens[1:]:
                    head = tok.split("/")[0]
                    try:
                        i = int(head)
                    except ValueError:
                        raise MeshFormatError(f"bad face index {tok!r}", line=lineno) from None
                    if i == 0:
                        raise MeshFormatError("OBJ indices are 1-based", line=lineno)
                    i = i - 1 if i > 0 else len(vertices) + i
                    if not 0 <= i < len(vertices):
                        raise MeshFormatError(f"face index {tok} out of range", line=lineno)
                    idx.append(i)
                if len(idx) < 3:
                    raise MeshFormatError("face needs at least 3 vertices", line=lineno)
                for k in range(1, len(idx) - 1):
                    triangles.append((idx[0], idx[k], idx[k + 1]))
    return np.array(vertices, dtype=float).reshape(-1, 3), np.array(triangles, dtype=np.int64).reshape(-1, 3)


def _read_stl_ascii(path):
    corners = []
    pending = []
    with open(path, encoding="utf-8", errors="replace") as fh:
        for lineno, raw in enumerate(fh, start=1):
            tokens = raw.split()
            if not tokens:
                continue
            key = tokens[0].lower()
            if key == "vertex":
                pending.append(_floats(tokens[1:], lineno, 3))
            elif key == "endloop":
                if len(pending) != 3:
                    raise MeshFormatError("facet loop must have 3 vertices", line=lineno)
                corners.extend(pending)
                pending = []
            elif key not in ("solid", "facet", "outer", "endfacet", "endsolid"):
                raise MeshFormatError(f"unexpected token {tokens[0]!r}", line=lineno)
    if pending:
        raise MeshFormatError("unterminated facet loop")
    corners = np.array(corners, dtype=float).reshape(-1, 3)
    return corners, np.arange(len(corners)).reshape(-1, 3)


def _read_stl_binary(path):
    data = Path(path).read_bytes()
    if len(data) < 84:
        raise MeshFormatError("truncated binary STL header", offset=len(data))
    (count,) = struct.unpack_from("<I", data, 80)
    expected = 84 + 50 * count
    if len(data) < expected:
        raise MeshFormatError(f"binary STL declares {count} triangles but is truncated", offset=len(data))
    record = np.dtype(
        [("normal", "<f4", 3), ("corners", "<f4", (3, 3)), ("attr", "<u2")]
    )
    rows = np.frombuffer(data, dtype=record, count=count, offset=84)
    corners = rows["corners"].astype(float).reshape(-1, 3)
    if not np.isfinite(corners).all():
        bad = int(np.argmax(~np.isfinite(corners).all(axis=1))) // 3
        raise MeshFormatError("non-finite vertex coordinate", offset=84 + 50 * bad)
    return corners, np.arange(len(corners)).reshape(-1, 3)


def write_stl_binary(path, mesh):
    corners = mesh.corners().astype("<f4")
    with open(path, "wb") as fh:
        fh.write(b"regrasp binary stl".ljust(80, b" "))
        fh.write(struct.pack("<I", len(corners)))
        for n, tri in zip(mesh.face_normals.astype("<f4"), corners):
            fh.write(n.tobytes() + tri.tobytes() + b"\x00\x00")


def write_stl_ascii(path, mesh):
    lines = ["solid regrasp"]
    for n, tri in zip(mesh.face_normals, mesh.corners()):
        lines.append(f"  facet normal {n[0]:.9g} {n[1]:.9g} {n[2]:.9g}")
        lines.append("    outer loop")
        for v in tri:
            lines.append(f"      vertex {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}")
        lines.append("    endloop")
        lines.append("  endfacet")
    lines.append("endsolid regrasp")
    Path(path).write_text("\n".join(lines) + "\n")


def write_obj(path, vertices, triangles, groups=None):
    """Write an OBJ file; ``groups`` is an optional list of (name, triangle slice)."""
    lines = [f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}" for v in vertices]
    if groups is None:
        groups = [(None, slice(0, len(triangles)))]
    for name, sl in groups:
        if name is not None:
            lines.append(f"g {name}")
        lines.extend(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}" for t in triangles[sl])
    Path(path).write_text("\n".join(lines) + "\n")


def write_facets_ply(path, mesh, facets):
    """ASCII PLY of all facets; a triangle shared by k facets is written k times.

    Each face carries a ``facet_id`` scalar for colouring.
    """
    faces = [(int(t), fid) for fid, facet in enumerate(facets) for t in sorted(facet.triangle_ids)]
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(mesh.vertices)}",
        "property double x",
        "property double y",
        "property double z",
        f"element face {len(faces)}",
        "property list uchar int vertex_indices",
        "property int facet_id",
        "end_header",
    ]
    lines.extend(f"{v[0]:.9g} {v[1]:.9g} {v[2]:.9g}" for v in mesh.vertices)
    for t, fid in faces:
        a, b, c = mesh.triangles[t]
        lines.append(f"3 {a} {b} {c} {fid}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_samples_ply(path, samples):
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(samples)}",
        "property double x",
        "property double y",
        "property double z",
        "property double nx",
        "property double ny",
        "property double nz",
        "property int triangle_id",
        "end_header",
    ]
    for s in samples:
        p, n = s.position, s.normal
        lines.append(
            f"{p[0]:.9g} {p[1]:.9g} {p[2]:.9g} {n[0]:.9g} {n[1]:.9g} {n[2]:.9g} {s.triangle_id}"
        )
    Path(path).write_text("\n".join(lines) + "\n")
