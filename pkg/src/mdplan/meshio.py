"""
STL (binary and ASCII) and OBJ reading, binary STL writing.

Loaders weld vertices on a 1e-6 mm grid to recover shared edges from facet
soup, drop collapsed triangles, and validate the result as a watertight
mesh.
"""
from __future__ import annotations

import re
import struct

import numpy as np

from .mesh import InvalidMeshError, TriMesh, WELD_EPS

_ASCII_FLOAT = rb"([-+0-9.eE]+)"
_VERTEX_RE = re.compile(rb"vertex\s+" + rb"\s+".join([_ASCII_FLOAT] * 3))


def weld_vertices(points: np.ndarray, tolerance: float = WELD_EPS):
    """Merge points that quantise to the same grid cell of size `tolerance`."""
    quantised = np.round(points / tolerance).astype(np.int64)
    _, first, inverse = np.unique(
        quantised, axis=0, return_index=True, return_inverse=True
    )
    return points[first], inverse


def mesh_from_soup(triangles_xyz: np.ndarray) -> TriMesh:
    """Build a welded, validated TriMesh from an (n, 3, 3) facet array."""
    if triangles_xyz.size == 0:
        raise InvalidMeshError("no facets")
    flat = triangles_xyz.reshape(-1, 3)
    verts, inverse = weld_vertices(flat)
    faces = inverse.reshape(-1, 3)
    keep = (
        (faces[:, 0] != faces[:, 1])
        & (faces[:, 1] != faces[:, 2])
        & (faces[:, 2] != faces[:, 0])
    )
    return TriMesh(verts, faces[keep])


def _parse_stl_binary(data: bytes) -> np.ndarray:
    if len(data) < 84:
        raise InvalidMeshError("binary STL truncated")
    (count,) = struct.unpack_from("<I", data, 80)
    expected = 84 + 50 * count
    if len(data) < expected:
        raise InvalidMeshError("binary STL facet count does not match size")
    records = np.frombuffer(data, dtype=np.uint8, count=50 * count, offset=84)
    records = records.reshape(count, 50)
    floats = records[:, :48].copy().view("<f4").reshape(count, 12)
    return floats[:, 3:12].astype(np.float64).reshape(count, 3, 3)


def _parse_stl_ascii(data: bytes) -> np.ndarray:
    coords = []
    for match in _VERTEX_RE.finditer(data):
        coords.append([float(g) for g in match.groups()])
    if len(coords) % 3 != 0:
        raise InvalidMeshError("ASCII STL vertex count not a multiple of three")
    if not coords:
        raise InvalidMeshError("ASCII STL contains no facets")
    return np.asarray(coords, dtype=np.float64).reshape(-1, 3, 3)


def _parse_obj(data: bytes) -> TriMesh:
    verts: list[list[float]] = []
    faces: list[tuple[int, int, int]] = []
    try:
        text = data.decode("utf-8", errors="replace")
    except Exception as exc:  # pragma: no cover - decode with replace cannot fail
        raise InvalidMeshError(f"OBJ decode failure: {exc}")
    for line in text.splitlines():
        line = line.strip()
        if line.startswith("v "):
            parts = line.split()
            if len(parts) < 4:
                raise InvalidMeshError(f"bad OBJ vertex line: {line!r}")
            verts.append([float(parts[1]), float(parts[2]), float(parts[3])])
        elif line.startswith("f "):
            refs = []
            for token in line.split()[1:]:
                idx = int(token.split("/")[0])
                refs.append(idx - 1 if idx > 0 else len(verts) + idx)
            if len(refs) < 3:
                raise InvalidMeshError(f"bad OBJ face line: {line!r}")
            for k in range(1, len(refs) - 1):
                faces.append((refs[0], refs[k], refs[k + 1]))
    if not verts or not faces:
        raise InvalidMeshError("OBJ contains no geometry")
    v = np.asarray(verts, dtype=np.float64)
    f = np.asarray(faces, dtype=np.int64)
    if f.min() < 0 or f.max() >= len(v):
        raise InvalidMeshError("OBJ face index out of range")
    # weld through the same path as STL so shared-but-duplicated vertices merge
    return mesh_from_soup(v[f])


def load_mesh(data: bytes, fmt: str) -> TriMesh:
    """
    Parse raw file content in the given format into a validated TriMesh.

    fmt is one of "stl-binary", "stl-ascii", "obj".
    """
    try:
        if fmt == "stl-binary":
            return mesh_from_soup(_parse_stl_binary(data))
        if fmt == "stl-ascii":
            return mesh_from_soup(_parse_stl_ascii(data))
        if fmt == "obj":
            return _parse_obj(data)
    except InvalidMeshError:
        raise
    except (ValueError, struct.error) as exc:
        raise InvalidMeshError(f"parse failure: {exc}") from exc
    raise ValueError(f"unknown mesh format {fmt!r}")


def detect_format(path: str, data: bytes) -> str:
    """Guess the format from the file name and a content sniff."""
    lower = path.lower()
    if lower.endswith(".obj"):
        return "obj"
    if data[:6].lower().startswith(b"solid") and b"facet" in data[:4096]:
        # real binary files may also start with "solid"; check size consistency
        if len(data) >= 84:
            (count,) = struct.unpack_from("<I", data, 80)
            if 84 + 50 * count == len(data):
                return "stl-binary"
        return "stl-ascii"
    return "stl-binary"


def load_mesh_file(path: str) -> TriMesh:
    with open(path, "rb") as fh:
        data = fh.read()
    return load_mesh(data, detect_format(path, data))


def save_stl(mesh: TriMesh, header: str = "mdplan") -> bytes:
    """Serialise a mesh as binary STL with normals recomputed from geometry."""
    tris = mesh.corners.astype("<f4")
    normals = mesh.face_normals.astype("<f4")
    count = len(tris)
    out = bytearray(84 + 50 * count)
    out[0:80] = header.encode("ascii", "replace")[:80].ljust(80, b"\0")
    struct.pack_into("<I", out, 80, count)
    records = np.zeros((count, 50), dtype=np.uint8)
    payload = np.concatenate([normals, tris.reshape(count, 9)], axis=1).astype("<f4")
    records[:, :48] = payload.view(np.uint8).reshape(count, 48)
    out[84:] = records.tobytes()
    return bytes(out)


def save_stl_file(mesh: TriMesh, path: str, header: str = "mdplan") -> None:
    with open(path, "wb") as fh:
        fh.write(save_stl(mesh, header))
