"""
Core mesh types and measurements.

All geometry is in millimetres.  Meshes are closed, consistently oriented
triangle soups with shared vertices; planes carry a signed-side convention
where the positive side ("above") is the half-space the normal points into.
Everything here is immutable after construction and safe to share across
threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _graph_components


class InvalidMeshError(ValueError):
    """Raised when byte input or vertex/triangle arrays do not form a valid mesh."""


class DegenerateClipError(ValueError):
    """Raised when a clipping plane coincides with a mesh face over nonzero area."""


DEGENERATE_AREA = 1e-9          # triangles at or below this area are rejected
PLANE_COINCIDENCE_EPS = 1e-7    # face-on-plane tolerance for degenerate clips
WELD_EPS = 1e-6                 # vertex weld tolerance for file loading


def _as_points(a) -> np.ndarray:
    pts = np.ascontiguousarray(a, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected (n, 3) points, got {pts.shape}")
    return pts


class TriMesh:
    """
    Watertight oriented triangle mesh.

    Parameters
    ----------
    vertices : (V, 3) float
        Vertex positions in mm.
    triangles : (T, 3) int
        Vertex index triples, counter-clockwise seen from outside.
    validate : bool
        If True (default) check manifoldness, orientation and volume and
        raise InvalidMeshError on violation.
    """

    __slots__ = ("vertices", "triangles", "_cache")

    def __init__(self, vertices, triangles, validate: bool = True):
        v = _as_points(vertices)
        t = np.ascontiguousarray(triangles, dtype=np.int64)
        if t.ndim != 2 or t.shape[1] != 3:
            raise InvalidMeshError(f"expected (t, 3) triangle indices, got {t.shape}")
        if len(t) and (t.min() < 0 or t.max() >= len(v)):
            raise InvalidMeshError("triangle index out of range")
        v.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "_cache", {})
        if validate:
            self._validate()

    def __setattr__(self, name, value):
        raise AttributeError("TriMesh is immutable")

    # -- derived quantities, computed lazily and memoised --------------------

    def _memo(self, key, fn):
        cache = self._cache
        if key not in cache:
            cache[key] = fn()
        return cache[key]

    @property
    def corners(self) -> np.ndarray:
        """Triangle corner coordinates, shape (T, 3, 3)."""
        return self._memo("corners", lambda: self.vertices[self.triangles])

    @property
    def cross_products(self) -> np.ndarray:
        def fn():
            c = self.corners
            return np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
        return self._memo("cross", fn)

    @property
    def face_areas(self) -> np.ndarray:
        return self._memo(
            "areas", lambda: 0.5 * np.linalg.norm(self.cross_products, axis=1)
        )

    @property
    def face_normals(self) -> np.ndarray:
        def fn():
            cr = self.cross_products
            n = np.linalg.norm(cr, axis=1)
            safe = np.where(n > 0, n, 1.0)
            return cr / safe[:, None]
        return self._memo("normals", fn)

    @property
    def face_centroids(self) -> np.ndarray:
        return self._memo("centroids", lambda: self.corners.mean(axis=1))

    @property
    def volume(self) -> float:
        """Enclosed volume via the divergence theorem (mm^3)."""
        def fn():
            c = self.corners
            return float(
                np.einsum("ij,ij->i", c[:, 0], np.cross(c[:, 1], c[:, 2])).sum() / 6.0
            )
        return self._memo("volume", fn)

    @property
    def area(self) -> float:
        """Total surface area (mm^2)."""
        return self._memo("area", lambda: float(self.face_areas.sum()))

    @property
    def aabb(self) -> "Aabb":
        def fn():
            return Aabb(self.vertices.min(axis=0), self.vertices.max(axis=0))
        return self._memo("aabb", fn)

    @property
    def edges_sorted(self) -> np.ndarray:
        """Undirected edges, one row per triangle edge, each row sorted."""
        def fn():
            t = self.triangles
            e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
            return np.sort(e, axis=1)
        return self._memo("edges", fn)

    def _validate(self):
        if len(self.triangles) == 0:
            raise InvalidMeshError("empty mesh")
        if not np.isfinite(self.vertices).all():
            raise InvalidMeshError("non-finite vertex coordinates")
        if (self.face_areas <= DEGENERATE_AREA).any():
            raise InvalidMeshError("degenerate triangle (area below threshold)")
        # Watertight 2-manifold: every directed edge appears exactly once and
        # is matched by its reverse, hence every undirected edge has 2 faces.
        t = self.triangles
        directed = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        d_view = directed[:, 0] * (self.vertices.shape[0] + 1) + directed[:, 1]
        uniq, counts = np.unique(d_view, return_counts=True)
        if (counts > 1).any():
            raise InvalidMeshError("non-manifold (duplicated directed edge)")
        rev_view = directed[:, 1] * (self.vertices.shape[0] + 1) + directed[:, 0]
        if not np.isin(rev_view, uniq, assume_unique=False).all():
            raise InvalidMeshError("non-watertight")
        if self.volume <= 0.0:
            raise InvalidMeshError("zero volume or inverted orientation")

    def __repr__(self):
        return f"TriMesh({len(self.vertices)} vertices, {len(self.triangles)} triangles)"


@dataclass(frozen=True)
class Plane:
    """
    Oriented plane given by an anchor point and a unit normal.

    signed_distance(p) = (p - anchor) . normal; positive values are "above"
    the plane, negative "below".
    """

    anchor: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.anchor, dtype=np.float64).reshape(3).copy()
        n = np.asarray(self.normal, dtype=np.float64).reshape(3).copy()
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise ValueError("plane normal must be unit length")
        a.setflags(write=False)
        n.setflags(write=False)
        object.__setattr__(self, "anchor", a)
        object.__setattr__(self, "normal", n)

    def signed_distance(self, points) -> np.ndarray | float:
        p = np.asarray(points, dtype=np.float64)
        if p.ndim == 1:
            return float(np.dot(p - self.anchor, self.normal))
        return (p - self.anchor) @ self.normal

    @property
    def offset(self) -> float:
        """Scalar offset anchor . normal along the plane's own normal."""
        return float(np.dot(self.anchor, self.normal))

    def flipped(self) -> "Plane":
        return Plane(self.anchor, -self.normal)


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned bounding box."""

    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.min, dtype=np.float64).reshape(3).copy()
        hi = np.asarray(self.max, dtype=np.float64).reshape(3).copy()
        if (lo > hi).any():
            raise ValueError("Aabb min must not exceed max")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.max - self.min))

    @property
    def corners(self) -> np.ndarray:
        lo, hi = self.min, self.max
        return np.array(
            [[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])]
        )


@dataclass(frozen=True)
class HalfSpaceCell:
    """
    Convex cell as a conjunction of half-spaces.

    Each entry is (plane, side) with side "above" (keep signed distance >= 0)
    or "below" (keep <= 0).  An empty list is the whole space.
    """

    halves: tuple = ()

    def __post_init__(self):
        halves = tuple(self.halves)
        for plane, side in halves:
            if side not in ("above", "below"):
                raise ValueError(f"invalid half-space side {side!r}")
            if not isinstance(plane, Plane):
                raise TypeError("half-space entry must be (Plane, side)")
        object.__setattr__(self, "halves", halves)

    def contains(self, point, eps: float = 0.0) -> bool:
        return bool(np.all(self.slack(point) >= -eps)) if self.halves else True

    def slack(self, points) -> np.ndarray:
        """
        Per-half-space slack for one point (H,) or many points (N, H).
        Positive slack means strictly inside that half-space.
        """
        p = np.asarray(points, dtype=np.float64)
        single = p.ndim == 1
        p = np.atleast_2d(p)
        if not self.halves:
            return np.full((len(p), 0) if not single else (0,), np.inf)
        cols = []
        for plane, side in self.halves:
            sd = plane.signed_distance(p)
            cols.append(sd if side == "above" else -sd)
        out = np.stack(cols, axis=1)
        return out[0] if single else out

    def appended(self, plane: Plane, side: str) -> "HalfSpaceCell":
        return HalfSpaceCell(self.halves + ((plane, side),))


def cell_contains(cell: HalfSpaceCell, point, eps: float) -> bool:
    """True iff every half-space test of the cell passes with slack eps."""
    return cell.contains(point, eps=eps)


def volume(mesh: TriMesh) -> float:
    """Enclosed volume of a watertight mesh in mm^3."""
    return mesh.volume


def surface_area(mesh: TriMesh) -> float:
    """Sum of triangle areas in mm^2."""
    return mesh.area


def plane_basis(normal) -> tuple[np.ndarray, np.ndarray]:
    """
    Deterministic orthonormal in-plane basis (u, v) with (u, v, normal)
    right-handed.
    """
    n = np.asarray(normal, dtype=np.float64)
    e = np.zeros(3)
    e[int(np.argmin(np.abs(n)))] = 1.0
    u = np.cross(n, e)
    u /= np.linalg.norm(u)
    v = np.cross(n, u)
    return u, v


def submesh(mesh: TriMesh, face_indices, validate: bool = True) -> TriMesh:
    """Extract the faces in face_indices as a new compacted mesh."""
    faces = mesh.triangles[np.asarray(face_indices, dtype=np.int64)]
    used, inverse = np.unique(faces, return_inverse=True)
    return TriMesh(mesh.vertices[used], inverse.reshape(-1, 3), validate=validate)


def _face_adjacency_labels(mesh: TriMesh) -> np.ndarray:
    """Label triangles by edge-connected shell."""
    t = mesh.triangles
    n_faces = len(t)
    edges = mesh.edges_sorted
    face_idx = np.concatenate([np.arange(n_faces)] * 3)
    key = edges[:, 0] * (len(mesh.vertices) + 1) + edges[:, 1]
    order = np.argsort(key, kind="stable")
    key_s = key[order]
    face_s = face_idx[order]
    # consecutive equal keys are the two sides of a shared edge
    same = key_s[1:] == key_s[:-1]
    a = face_s[:-1][same]
    b = face_s[1:][same]
    graph = coo_matrix((np.ones(len(a)), (a, b)), shape=(n_faces, n_faces))
    _, labels = _graph_components(graph, directed=False)
    return labels


def _ray_crossings(mesh_corners: np.ndarray, origin: np.ndarray, direction: np.ndarray) -> int:
    """Count ray/triangle crossings (Moller-Trumbore), for inside tests."""
    v0 = mesh_corners[:, 0]
    e1 = mesh_corners[:, 1] - v0
    e2 = mesh_corners[:, 2] - v0
    h = np.cross(direction, e2)
    det = np.einsum("ij,ij->i", e1, h)
    ok = np.abs(det) > 1e-12
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    s = origin - v0
    u = np.einsum("ij,ij->i", s, h) * inv
    q = np.cross(s, e1)
    v = np.einsum("j,ij->i", direction, q) * inv
    t = np.einsum("ij,ij->i", e2, q) * inv
    hit = ok & (u >= 0) & (v >= 0) & (u + v <= 1) & (t > 1e-9)
    return int(hit.sum())


def _point_in_shell(point: np.ndarray, shell_corners: np.ndarray) -> bool:
    # direction chosen irrational-ish so axis-aligned geometry is not grazed
    direction = np.array([0.57735026, 0.57735027, 0.57735028])
    direction /= np.linalg.norm(direction)
    return _ray_crossings(shell_corners, point, direction) % 2 == 1


def connected_components(mesh: TriMesh) -> list[TriMesh]:
    """
    Split a mesh into edge-connected solids.

    Cavity shells (negative enclosed volume) are assigned to the component of
    the outer shell that contains them, so hollow models stay valid.  Output
    order is deterministic: ascending AABB min corner, lexicographic.
    """
    labels = _face_adjacency_labels(mesh)
    n_shells = labels.max() + 1
    if n_shells == 1:
        return [mesh]

    shell_faces = [np.flatnonzero(labels == i) for i in range(n_shells)]
    shell_vol = np.empty(n_shells)
    c = mesh.corners
    tet = np.einsum("ij,ij->i", c[:, 0], np.cross(c[:, 1], c[:, 2])) / 6.0
    for i, fidx in enumerate(shell_faces):
        shell_vol[i] = tet[fidx].sum()

    outer = [i for i in range(n_shells) if shell_vol[i] > 0]
    cavities = [i for i in range(n_shells) if shell_vol[i] <= 0]

    groups = {i: [i] for i in outer}
    for cav in cavities:
        probe = mesh.vertices[mesh.triangles[shell_faces[cav][0], 0]]
        host = None
        best_vol = np.inf
        for out in outer:
            if _point_in_shell(probe, c[shell_faces[out]]) and shell_vol[out] < best_vol:
                host = out
                best_vol = shell_vol[out]
        if host is None:
            raise InvalidMeshError("cavity shell not enclosed by any outer shell")
        groups[host].append(cav)

    parts = []
    for out in outer:
        fidx = np.sort(np.concatenate([shell_faces[s] for s in groups[out]]))
        parts.append(submesh(mesh, fidx))
    parts.sort(key=lambda m: tuple(m.aabb.min))
    return parts
