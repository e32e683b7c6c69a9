"""
Plane clipping of watertight meshes with cross-section capping.

clip() splits a mesh into the parts above and below a plane.  Cut triangles
are subdivided, the intersection curve is traced into closed loops, and each
side receives cap polygons triangulated in the plane (holes supported).  Cap
faces on the upper output point against the plane normal, caps on the lower
output point along it, so both outputs stay watertight and positively
oriented.
"""
from __future__ import annotations

import numpy as np

from .mesh import (
    DEGENERATE_AREA,
    DegenerateClipError,
    Plane,
    PLANE_COINCIDENCE_EPS,
    TriMesh,
    plane_basis,
)
from .triangulate import loop_signed_area, point_in_loop, triangulate_with_holes

ON_PLANE_EPS = 1e-7


def cap_face_mask(mesh: TriMesh, plane: Plane, side: str) -> np.ndarray:
    """
    Identify cap faces of a clip output: triangles whose vertices all lie on
    the plane, facing -normal for the upper side and +normal for the lower.
    """
    sd = plane.signed_distance(mesh.vertices)
    on = np.abs(sd[mesh.triangles]).max(axis=1) <= 10 * ON_PLANE_EPS
    align = mesh.face_normals @ plane.normal
    want = -1.0 if side == "upper" else 1.0
    return on & (align * want >= 1.0 - 1e-6)


def _trace_loops(segments: list[tuple[int, int]]) -> list[list[int]]:
    """Chain unordered point-id segments into closed loops, deterministically."""
    adjacency: dict[int, list[int]] = {}
    for a, b in segments:
        adjacency.setdefault(a, []).append(b)
        adjacency.setdefault(b, []).append(a)
    for neighbours in adjacency.values():
        neighbours.sort()
    used: set[tuple[int, int]] = set()
    loops = []
    for start in sorted(adjacency):
        for first in adjacency[start]:
            if (start, first) in used:
                continue
            loop = [start]
            used.add((start, first))
            used.add((first, start))
            prev, cur = start, first
            while cur != start:
                loop.append(cur)
                nxt = None
                for cand in adjacency[cur]:
                    if cand != prev and (cur, cand) not in used:
                        nxt = cand
                        break
                if nxt is None:
                    # open chain: numeric inconsistency; drop it
                    loop = None
                    break
                used.add((cur, nxt))
                used.add((nxt, cur))
                prev, cur = cur, nxt
            if loop is not None and len(loop) >= 3:
                loops.append(loop)
    return loops


def _build_caps(
    loops: list[list[int]],
    all_points: np.ndarray,
    plane: Plane,
) -> list[tuple[int, int, int]]:
    """Triangulate the traced loops; output winding is CCW in the plane basis
    (3D normal = +plane.normal)."""
    if not loops:
        return []
    u, v = plane_basis(plane.normal)
    pts2d = np.column_stack([(all_points @ u), (all_points @ v)])

    areas = []
    for loop in loops:
        areas.append(loop_signed_area(pts2d[loop]))

    # nesting depth by even-odd containment of a representative vertex
    depths = []
    for i, loop in enumerate(loops):
        rep = pts2d[loop[0]] + np.array([1.1e-9, 1.7e-9])
        d = 0
        for j, other in enumerate(loops):
            if i != j and point_in_loop(rep, pts2d[other]):
                d += 1
        depths.append(d)

    outers = [i for i in range(len(loops)) if depths[i] % 2 == 0]
    holes = [i for i in range(len(loops)) if depths[i] % 2 == 1]

    oriented: dict[int, list[int]] = {}
    for i in outers:
        oriented[i] = loops[i] if areas[i] > 0 else loops[i][::-1]
    for i in holes:
        oriented[i] = loops[i] if areas[i] < 0 else loops[i][::-1]

    children: dict[int, list[int]] = {i: [] for i in outers}
    for h in holes:
        rep = pts2d[loops[h][0]] + np.array([1.1e-9, 1.7e-9])
        host = None
        host_area = np.inf
        for o in outers:
            if depths[o] == depths[h] - 1 and point_in_loop(rep, pts2d[loops[o]]):
                if abs(areas[o]) < host_area:
                    host = o
                    host_area = abs(areas[o])
        if host is not None:
            children[host].append(h)

    tris: list[tuple[int, int, int]] = []
    for o in outers:
        tris.extend(
            triangulate_with_holes(pts2d, oriented[o], [oriented[h] for h in children[o]])
        )
    return tris


def clip(mesh: TriMesh, plane: Plane) -> tuple[TriMesh | None, TriMesh | None]:
    """
    Split `mesh` by `plane` into (upper, lower), both watertight and capped.

    Either side is None when empty.  V(upper) + V(lower) equals V(mesh) up to
    rounding.  Raises DegenerateClipError when the plane lies on a mesh face
    of nonzero area (within PLANE_COINCIDENCE_EPS).
    """
    verts = mesh.vertices
    tris = mesh.triangles
    sd = plane.signed_distance(verts)

    cls = np.zeros(len(verts), dtype=np.int8)
    cls[sd > ON_PLANE_EPS] = 1
    cls[sd < -ON_PLANE_EPS] = -1
    tri_cls = cls[tris]

    flat = (tri_cls == 0).all(axis=1)
    if flat.any() and (mesh.face_areas[flat] > DEGENERATE_AREA).any():
        raise DegenerateClipError("plane coincident with a mesh face")

    has_pos = (tri_cls == 1).any(axis=1)
    has_neg = (tri_cls == -1).any(axis=1)
    if not has_neg.any():
        return mesh, None
    if not has_pos.any():
        return None, mesh

    crossing = has_pos & has_neg
    up_whole = ~has_neg & ~flat
    low_whole = ~has_pos & ~flat

    points = [verts]
    next_id = len(verts)
    edge_pts: dict[tuple[int, int], int] = {}
    new_coords: list[np.ndarray] = []

    def edge_point(a: int, b: int) -> int:
        nonlocal next_id
        key = (a, b) if a < b else (b, a)
        idx = edge_pts.get(key)
        if idx is None:
            da, db = sd[key[0]], sd[key[1]]
            t = da / (da - db)
            p = verts[key[0]] + t * (verts[key[1]] - verts[key[0]])
            new_coords.append(p)
            idx = next_id
            next_id += 1
            edge_pts[key] = idx
        return idx

    upper_faces: list[tuple[int, int, int]] = list(map(tuple, tris[up_whole]))
    lower_faces: list[tuple[int, int, int]] = list(map(tuple, tris[low_whole]))
    segments: list[tuple[int, int]] = []

    for fi in np.flatnonzero(crossing):
        ids = tris[fi]
        cs = tri_cls[fi]
        poly_u: list[int] = []
        poly_l: list[int] = []
        cut: list[int] = []
        for k in range(3):
            a = int(ids[k])
            b = int(ids[(k + 1) % 3])
            ca, cb = int(cs[k]), int(cs[(k + 1) % 3])
            if ca >= 0:
                poly_u.append(a)
            if ca <= 0:
                poly_l.append(a)
            if ca == 0:
                cut.append(a)
            if ca * cb == -1:
                w = edge_point(a, b)
                poly_u.append(w)
                poly_l.append(w)
                cut.append(w)
        for poly, out in ((poly_u, upper_faces), (poly_l, lower_faces)):
            if len(poly) >= 3:
                for k in range(1, len(poly) - 1):
                    out.append((poly[0], poly[k], poly[k + 1]))
        if len(cut) == 2:
            segments.append((cut[0], cut[1]))

    # edges lying in the plane are cut segments when they separate the sides
    on_edges_up: set[tuple[int, int]] = set()
    on_edges_low: set[tuple[int, int]] = set()
    for fi in np.flatnonzero(up_whole | low_whole):
        cs = tri_cls[fi]
        if (cs == 0).sum() == 2:
            ids = tris[fi]
            pair = tuple(sorted(int(ids[k]) for k in range(3) if cs[k] == 0))
            (on_edges_up if up_whole[fi] else on_edges_low).add(pair)
    segments.extend(sorted(on_edges_up & on_edges_low))

    all_points = np.vstack([verts] + new_coords) if new_coords else verts
    cap = _build_caps(_trace_loops(segments), all_points, plane)

    lower_faces.extend(cap)
    upper_faces.extend((c, b, a) for a, b, c in cap)

    def build(faces: list[tuple[int, int, int]]) -> TriMesh | None:
        if not faces:
            return None
        arr = np.asarray(faces, dtype=np.int64)
        proper = (arr[:, 0] != arr[:, 1]) & (arr[:, 1] != arr[:, 2]) & (arr[:, 2] != arr[:, 0])
        arr = arr[proper]
        if not len(arr):
            return None
        used, inverse = np.unique(arr, return_inverse=True)
        return TriMesh(all_points[used], inverse.reshape(-1, 3), validate=False)

    return build(upper_faces), build(lower_faces)


def plane_crosses(mesh: TriMesh, plane: Plane, eps: float = 1e-9) -> bool:
    """True when at least one triangle has vertices strictly on both sides."""
    sd = plane.signed_distance(mesh.vertices)
    tri_sd = sd[mesh.triangles]
    return bool(((tri_sd.min(axis=1) < -eps) & (tri_sd.max(axis=1) > eps)).any())
