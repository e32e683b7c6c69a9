"""
Hand-built fixture meshes used as independent oracles across the test suite.

Everything here is constructed from first principles (explicit vertex rings,
manual cap triangulations, analytic intersection circles) rather than via
the package's own clipping or IO code, so tests compare two independent
routes to the same geometry.
"""
from __future__ import annotations

import math

import numpy as np

from mdplan import TriMesh


def _finish(verts, faces) -> TriMesh:
    """Assemble, flipping all faces if the winding came out inside-out."""
    v = np.asarray(verts, dtype=np.float64)
    f = np.asarray(faces, dtype=np.int64)
    c = v[f]
    vol = np.einsum("ij,ij->i", c[:, 0], np.cross(c[:, 1], c[:, 2])).sum() / 6.0
    if vol < 0:
        f = f[:, ::-1]
    return TriMesh(v, f)


def box(size=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0)) -> TriMesh:
    sx, sy, sz = size
    ox, oy, oz = origin
    v = np.array(
        [
            [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
            [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1],
        ],
        dtype=np.float64,
    ) * np.array([sx, sy, sz]) + np.array([ox, oy, oz])
    f = [
        (0, 2, 1), (0, 3, 2),          # bottom, -z
        (4, 5, 6), (4, 6, 7),          # top, +z
        (0, 1, 5), (0, 5, 4),          # -y
        (1, 2, 6), (1, 6, 5),          # +x
        (2, 3, 7), (2, 7, 6),          # +y
        (3, 0, 4), (3, 4, 7),          # -x
    ]
    return TriMesh(v, np.array(f, dtype=np.int64))


def cube(size: float = 1.0, origin=(0.0, 0.0, 0.0)) -> TriMesh:
    return box((size, size, size), origin)


def icosphere(radius: float = 1.0, subdivisions: int = 3, center=(0.0, 0.0, 0.0)) -> TriMesh:
    t = (1.0 + math.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=np.float64,
    )
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = list(verts)
    midpoint_cache: dict[tuple[int, int], int] = {}

    def midpoint(a: int, b: int) -> int:
        key = (a, b) if a < b else (b, a)
        idx = midpoint_cache.get(key)
        if idx is None:
            p = verts[a] + verts[b]
            p = p / np.linalg.norm(p)
            verts.append(p)
            idx = len(verts) - 1
            midpoint_cache[key] = idx
        return idx

    for _ in range(subdivisions):
        nxt = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            nxt += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = nxt

    v = np.asarray(verts) * radius + np.asarray(center, dtype=np.float64)
    return _finish(v, faces)


def torus(
    major_radius: float = 25.0,
    minor_radius: float = 10.0,
    n_major: int = 48,
    n_minor: int = 24,
    center=(0.0, 0.0, 10.0),
) -> TriMesh:
    cx, cy, cz = center
    verts = []
    for i in range(n_major):
        theta = 2 * math.pi * i / n_major
        for j in range(n_minor):
            phi = 2 * math.pi * j / n_minor
            rr = major_radius + minor_radius * math.cos(phi)
            verts.append(
                [
                    cx + rr * math.cos(theta),
                    cy + rr * math.sin(theta),
                    cz + minor_radius * math.sin(phi),
                ]
            )
    faces = []
    for i in range(n_major):
        for j in range(n_minor):
            a = i * n_minor + j
            b = ((i + 1) % n_major) * n_minor + j
            c = ((i + 1) % n_major) * n_minor + (j + 1) % n_minor
            d = i * n_minor + (j + 1) % n_minor
            faces += [(a, b, c), (a, c, d)]
    return _finish(verts, faces)


def _ear_clip_2d(poly: list[tuple[float, float]]) -> list[tuple[int, int, int]]:
    """Minimal ear clipping of a simple CCW polygon (indices into poly)."""
    idx = list(range(len(poly)))
    tris = []

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    def inside(p, a, b, c):
        return (
            cross(a, b, p) > 1e-12
            and cross(b, c, p) > 1e-12
            and cross(c, a, p) > 1e-12
        )

    guard = 0
    while len(idx) > 3 and guard < 10000:
        guard += 1
        for k in range(len(idx)):
            ia, ib, ic = idx[k - 1], idx[k], idx[(k + 1) % len(idx)]
            a, b, c = poly[ia], poly[ib], poly[ic]
            if cross(a, b, c) <= 1e-12:
                continue
            if any(inside(poly[j], a, b, c) for j in idx if j not in (ia, ib, ic)):
                continue
            tris.append((ia, ib, ic))
            del idx[k]
            break
    tris.append(tuple(idx))
    return tris


def extrude_polygon(poly_xz: list[tuple[float, float]], depth: float) -> TriMesh:
    """
    Extrude a simple CCW polygon in the (x, z) plane along +y.

    The CCW front cap at y=0 faces -y; walls and back cap are oriented to
    match, so the result is watertight and outward-oriented.
    """
    n = len(poly_xz)
    front = [(x, 0.0, z) for x, z in poly_xz]
    back = [(x, depth, z) for x, z in poly_xz]
    verts = front + back
    cap = _ear_clip_2d(list(poly_xz))
    faces: list[tuple[int, int, int]] = []
    faces.extend(cap)                                     # front cap, -y
    faces.extend((c + n, b + n, a + n) for a, b, c in cap)  # back cap, +y
    for k in range(n):
        k2 = (k + 1) % n
        faces.append((k2, k, k + n))
        faces.append((k2, k + n, k2 + n))
    return TriMesh(np.asarray(verts), np.asarray(faces, dtype=np.int64))


def l_prism(depth: float = 10.0) -> TriMesh:
    outline = [(0, 0), (30, 0), (30, 10), (10, 10), (10, 30), (0, 30)]
    return extrude_polygon(outline, depth)


def hook_prism(depth: float = 10.0) -> TriMesh:
    """Pole with a top arm and a hanging stub: a horizontal cut at z=20
    leaves the stub piece floating (used for the platform-contact test)."""
    outline = [
        (0, 0), (10, 0), (10, 25), (20, 25), (20, 10),
        (30, 10), (30, 30), (0, 30),
    ]
    return extrude_polygon(outline, depth)


def overhang_tee(depth: float = 20.0) -> TriMesh:
    """Block of 20x20x20 with a 10 mm ledge sticking out at z in [10, 20];
    the ledge underside (area 10 x depth) overhangs."""
    outline = [(0, 0), (20, 0), (20, 20), (-10, 20), (-10, 10), (0, 10)]
    return extrude_polygon(outline, depth)


def _lat_ring(center_z: float, radius: float, lat: float, segments: int):
    rho = radius * math.cos(lat)
    z = center_z + radius * math.sin(lat)
    return [
        (rho * math.cos(2 * math.pi * k / segments),
         rho * math.sin(2 * math.pi * k / segments),
         z)
        for k in range(segments)
    ]


def snowman(
    bottom_radius: float = 20.0,
    top_radius: float = 14.0,
    centre_gap: float = 30.0,
    segments: int = 48,
    rings_per_sphere: int = 22,
) -> TriMesh:
    """
    Union of two overlapping spheres built as one watertight surface: the
    bottom sphere is flattened at its 45-degree latitude so it rests on the
    platform without overhang, and the two spherical zones share the exact
    neck ring where the spheres intersect.
    """
    r1, r2 = bottom_radius, top_radius
    cz1 = r1 * math.cos(math.radians(45.0))     # flat base sits at z = 0
    cz2 = cz1 + centre_gap
    # intersection circle of the two spheres
    zc = (r1 * r1 - r2 * r2 + cz2 * cz2 - cz1 * cz1) / (2.0 * (cz2 - cz1))
    lat_neck_1 = math.asin((zc - cz1) / r1)
    lat_neck_2 = math.asin((zc - cz2) / r2)
    lat_base = math.radians(-45.0)

    verts: list[tuple[float, float, float]] = []
    rings: list[list[int]] = []

    def add_ring(points) -> list[int]:
        base = len(verts)
        verts.extend(points)
        return list(range(base, len(verts)))

    # base disk
    centre_bottom = len(verts)
    verts.append((0.0, 0.0, 0.0))
    lats1 = np.linspace(lat_base, lat_neck_1, rings_per_sphere)
    for lat in lats1[:-1]:
        rings.append(add_ring(_lat_ring(cz1, r1, lat, segments)))
    # the neck ring is the analytic intersection circle, shared by both zones
    rho_c = math.sqrt(r1 * r1 - (zc - cz1) ** 2)
    rings.append(
        add_ring(
            (rho_c * math.cos(2 * math.pi * k / segments),
             rho_c * math.sin(2 * math.pi * k / segments),
             zc)
            for k in range(segments)
        )
    )
    lats2 = np.linspace(lat_neck_2, math.pi / 2, rings_per_sphere)
    for lat in lats2[1:-1]:
        rings.append(add_ring(_lat_ring(cz2, r2, lat, segments)))
    pole = len(verts)
    verts.append((0.0, 0.0, cz2 + r2))

    faces: list[tuple[int, int, int]] = []
    first = rings[0]
    for k in range(segments):
        faces.append((centre_bottom, first[(k + 1) % segments], first[k]))
    for lower, upper in zip(rings[:-1], rings[1:]):
        for k in range(segments):
            k2 = (k + 1) % segments
            faces.append((lower[k], lower[k2], upper[k2]))
            faces.append((lower[k], upper[k2], upper[k]))
    last = rings[-1]
    for k in range(segments):
        faces.append((last[k], last[(k + 1) % segments], pole))
    return _finish(verts, faces)


def mushroom(
    stem_radius: float = 8.0,
    stem_height: float = 20.0005,
    cap_radius: float = 14.0,
    cap_height: float = 6.0,
    segments: int = 48,
) -> TriMesh:
    """
    Cylinder with a wider flat cap on top.  The cap's underside annulus sits
    0.5 um above the 20 mm candidate offset, within the base-contact slack,
    so one cut right under the rim makes both parts support-free.
    """
    verts: list[tuple[float, float, float]] = []

    def ring(radius: float, z: float) -> list[int]:
        base = len(verts)
        verts.extend(
            (radius * math.cos(2 * math.pi * k / segments),
             radius * math.sin(2 * math.pi * k / segments),
             z)
            for k in range(segments)
        )
        return list(range(base, len(verts)))

    bottom_centre = len(verts)
    verts.append((0.0, 0.0, 0.0))
    r_b0 = ring(stem_radius, 0.0)
    r_b1 = ring(stem_radius, stem_height)
    r_c0 = ring(cap_radius, stem_height)
    r_c1 = ring(cap_radius, stem_height + cap_height)
    top_centre = len(verts)
    verts.append((0.0, 0.0, stem_height + cap_height))

    faces: list[tuple[int, int, int]] = []
    for k in range(segments):
        k2 = (k + 1) % segments
        faces.append((bottom_centre, r_b0[k2], r_b0[k]))          # bottom disk
        faces.append((r_b0[k], r_b0[k2], r_b1[k2]))               # stem wall
        faces.append((r_b0[k], r_b1[k2], r_b1[k]))
        faces.append((r_b1[k], r_b1[k2], r_c0[k2]))               # cap underside
        faces.append((r_b1[k], r_c0[k2], r_c0[k]))
        faces.append((r_c0[k], r_c0[k2], r_c1[k2]))               # cap wall
        faces.append((r_c0[k], r_c1[k2], r_c1[k]))
        faces.append((top_centre, r_c1[k], r_c1[k2]))             # cap top
    return _finish(verts, faces)


def two_cubes(gap: float = 1.0, size: float = 1.0) -> TriMesh:
    """Two disjoint cubes merged into one vertex/triangle soup."""
    a = cube(size)
    b = cube(size, origin=(size + gap, 0.0, 0.0))
    verts = np.vstack([a.vertices, b.vertices])
    faces = np.vstack([a.triangles, b.triangles + len(a.vertices)])
    return TriMesh(verts, faces)


def rotated_cube(angle_deg: float = 50.0, size: float = 1.0) -> TriMesh:
    """Cube rotated about the x axis, floating above the platform."""
    m = cube(size, origin=(-size / 2, -size / 2, -size / 2))
    a = math.radians(angle_deg)
    rot = np.array(
        [[1, 0, 0], [0, math.cos(a), -math.sin(a)], [0, math.sin(a), math.cos(a)]]
    )
    verts = m.vertices @ rot.T + np.array([0.0, 0.0, 5.0])
    return TriMesh(verts, m.triangles)


def hollow_box(outer: float = 10.0, wall: float = 2.0) -> TriMesh:
    """Cube with a cubic cavity: two nested shells in one mesh."""
    shell = cube(outer)
    inner = cube(outer - 2 * wall, origin=(wall, wall, wall))
    # cavity shell faces point into the solid: reverse the inner cube
    verts = np.vstack([shell.vertices, inner.vertices])
    faces = np.vstack([shell.triangles, inner.triangles[:, ::-1] + len(shell.vertices)])
    return TriMesh(verts, faces)
