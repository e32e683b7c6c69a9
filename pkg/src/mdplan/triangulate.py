"""
2D polygon triangulation by ear clipping, with hole support via bridge edges.

Used for capping the cross-sections produced by plane clipping.  Input loops
are index lists into a shared 2D point array; output triangles reference the
same indices, so callers can map results straight back to 3D vertices.
"""
from __future__ import annotations

import numpy as np


def loop_signed_area(points: np.ndarray) -> float:
    """Signed area of a closed 2D loop (positive if counter-clockwise)."""
    x = points[:, 0]
    y = points[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def point_in_loop(point: np.ndarray, loop: np.ndarray) -> bool:
    """Even-odd crossing test; boundary points give an arbitrary result."""
    x, y = point
    px = loop[:, 0]
    py = loop[:, 1]
    qx = np.roll(px, -1)
    qy = np.roll(py, -1)
    crosses = (py > y) != (qy > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = px + (y - py) * (qx - px) / np.where(qy == py, 1.0, qy - py)
    hits = crosses & (xint > x)
    return bool(hits.sum() % 2)


def _cross2(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _any_point_strictly_inside(tri_a, tri_b, tri_c, pts: np.ndarray, eps: float) -> bool:
    if len(pts) == 0:
        return False
    d1 = (tri_b[0] - tri_a[0]) * (pts[:, 1] - tri_a[1]) - (tri_b[1] - tri_a[1]) * (pts[:, 0] - tri_a[0])
    d2 = (tri_c[0] - tri_b[0]) * (pts[:, 1] - tri_b[1]) - (tri_c[1] - tri_b[1]) * (pts[:, 0] - tri_b[0])
    d3 = (tri_a[0] - tri_c[0]) * (pts[:, 1] - tri_c[1]) - (tri_a[1] - tri_c[1]) * (pts[:, 0] - tri_c[0])
    return bool(np.any((d1 > eps) & (d2 > eps) & (d3 > eps)))


def ear_clip(points: np.ndarray, indices: list[int]) -> list[tuple[int, int, int]]:
    """
    Triangulate a simple CCW polygon given as indices into `points`.

    Tolerates duplicated bridge vertices (zero-width channels) as produced by
    hole merging.  Returns triangles as index triples.
    """
    ring = list(indices)
    if len(ring) < 3:
        return []
    span = points[ring].max(axis=0) - points[ring].min(axis=0)
    eps = 1e-12 * max(float(span.max()) ** 2, 1.0)

    tris: list[tuple[int, int, int]] = []
    guard = 0
    while len(ring) > 3:
        guard += 1
        n = len(ring)
        clipped = False
        best_fallback = None
        best_cross = -np.inf
        for k in range(n):
            ia, ib, ic = ring[k - 1], ring[k], ring[(k + 1) % n]
            a, b, c = points[ia], points[ib], points[ic]
            cr = _cross2(a, b, c)
            if cr <= eps:
                continue
            others = [j for j in ring if j not in (ia, ib, ic)]
            if _any_point_strictly_inside(a, b, c, points[others], eps):
                continue
            tris.append((ia, ib, ic))
            del ring[k]
            clipped = True
            break
        if not clipped:
            # numeric corner: clip the most convex remaining vertex anyway
            for k in range(n):
                ia, ib, ic = ring[k - 1], ring[k], ring[(k + 1) % n]
                cr = _cross2(points[ia], points[ib], points[ic])
                if cr > best_cross:
                    best_cross = cr
                    best_fallback = k
            k = best_fallback
            ia, ib, ic = ring[k - 1], ring[k], ring[(k + 1) % n]
            if best_cross > 0:
                tris.append((ia, ib, ic))
            del ring[k]
        if guard > 10 * len(indices) + 100:
            break
    if len(ring) == 3 and _cross2(points[ring[0]], points[ring[1]], points[ring[2]]) > eps:
        tris.append(tuple(ring))
    else:
        _absorb_collinear_ring(points, ring, tris, eps)
    return tris


def _absorb_collinear_ring(points, ring, tris, eps) -> None:
    """
    Incorporate a degenerate (zero-area) leftover ring into the emitted
    triangles.  Cut lines crossing the interior diagonals of planar faces
    leave collinear vertices on the loop; each such vertex q between
    neighbours p and r is absorbed by splitting the emitted triangle that
    already spans the directed edge (p, r), preserving a watertight cap.
    """
    while len(ring) >= 3:
        progressed = False
        for k in range(len(ring)):
            p, q, r = ring[k - 1], ring[k], ring[(k + 1) % len(ring)]
            if p == r:
                continue
            seg = points[r] - points[p]
            mid = points[q] - points[p]
            t = float(seg @ mid) / max(float(seg @ seg), 1e-30)
            off_line = abs(_cross2(points[p], points[r], points[q]))
            if not (1e-9 < t < 1 - 1e-9) or off_line > max(eps, 1e-9):
                continue
            host = None
            for ti, (a, b, c) in enumerate(tris):
                if (a, b) == (p, r) or (b, c) == (p, r) or (c, a) == (p, r):
                    host = ti
                    break
            if host is None:
                continue
            a, b, c = tris[host]
            # rotate so the split edge is (a, b)
            if (b, c) == (p, r):
                a, b, c = b, c, a
            elif (c, a) == (p, r):
                a, b, c = c, a, b
            tris[host] = (a, q, c)
            tris.append((q, b, c))
            del ring[k]
            progressed = True
            break
        if not progressed:
            break


def _bridge_hole(points: np.ndarray, outer: list[int], hole: list[int]) -> list[int]:
    """
    Splice a hole ring (CW) into the outer ring (CCW) with a bridge at the
    hole vertex of maximum x, using the visibility construction.
    """
    hx = points[hole][:, 0]
    m_pos = int(np.argmax(hx))
    m_idx = hole[m_pos]
    m = points[m_idx]

    # cast ray +x from m, find nearest intersected outer edge
    best_t = np.inf
    best_edge = None
    best_point = None
    n = len(outer)
    for k in range(n):
        i, j = outer[k], outer[(k + 1) % n]
        p, q = points[i], points[j]
        if (p[1] > m[1]) == (q[1] > m[1]):
            continue
        t = p[0] + (m[1] - p[1]) * (q[0] - p[0]) / (q[1] - p[1]) - m[0]
        if 0 <= t < best_t:
            best_t = t
            best_edge = k
            best_point = np.array([m[0] + t, m[1]])
    if best_edge is None:
        raise ValueError("hole is not inside the outer loop")

    i, j = outer[best_edge], outer[(best_edge + 1) % len(outer)]
    # visible candidate: endpoint of the hit edge with larger x
    cand = i if points[i][0] > points[j][0] else j

    # reflex outer vertices inside triangle (m, intersection, cand) can occlude
    occluders = []
    for k in range(len(outer)):
        ia, ib, ic = outer[k - 1], outer[k], outer[(k + 1) % len(outer)]
        if ib == cand:
            continue
        if _cross2(points[ia], points[ib], points[ic]) < 0:  # reflex
            p = points[ib]
            if _cross2(m, best_point, p) >= 0 and _cross2(best_point, points[cand], p) >= 0 and \
               _cross2(points[cand], m, p) >= 0:
                occluders.append(ib)
    if occluders:
        # take occluder minimising angle from +x axis, then distance
        def key(idx):
            d = points[idx] - m
            ang = abs(np.arctan2(d[1], d[0]))
            return (ang, d[0] ** 2 + d[1] ** 2, idx)
        cand = min(occluders, key=key)

    cand_pos = outer.index(cand)
    hole_rot = hole[m_pos:] + hole[:m_pos]
    return (
        outer[: cand_pos + 1]
        + [m_idx]
        + hole_rot[1:]
        + [m_idx, cand]
        + outer[cand_pos + 1:]
    )


def triangulate_with_holes(
    points: np.ndarray,
    outer: list[int],
    holes: list[list[int]],
) -> list[tuple[int, int, int]]:
    """
    Triangulate an outer CCW loop with CW holes, all indexing into `points`.

    Holes are merged into the outer ring by bridges (processed right to
    left), then the result is ear clipped.
    """
    ring = list(outer)
    ordered = sorted(holes, key=lambda h: -float(points[h][:, 0].max()))
    for hole in ordered:
        ring = _bridge_hole(points, ring, list(hole))
    return ear_clip(points, ring)
