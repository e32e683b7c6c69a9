"""
Projected tree supports for residual overhangs.

Overhang samples descend against the printing direction inside the convex
cell of their component, merging pairwise within a cone angle like classic
tree supports.  Tips that reach the cell's base plane are carried into the
next component's cell and projected again, until they land on the physical
platform or on safe model surface.  Strut radii grow with the gravitational
torque of the material they carry.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .mesh import HalfSpaceCell, Plane, TriMesh, plane_basis
from .risk import SelfSupportParams, risky_area, risky_flags

log = logging.getLogger(__name__)

GRAVITY_MM_S2 = 9810.0
_OCTAGON_AREA = 8.0 * math.tan(math.pi / 8.0)  # x radius^2, apothem = radius
_CELL_EPS = 1e-3
_RISK_EPS = 1e-9


class UnprojectableSupportError(RuntimeError):
    """A support tip left its sequence of cells without landing anywhere."""


@dataclass(frozen=True)
class SupportConfig:
    """
    Tree-support parameters.  sample_interval follows the nozzle: 2 mm for a
    0.4 mm nozzle, 3 mm for a 0.8 mm nozzle.
    """

    sample_interval: float = 2.0
    tree_angle_deg: float = 30.0
    max_merges_per_branch: int = 3
    torque_scale: float = 1e-6
    base_radius: Optional[float] = None  # defaults to sample_interval / 4

    def __post_init__(self):
        if self.sample_interval <= 0:
            raise ValueError("sample_interval must be positive")
        if not 0.0 < self.tree_angle_deg < 90.0:
            raise ValueError("tree_angle_deg must be in (0, 90)")
        if self.torque_scale < 0:
            raise ValueError("torque_scale must be >= 0")

    @property
    def radius(self) -> float:
        return self.base_radius if self.base_radius is not None else self.sample_interval / 4.0


@dataclass(frozen=True)
class OverhangSample:
    position: np.ndarray
    kind: str  # point_overhang | edge_overhang | face_overhang

    def __post_init__(self):
        p = np.asarray(self.position, dtype=np.float64).reshape(3).copy()
        p.setflags(write=False)
        object.__setattr__(self, "position", p)


@dataclass
class Strut:
    top: int
    bottom: int
    radius: float
    cell_index: int


@dataclass
class SupportTree:
    """Strut graph; tips record how each descending branch ended."""

    nodes: list = field(default_factory=list)       # 3D points
    struts: list = field(default_factory=list)      # Strut
    tips: list = field(default_factory=list)        # (node_index, kind)
    # tip kinds: surface | platform | boundary (open, awaiting next cell)
    open_merges: dict = field(default_factory=dict)  # boundary node -> merge count

    def add_node(self, position) -> int:
        self.nodes.append(np.asarray(position, dtype=np.float64))
        return len(self.nodes) - 1

    @property
    def node_array(self) -> np.ndarray:
        return np.asarray(self.nodes) if self.nodes else np.zeros((0, 3))

    def strut_points(self, strut: Strut, count: int = 11) -> np.ndarray:
        a = self.nodes[strut.top]
        b = self.nodes[strut.bottom]
        t = np.linspace(0.0, 1.0, count)
        return a[None, :] + t[:, None] * (b - a)[None, :]


def _ray_hits(mesh: TriMesh, origins: np.ndarray, direction: np.ndarray):
    """
    First intersection of rays (shared direction) with a mesh, batched
    Moller-Trumbore.  Returns (t, face) with t = inf where nothing is hit.
    """
    v0 = mesh.corners[:, 0]
    e1 = mesh.corners[:, 1] - v0
    e2 = mesh.corners[:, 2] - v0
    h = np.cross(direction, e2)
    det = np.einsum("ij,ij->i", e1, h)
    ok = np.abs(det) > 1e-12
    inv = np.where(ok, 1.0, 0.0) / np.where(ok, det, 1.0)

    best_t = np.full(len(origins), np.inf)
    best_f = np.full(len(origins), -1, dtype=np.int64)
    for i, origin in enumerate(origins):
        s = origin - v0
        u = np.einsum("ij,ij->i", s, h) * inv
        q = np.cross(s, e1)
        v = (q @ direction) * inv
        t = np.einsum("ij,ij->i", e2, q) * inv
        hit = ok & (u >= -1e-9) & (v >= -1e-9) & (u + v <= 1 + 1e-9) & (t > 1e-6)
        if hit.any():
            j = np.flatnonzero(hit)
            k = j[np.argmin(t[j])]
            best_t[i] = t[k]
            best_f[i] = k
    return best_t, best_f


def detect_overhangs(
    component: TriMesh,
    base: Plane,
    params: SelfSupportParams,
    config: SupportConfig,
) -> list[OverhangSample]:
    """
    Sample the overhanging features of one component printed on `base`:
    a surface grid at the sample interval (face overhangs), vertices that are
    local minima along the printing direction (point overhangs), and locally
    lowest edges between two risky faces (edge overhangs).
    """
    report = risky_area(component, base, params)
    if report.total_risky_area <= _RISK_EPS:
        return []
    flags = report.per_face_flags
    d = base.normal
    spacing = config.sample_interval
    samples: list[OverhangSample] = []

    # face overhangs: rays cast up from under the part, first hit wins
    u, v = plane_basis(d)
    pu = component.vertices @ u
    pv = component.vertices @ v
    ph = component.vertices @ d
    h0 = float(ph.min()) - 1.0
    us = np.arange(float(pu.min()) + spacing / 2.0, float(pu.max()), spacing)
    vs = np.arange(float(pv.min()) + spacing / 2.0, float(pv.max()), spacing)
    if len(us) and len(vs):
        gu, gv = np.meshgrid(us, vs, indexing="ij")
        origins = (
            gu.ravel()[:, None] * u[None, :]
            + gv.ravel()[:, None] * v[None, :]
            + h0 * d[None, :]
        )
        t_hit, f_hit = _ray_hits(component, origins, d)
        for oi in range(len(origins)):
            if f_hit[oi] >= 0 and flags[f_hit[oi]]:
                samples.append(
                    OverhangSample(origins[oi] + t_hit[oi] * d, "face_overhang")
                )

    # point overhangs: vertices whose incident edges all rise along d
    edges = component.edges_sorted
    heights = ph
    base_dist = np.abs(base.signed_distance(component.vertices))
    neighbour_min = np.full(len(component.vertices), np.inf)
    np.minimum.at(neighbour_min, edges[:, 0], heights[edges[:, 1]])
    np.minimum.at(neighbour_min, edges[:, 1], heights[edges[:, 0]])
    local_min = (neighbour_min > heights + 1e-9) & (base_dist > params.base_contact_eps)
    for vi in np.flatnonzero(local_min):
        samples.append(OverhangSample(component.vertices[vi], "point_overhang"))

    # edge overhangs: shared edge of two risky faces, lower than both
    # opposite vertices
    tris = component.triangles
    edge_faces: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for fi in range(len(tris)):
        for k in range(3):
            a, b = int(tris[fi, k]), int(tris[fi, (k + 1) % 3])
            opp = int(tris[fi, (k + 2) % 3])
            key = (a, b) if a < b else (b, a)
            edge_faces.setdefault(key, []).append((fi, opp))
    for (a, b), hits in sorted(edge_faces.items()):
        if len(hits) != 2:
            continue
        (f1, o1), (f2, o2) = hits
        if not (flags[f1] and flags[f2]):
            continue
        edge_top = max(heights[a], heights[b])
        if heights[o1] <= edge_top + 1e-9 or heights[o2] <= edge_top + 1e-9:
            continue
        pa, pb = component.vertices[a], component.vertices[b]
        length = float(np.linalg.norm(pb - pa))
        n = max(1, int(length / spacing))
        for k in range(n):
            samples.append(
                OverhangSample(pa + ((k + 0.5) / n) * (pb - pa), "edge_overhang")
            )
    return samples


def _cell_exit(cell: HalfSpaceCell, point: np.ndarray, direction: np.ndarray):
    """
    March from `point` along `direction` to the cell boundary.  Returns
    (distance, plane, side) of the first boundary crossed; distance is inf
    when the cell is unbounded that way.
    """
    best = (np.inf, None, None)
    for plane, side in cell.halves:
        inward = plane.normal if side == "above" else -plane.normal
        speed = float(direction @ inward)
        if speed >= -1e-12:
            continue  # parallel to or deeper into this half-space
        slack = float(plane.signed_distance(point))
        slack = slack if side == "above" else -slack
        dist = max(slack, 0.0) / -speed
        if dist < best[0]:
            best = (dist, plane, side)
    return best


def _first_safe_hit(
    component: TriMesh,
    start: np.ndarray,
    end: np.ndarray,
    safe_faces: np.ndarray,
):
    """First intersection of segment start->end that lands on a safe face;
    hits on risky faces are passed through."""
    seg = end - start
    length = float(np.linalg.norm(seg))
    if length <= 1e-12:
        return None
    direction = seg / length
    travelled = 0.0
    origin = start
    for _ in range(64):
        t, f = _ray_hits(component, origin[None, :], direction)
        if f[0] < 0 or travelled + t[0] > length - 1e-9:
            return None
        travelled += t[0]
        if safe_faces[f[0]]:
            return start + travelled * direction
        travelled += 1e-6
        origin = start + travelled * direction
    return None


def _best_merge_pair(
    positions: np.ndarray,
    merges: np.ndarray,
    seqs: np.ndarray,
    d: np.ndarray,
    tan_theta: float,
    cell: HalfSpaceCell,
    max_merges: int,
):
    """
    Vectorised search for the closest mergeable pair of tips.

    The merge point of two descending cones lies below the higher tip at
    depth (s / tan(theta) + dh) / 2 where s is the lateral separation and dh
    the height difference; when one tip is already inside the other's cone
    the merge point is the lower tip itself.
    """
    n = len(positions)
    if n < 2:
        return None
    h = positions @ d
    iu, ju = np.triu_indices(n, k=1)
    budget_ok = np.maximum(merges[iu], merges[ju]) + 1 <= max_merges
    if not budget_ok.any():
        return None
    iu, ju = iu[budget_ok], ju[budget_ok]

    hi = h[iu]
    hj = h[ju]
    swap = hi < hj
    top = np.where(swap, ju, iu)
    low = np.where(swap, iu, ju)
    delta = h[top] - h[low]
    lateral = (positions[low] - positions[top]) + delta[:, None] * d[None, :]
    s = np.linalg.norm(lateral, axis=1)
    depth = (s / tan_theta + delta) / 2.0

    inside = (s <= 1e-12) | (depth <= delta + 1e-12)
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(s > 1e-12, depth * tan_theta / np.where(s > 1e-12, s, 1.0), 0.0)
    meets = positions[top] + frac[:, None] * lateral - depth[:, None] * d[None, :]
    meets[inside] = positions[low][inside]

    ok = np.ones(len(iu), dtype=bool)
    for plane, side in cell.halves:
        sd = plane.signed_distance(meets)
        ok &= (sd >= -_CELL_EPS) if side == "above" else (sd <= _CELL_EPS)
    if not ok.any():
        return None
    dist = np.linalg.norm(positions[iu] - positions[ju], axis=1)
    cand = np.flatnonzero(ok)
    keys = np.lexsort((seqs[ju[cand]], seqs[iu[cand]], dist[cand]))
    k = cand[keys[0]]
    return int(iu[k]), int(ju[k]), meets[k]


@dataclass
class _Tip:
    node: int
    position: np.ndarray
    merges: int
    seq: int


def grow_tree(
    samples: list[OverhangSample],
    component: TriMesh,
    cell: HalfSpaceCell,
    direction,
    config: SupportConfig,
    self_support: Optional[SelfSupportParams] = None,
    seeds: Optional[list[tuple[int, int]]] = None,
    tree: Optional[SupportTree] = None,
    cell_index: int = 0,
) -> SupportTree:
    """
    Grow tree supports for overhang samples inside one convex cell.

    Active tips descend against `direction`; the closest mergeable pair
    (cone intersection inside the cell, merge budget left) merges first.
    Descending tips that meet the component on a safe face terminate there;
    tips reaching the cell's bottom boundary (its base plane) stop at the
    boundary and are reported as open "boundary" tips for the next cell.

    `seeds` are (existing node index, merge count) pairs continuing struts
    from a previous cell.  Raises ValueError for samples outside the cell.
    """
    self_support = self_support or SelfSupportParams()
    d = np.asarray(direction, dtype=np.float64)
    d = d / np.linalg.norm(d)
    tan_theta = math.tan(math.radians(config.tree_angle_deg))
    out = tree if tree is not None else SupportTree()

    bottom = None
    for plane, side in cell.halves:
        if side == "above":
            bottom = plane
    if bottom is not None:
        safe = ~risky_flags(component, bottom, self_support)
    else:
        anchor = d * float((component.vertices @ d).min())
        safe = ~risky_flags(component, Plane(anchor, d), self_support)

    tips: list[_Tip] = []
    seq = 0
    for sample in samples:
        if not cell.contains(sample.position, eps=_CELL_EPS):
            raise ValueError("sample outside cell")
        node = out.add_node(sample.position)
        tips.append(_Tip(node, np.asarray(sample.position, float), 0, seq))
        seq += 1
    for node, merge_count in seeds or ():
        tips.append(_Tip(node, np.asarray(out.nodes[node], float), merge_count, seq))
        seq += 1

    while len(tips) > 1:
        pos = np.asarray([t.position for t in tips])
        found = _best_merge_pair(
            pos,
            np.asarray([t.merges for t in tips]),
            np.asarray([t.seq for t in tips]),
            d,
            tan_theta,
            cell,
            config.max_merges_per_branch,
        )
        if found is None:
            break
        i, j, meet = found
        a, b = tips[i], tips[j]
        blocked = None
        for tip in (a, b):
            hit = _first_safe_hit(component, tip.position, meet, safe)
            if hit is not None:
                node = out.add_node(hit)
                out.struts.append(Strut(tip.node, node, config.radius, cell_index))
                out.tips.append((node, "surface"))
                blocked = tip
                break
        if blocked is not None:
            tips = [t for t in tips if t is not blocked]
            continue
        node = out.add_node(meet)
        out.struts.append(Strut(a.node, node, config.radius, cell_index))
        out.struts.append(Strut(b.node, node, config.radius, cell_index))
        merged = _Tip(node, np.asarray(meet, float), max(a.merges, b.merges) + 1, seq)
        seq += 1
        tips = [t for k, t in enumerate(tips) if k not in (i, j)]
        tips.append(merged)

    for tip in sorted(tips, key=lambda t: t.seq):
        dist, plane, _side = _cell_exit(cell, tip.position, -d)
        if not np.isfinite(dist):
            raise UnprojectableSupportError("support tip never reaches a boundary")
        target = tip.position - dist * d
        hit = _first_safe_hit(component, tip.position, target, safe)
        if hit is not None:
            node = out.add_node(hit)
            out.struts.append(Strut(tip.node, node, config.radius, cell_index))
            out.tips.append((node, "surface"))
            continue
        if bottom is None or plane is not bottom:
            raise UnprojectableSupportError("support tip exits its cell sideways")
        if dist > 1e-9:
            node = out.add_node(target)
            out.struts.append(Strut(tip.node, node, config.radius, cell_index))
        else:
            node = tip.node
        out.tips.append((node, "boundary"))
        out.open_merges[node] = tip.merges
    return out


def progressive_projection(
    plan,
    params: SelfSupportParams,
    config: SupportConfig,
) -> SupportTree:
    """
    Generate supports for a whole plan: walk components in reverse
    fabrication order, grow trees where residual risk exists, extend open
    tips through each cell in turn, and finally assign torque-scaled radii.
    Every branch must end on the platform or on safe model surface.
    """
    tree = SupportTree()
    n = len(plan.components)
    for i in range(n, 0, -1):
        comp = plan.components[i - 1]
        cell = comp.cell
        if i == 1:
            cell = cell.appended(comp.base, "above")

        samples: list[OverhangSample] = []
        if risky_area(comp.mesh, comp.base, params).total_risky_area > _RISK_EPS:
            samples = detect_overhangs(comp.mesh, comp.base, params, config)

        seeds_now = sorted(
            (node, m)
            for node, m in tree.open_merges.items()
            if cell.contains(tree.nodes[node], eps=_CELL_EPS)
        )
        if not samples and not seeds_now:
            continue
        consumed = {node for node, _ in seeds_now}
        for node in consumed:
            del tree.open_merges[node]
        tree.tips = [
            (node, kind)
            for node, kind in tree.tips
            if not (kind == "boundary" and node in consumed)
        ]
        pre_pass = set(tree.open_merges)
        grow_tree(
            samples,
            comp.mesh,
            cell,
            comp.direction,
            config,
            self_support=params,
            seeds=seeds_now,
            tree=tree,
            cell_index=i - 1,
        )
        if i == 1:
            # this cell's base plane is the physical platform
            landed = set(tree.open_merges) - pre_pass
            tree.tips = [
                (node, "platform") if kind == "boundary" and node in landed else (node, kind)
                for node, kind in tree.tips
            ]
            for node in landed:
                del tree.open_merges[node]
        log.info(
            "component %d: %d overhang samples, %d seeds, %d open tips",
            i, len(samples), len(seeds_now), len(tree.open_merges),
        )

    if tree.open_merges:
        raise UnprojectableSupportError(
            f"{len(tree.open_merges)} support tips left unprojected"
        )
    _assign_radii(tree, config)
    return tree


def _assign_radii(tree: SupportTree, config: SupportConfig) -> None:
    """Thicken struts by the gravity torque of everything they carry."""
    r0 = config.radius
    by_bottom: dict[int, list[int]] = {}
    for si, strut in enumerate(tree.struts):
        by_bottom.setdefault(strut.bottom, []).append(si)

    volumes = []
    centroids = []
    for strut in tree.struts:
        a = tree.nodes[strut.top]
        b = tree.nodes[strut.bottom]
        volumes.append(_OCTAGON_AREA * r0 * r0 * float(np.linalg.norm(b - a)))
        centroids.append(0.5 * (a + b))

    g = np.array([0.0, 0.0, -GRAVITY_MM_S2])
    for strut in tree.struts:
        top = tree.nodes[strut.top]
        carried: list[int] = []
        stack = [strut.top]
        seen = set()
        while stack:
            node = stack.pop()
            if node in seen:
                continue
            seen.add(node)
            for sj in by_bottom.get(node, ()):
                carried.append(sj)
                stack.append(tree.struts[sj].top)
        torque = np.zeros(3)
        for sj in carried:
            torque += volumes[sj] * np.cross(centroids[sj] - top, g)
        strut.radius = (1.0 + config.torque_scale * float(np.linalg.norm(torque))) * r0


def emit_support_mesh(tree: SupportTree) -> Optional[TriMesh]:
    """
    Tessellate every strut as an eight-sided prism whose inscribed circle
    has the strut radius.  Struts may interpenetrate; no boolean union is
    attempted.  Returns None for an empty tree.
    """
    if not tree.struts:
        return None
    verts: list[np.ndarray] = []
    faces: list[tuple[int, int, int]] = []
    circum = 1.0 / math.cos(math.pi / 8.0)
    angles = (np.arange(8) + 0.5) * (math.pi / 4.0)
    for strut in tree.struts:
        a = tree.nodes[strut.top]
        b = tree.nodes[strut.bottom]
        axis = b - a
        length = float(np.linalg.norm(axis))
        if length <= 1e-9:
            continue
        axis = axis / length
        u, v = plane_basis(axis)
        ring = (
            np.cos(angles)[:, None] * u[None, :] + np.sin(angles)[:, None] * v[None, :]
        ) * (strut.radius * circum)
        base = len(verts)
        verts.extend(a + ring)       # 0..7  ring at a
        verts.extend(b + ring)       # 8..15 ring at b
        verts.append(a.copy())       # 16 centre at a
        verts.append(b.copy())       # 17 centre at b
        for k in range(8):
            k2 = (k + 1) % 8
            t0, t1 = base + k, base + k2
            b0, b1 = base + 8 + k, base + 8 + k2
            faces.append((t0, b1, b0))
            faces.append((t0, t1, b1))
            faces.append((base + 16, t1, t0))   # cap at a, outward -axis
            faces.append((base + 17, b0, b1))   # cap at b, outward +axis
    if not faces:
        return None
    return TriMesh(np.asarray(verts), np.asarray(faces, dtype=np.int64), validate=False)


def support_volume(tree: SupportTree) -> float:
    """Analytic total strut volume (octagonal prisms), mm^3."""
    total = 0.0
    for strut in tree.struts:
        length = float(np.linalg.norm(tree.nodes[strut.top] - tree.nodes[strut.bottom]))
        total += _OCTAGON_AREA * strut.radius * strut.radius * length
    return total
