"""
Batch evaluation of candidate clipping planes against a mesh.

For every candidate plane this computes, exactly and without constructing
the clipped meshes: whether the plane strictly crosses the mesh, whether it
coincides with a face (degenerate), the volume of the upper part, the risky
area of the upper part against the plane, and optionally the one-step
risky-area descent.  Per-triangle clipped areas and volumes follow from
similar-triangle fractions; volumes are taken about an origin on the plane
so cap faces contribute nothing.

Work is grouped per sampling direction; groups are independent, so they can
be dispatched to a thread pool and merged by index without changing any
result.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .candidates import CandidateSet
from .mesh import DEGENERATE_AREA, PLANE_COINCIDENCE_EPS, Plane, TriMesh
from .risk import SelfSupportParams, risky_flags

_CROSS_EPS = 1e-9


@dataclass
class CandidateScores:
    crossing: np.ndarray
    degenerate: np.ndarray
    upper_volume: np.ndarray
    upper_risky: np.ndarray
    local_descent: np.ndarray | None = None


def _score_direction(
    normal: np.ndarray,
    ts: np.ndarray,
    proj: np.ndarray,
    mesh: TriMesh,
    s_dot: np.ndarray,
    e_gamma: np.ndarray,
    e_platform: np.ndarray | None,
    cap_risky_vs_platform: bool,
    params: SelfSupportParams,
):
    """Score all offsets ts along one direction.  Returns per-offset arrays."""
    m = len(ts)
    tris = mesh.triangles
    corners = mesh.corners
    areas = mesh.face_areas

    tri_p = proj[tris]
    tmin = tri_p.min(axis=1)
    tmax = tri_p.max(axis=1)

    vol0 = np.einsum("ij,ij->i", corners[:, 0], np.cross(corners[:, 1], corners[:, 2])) / 6.0
    wcoef = s_dot * areas / 3.0

    order = np.argsort(tmin, kind="stable")
    tmin_s = tmin[order]

    def suffix(weights: np.ndarray) -> np.ndarray:
        acc = np.concatenate([np.cumsum(weights[order][::-1])[::-1], [0.0]])
        pos = np.searchsorted(tmin_s, ts, side="right")
        return acc[pos]

    e_area = np.where(e_gamma, areas, 0.0)
    vol_up = suffix(vol0) - ts * suffix(wcoef)
    risky_up = suffix(e_area)
    if e_platform is not None:
        ep_area = np.where(e_platform, areas, 0.0)
        ep_up = suffix(ep_area)
        cap_area = suffix(s_dot * areas)
    else:
        ep_up = None
        cap_area = None

    # crossing triangle/offset incidences
    lo = np.searchsorted(ts, tmin, side="left")
    hi = np.searchsorted(ts, tmax, side="right")
    cnt = np.maximum(hi - lo, 0)
    total = int(cnt.sum())
    crossing = np.zeros(m, dtype=bool)
    degenerate = np.zeros(m, dtype=bool)

    if total:
        tri_rep = np.repeat(np.arange(len(tris)), cnt)
        starts = np.concatenate([[0], np.cumsum(cnt)[:-1]])
        off_rep = np.arange(total) - np.repeat(starts, cnt) + np.repeat(lo, cnt)
        t_rep = ts[off_rep]

        d = tri_p[tri_rep] - t_rep[:, None]
        npos = (d > 0).sum(axis=1)
        nneg = (d < 0).sum(axis=1)

        strict = (d.max(axis=1) > _CROSS_EPS) & (d.min(axis=1) < -_CROSS_EPS)
        if strict.any():
            crossing[np.unique(off_rep[strict])] = True

        a_up = np.zeros(total)
        v_up = np.zeros(total)

        full = nneg == 0
        a_up[full] = areas[tri_rep[full]]
        v_up[full] = vol0[tri_rep[full]] - t_rep[full] * wcoef[tri_rep[full]]

        split = (npos >= 1) & (nneg >= 1)
        if split.any():
            si = np.flatnonzero(split)
            d_s = d[si]
            above_lone = npos[si] == 1
            lone = np.where(above_lone, np.argmax(d_s, axis=1), np.argmin(d_s, axis=1))
            roll = (lone[:, None] + np.arange(3)[None, :]) % 3
            d_ord = np.take_along_axis(d_s, roll, axis=1)
            p_ord = np.take_along_axis(corners[tri_rep[si]], roll[:, :, None], axis=1)

            da, db, dc = d_ord[:, 0], d_ord[:, 1], d_ord[:, 2]
            t1 = da / (da - db)
            t2 = da / (da - dc)
            frac = t1 * t2

            x = p_ord[:, 0] + t1[:, None] * (p_ord[:, 1] - p_ord[:, 0])
            y = p_ord[:, 0] + t2[:, None] * (p_ord[:, 2] - p_ord[:, 0])
            # origin on the plane so the cap contributes no volume
            origin = t_rep[si][:, None] * normal[None, :]
            tet = (
                np.einsum(
                    "ij,ij->i",
                    p_ord[:, 0] - origin,
                    np.cross(x - origin, y - origin),
                )
                / 6.0
            )
            area_piece = areas[tri_rep[si]] * frac

            a_up[si] = np.where(above_lone, area_piece, areas[tri_rep[si]] - area_piece)
            full_vol = vol0[tri_rep[si]] - t_rep[si] * wcoef[tri_rep[si]]
            v_up[si] = np.where(above_lone, tet, full_vol - tet)

        w_e = np.where(e_gamma[tri_rep], a_up, 0.0)
        vol_up = vol_up + np.bincount(off_rep, weights=v_up, minlength=m)
        risky_up = risky_up + np.bincount(off_rep, weights=w_e, minlength=m)
        if e_platform is not None:
            w_ep = np.where(e_platform[tri_rep], a_up, 0.0)
            ep_up = ep_up + np.bincount(off_rep, weights=w_ep, minlength=m)
            cap_area = cap_area + np.bincount(
                off_rep, weights=a_up * s_dot[tri_rep], minlength=m
            )

    # base-contact exemption for faces antiparallel to the plane and close
    # above it: they rest on the cut and are not risky
    anti = s_dot <= -1.0 + 1e-6
    if anti.any():
        levels = 0.5 * (tmin[anti] + tmax[anti])
        for level, area in zip(levels, areas[anti]):
            j0 = int(np.searchsorted(ts, level - params.base_contact_eps, side="left"))
            j1 = int(np.searchsorted(ts, level, side="left"))
            if j1 > j0:
                risky_up[j0:j1] -= area

    # coincident faces make the clip degenerate
    parallel = (np.abs(s_dot) >= 1.0 - 1e-6) & (areas > DEGENERATE_AREA)
    if parallel.any():
        levels = 0.5 * (tmin[parallel] + tmax[parallel])
        for level in levels:
            j0 = int(np.searchsorted(ts, level - PLANE_COINCIDENCE_EPS, side="left"))
            j1 = int(np.searchsorted(ts, level + PLANE_COINCIDENCE_EPS, side="right"))
            if j1 > j0:
                degenerate[j0:j1] = True

    if e_platform is not None:
        cap_term = cap_area if cap_risky_vs_platform else np.zeros(m)
        local = ep_up - cap_term - risky_up
    else:
        local = None
    return crossing, degenerate, vol_up, risky_up, local


def score_candidates(
    mesh: TriMesh,
    cands: CandidateSet,
    platform: Plane,
    params: SelfSupportParams,
    need_local: bool = False,
    max_workers: int = 1,
) -> CandidateScores:
    """Evaluate every candidate plane against `mesh`."""
    n_cands = len(cands)
    out = CandidateScores(
        crossing=np.zeros(n_cands, dtype=bool),
        degenerate=np.zeros(n_cands, dtype=bool),
        upper_volume=np.zeros(n_cands),
        upper_risky=np.zeros(n_cands),
        local_descent=np.zeros(n_cands) if need_local else None,
    )
    if need_local:
        e_platform_flags = risky_flags(mesh, platform, params)
    sin_alpha = params.sin_alpha

    # group candidate indices per sampling direction
    groups: list[tuple[int, np.ndarray]] = []
    boundaries = np.flatnonzero(np.diff(cands.normal_index)) + 1
    for chunk in np.split(np.arange(n_cands), boundaries):
        if len(chunk):
            groups.append((int(cands.normal_index[chunk[0]]), chunk))

    def run(group) -> None:
        ni, idx = group
        normal = cands.normals[ni]
        proj = mesh.vertices @ normal
        s_dot = mesh.face_normals @ normal
        e_gamma = (s_dot + sin_alpha) < 0.0
        cap_risky = (float(normal @ platform.normal) + sin_alpha) < 0.0
        res = _score_direction(
            normal,
            cands.offsets[idx],
            proj,
            mesh,
            s_dot,
            e_gamma,
            e_platform_flags if need_local else None,
            cap_risky,
            params,
        )
        out.crossing[idx], out.degenerate[idx], out.upper_volume[idx], out.upper_risky[idx] = res[:4]
        if need_local:
            out.local_descent[idx] = res[4]

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            list(pool.map(run, groups))
    else:
        for group in groups:
            run(group)
    return out
