"""
Decomposition planners: manufacturability criteria, unconstrained and
constrained greedy peeling, and the relaxation-driven beam search.

All three planners share the same pipeline: generate candidate planes once
for the input, score them in batch against the current remaining model, and
clip only the few candidates that are actually admitted.  Plans list
components in fabrication order, which is the reverse of clipping order; the
first component always rests on the platform.
"""
from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ._scoring import score_candidates
from .candidates import CandidateSet, SamplerConfig, generate_candidates
from .clipping import cap_face_mask, clip, plane_crosses
from .mesh import (
    DegenerateClipError,
    HalfSpaceCell,
    Plane,
    TriMesh,
    connected_components,
)
from .risk import SelfSupportParams, risky_area

log = logging.getLogger(__name__)

RISK_FREE_EPS = 1e-9        # mm^2; "no risky area" threshold
PLATFORM_CONTACT_EPS = 1e-3  # mm; component-to-platform contact tolerance


@dataclass(frozen=True)
class ThinPartFilter:
    """Optional rejection of slivers parallel to the cut."""

    nozzle_resolution: float = 0.4
    parallel_dot: float = 0.9


@dataclass(frozen=True)
class SearchConfig:
    mode: str = "beam"                      # beam | greedy_unconstrained | greedy_constrained
    beam_width: int = 10
    volume_divisor: int = 10
    delta0: float = 0.1
    delta_mult: float = 5.0
    self_support: SelfSupportParams = field(default_factory=SelfSupportParams)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    platform: Plane = field(
        default_factory=lambda: Plane((0.0, 0.0, 0.0), (0.0, 0.0, 1.0))
    )
    thin_part_filter: Optional[ThinPartFilter] = None
    dedup_angle_deg: float = 10.0
    dedup_offset_mm: Optional[float] = None  # defaults to 2 * sampler.offset_step
    max_workers: int = 1

    def __post_init__(self):
        if self.beam_width < 1:
            raise ValueError("beam_width must be >= 1")
        if self.volume_divisor < 2:
            raise ValueError("volume_divisor must be >= 2")
        if self.delta0 <= 0:
            raise ValueError("delta0 must be positive")
        if self.delta_mult <= 1:
            raise ValueError("delta_mult must be > 1")

    @property
    def dedup_offset(self) -> float:
        if self.dedup_offset_mm is not None:
            return self.dedup_offset_mm
        return 2.0 * self.sampler.offset_step


@dataclass(frozen=True)
class ClipRecord:
    """One forward clipping step: the plane and the part it removed."""

    plane: Plane
    component: TriMesh
    risky_area_at_clip: float


@dataclass(frozen=True)
class Beam:
    """Search state: remaining model plus the clip history that produced it."""

    remaining: Optional[TriMesh]
    history: tuple = ()


@dataclass(frozen=True)
class PlanComponent:
    mesh: TriMesh
    base: Plane
    direction: np.ndarray
    risky_area: float
    cell: HalfSpaceCell


@dataclass(frozen=True)
class DecompositionPlan:
    components: tuple
    j_global: float

    def __len__(self) -> int:
        return len(self.components)


@dataclass(frozen=True)
class CriteriaReport:
    feasible: bool
    reason: Optional[str] = None
    upper: Optional[TriMesh] = None
    lower: Optional[TriMesh] = None


def platform_footprint(mesh: TriMesh, platform: Plane) -> np.ndarray:
    """Bounding-box corners of the mesh projected onto the platform plane."""
    corners = mesh.aabb.corners
    sd = platform.signed_distance(corners)
    return corners - sd[:, None] * platform.normal[None, :]


def platform_strictly_below(gamma: Plane, footprint: np.ndarray) -> bool:
    """Criterion: the working platform must lie in the lower half-space."""
    return bool((gamma.signed_distance(footprint) < -1e-9).all())


def _components_touch_platform(parts, platform: Plane) -> bool:
    for part in parts:
        if float(platform.signed_distance(part.vertices).min()) > PLATFORM_CONTACT_EPS:
            return False
    return True


def _thin_part_violation(
    part: TriMesh, gamma: Plane, filt: ThinPartFilter, side: str
) -> bool:
    dots = part.face_normals @ gamma.normal
    near_parallel = np.abs(dots) >= filt.parallel_dot
    if not near_parallel.any():
        return False
    caps = cap_face_mask(part, gamma, side)
    sd = np.abs(gamma.signed_distance(part.vertices))
    within = sd[part.triangles].max(axis=1) < filt.nozzle_resolution
    return bool((near_parallel & within & ~caps).any())


def check_criteria(
    remaining: TriMesh,
    gamma: Plane,
    config: SearchConfig,
    input_volume: float,
    footprint: Optional[np.ndarray] = None,
) -> CriteriaReport:
    """
    Full manufacturability test of one candidate clip against the current
    remaining model.  Performs the clip; on success the report carries both
    parts so callers do not clip twice.
    """
    if footprint is None:
        footprint = platform_footprint(remaining, config.platform)
    if not platform_strictly_below(gamma, footprint):
        return CriteriaReport(False, "criterion III")
    try:
        upper, lower = clip(remaining, gamma)
    except DegenerateClipError:
        return CriteriaReport(False, "degenerate clip")
    if upper is None:
        return CriteriaReport(False, "no intersection")
    if lower is None:
        return CriteriaReport(False, "criterion II", upper=upper)
    if upper.volume < input_volume / config.volume_divisor:
        return CriteriaReport(False, "volume bound", upper=upper, lower=lower)
    if not _components_touch_platform(connected_components(lower), config.platform):
        return CriteriaReport(False, "criterion II", upper=upper, lower=lower)
    caps = cap_face_mask(upper, gamma, "upper")
    if not caps.any():
        return CriteriaReport(False, "attachment", upper=upper, lower=lower)
    if len(parts := connected_components(upper)) > 1:
        for part in parts:
            if not cap_face_mask(part, gamma, "upper").any():
                return CriteriaReport(False, "attachment", upper=upper, lower=lower)
    if config.thin_part_filter is not None:
        filt = config.thin_part_filter
        if _thin_part_violation(upper, gamma, filt, "upper") or _thin_part_violation(
            lower, gamma, filt, "lower"
        ):
            return CriteriaReport(False, "thin part", upper=upper, lower=lower)
    return CriteriaReport(True, None, upper=upper, lower=lower)


def invert_to_sequence(
    input_mesh: TriMesh,
    history,
    platform: Plane,
    params: Optional[SelfSupportParams] = None,
) -> DecompositionPlan:
    """
    Turn a forward clip history into a fabrication plan.

    Component i is the part removed by clip N-i+1; the final remaining model
    becomes component 1 on the platform.  Each component carries the convex
    cell formed by its clip plane's upper side and all earlier planes' lower
    sides.
    """
    params = params or SelfSupportParams()
    history = tuple(history)
    remaining = input_mesh
    reconstructed = []
    for rec in history:
        upper, lower = clip(remaining, rec.plane)
        if upper is None or lower is None:
            raise ValueError("inconsistent history: clip produced an empty side")
        if not math.isclose(
            upper.volume, rec.component.volume, rel_tol=1e-6, abs_tol=1e-9
        ):
            raise ValueError("inconsistent history: component volume mismatch")
        reconstructed.append((rec, upper))
        remaining = lower

    clip_planes = [rec.plane for rec in history]
    components = []
    # first fabricated component: the final remaining model on the platform
    first_cell = HalfSpaceCell(tuple((p, "below") for p in clip_planes))
    components.append(
        PlanComponent(
            mesh=remaining,
            base=platform,
            direction=platform.normal,
            risky_area=risky_area(remaining, platform, params).total_risky_area,
            cell=first_cell,
        )
    )
    for k in range(len(history) - 1, -1, -1):
        rec, upper = reconstructed[k]
        cell = HalfSpaceCell(
            tuple((clip_planes[j], "below") for j in range(k)) + ((rec.plane, "above"),)
        )
        components.append(
            PlanComponent(
                mesh=rec.component,
                base=rec.plane,
                direction=rec.plane.normal,
                risky_area=risky_area(rec.component, rec.plane, params).total_risky_area,
                cell=cell,
            )
        )
    j_global = float(sum(c.risky_area for c in components))
    return DecompositionPlan(components=tuple(components), j_global=j_global)


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_plan(
    plan: DecompositionPlan,
    input_mesh: TriMesh,
    params: Optional[SelfSupportParams] = None,
    platform: Optional[Plane] = None,
) -> ValidationReport:
    """Check volume closure, print ordering, cell membership and the recorded
    objective of a plan; returns all violations found."""
    params = params or SelfSupportParams()
    violations: list[str] = []

    total = sum(c.mesh.volume for c in plan.components)
    if not math.isclose(total, input_mesh.volume, rel_tol=1e-6):
        violations.append(
            f"volume closure: components sum to {total:.6g}, input is {input_mesh.volume:.6g}"
        )

    tol = 1e-6 * input_mesh.aabb.diagonal
    for i, comp in enumerate(plan.components):
        if not np.allclose(comp.direction, comp.base.normal, atol=1e-9):
            violations.append(f"component {i + 1}: direction differs from base normal")
        for j in range(i):
            prev = plan.components[j]
            worst = float(comp.base.signed_distance(prev.vertices if hasattr(prev, "vertices") else prev.mesh.vertices).max())
            if worst > tol:
                violations.append(
                    f"ordering: component {j + 1} rises {worst:.3g} mm above base {i + 1}"
                )
        slack = comp.cell.slack(comp.mesh.vertices)
        if slack.size and float(slack.min()) < -PLATFORM_CONTACT_EPS:
            violations.append(
                f"component {i + 1}: vertices leave cell by {-float(slack.min()):.3g} mm"
            )

    if platform is not None:
        footprint = platform_footprint(input_mesh, platform)
        base0 = plan.components[0].base
        if abs(platform.signed_distance(base0.anchor)) > PLATFORM_CONTACT_EPS or not np.allclose(
            base0.normal, platform.normal, atol=1e-9
        ):
            violations.append("component 1 base is not the platform plane")
        for i, comp in enumerate(plan.components[1:], start=2):
            if not platform_strictly_below(comp.base, footprint):
                violations.append(f"component {i}: platform not below base plane")

    recomputed = float(
        sum(
            risky_area(c.mesh, c.base, params).total_risky_area
            for c in plan.components
        )
    )
    if abs(recomputed - plan.j_global) > 1e-9 * max(1.0, abs(recomputed)):
        violations.append(
            f"objective mismatch: recorded {plan.j_global:.9g}, recomputed {recomputed:.9g}"
        )
    return ValidationReport(tuple(violations))


# ---------------------------------------------------------------------------
# planners
# ---------------------------------------------------------------------------


def _terminal(remaining: TriMesh, config: SearchConfig, input_volume: float, risky: float) -> bool:
    return remaining.volume < input_volume / config.volume_divisor or risky <= RISK_FREE_EPS


def _candidate_order_mask(scores, plat_ok: np.ndarray, min_volume: float) -> np.ndarray:
    return (
        scores.crossing
        & ~scores.degenerate
        & plat_ok
        & (scores.upper_volume >= min_volume)
    )


def _single_component_plan(mesh: TriMesh, config: SearchConfig) -> DecompositionPlan:
    return invert_to_sequence(mesh, (), config.platform, config.self_support)


def _prepare(mesh: TriMesh, config: SearchConfig):
    cands = generate_candidates(mesh, config.sampler)
    footprint = platform_footprint(mesh, config.platform)
    plat_ok = np.fromiter(
        (platform_strictly_below(p, footprint) for p in cands.planes),
        dtype=bool,
        count=len(cands),
    )
    log.info(
        "search space: %d candidate planes (%d clear the platform)",
        len(cands),
        int(plat_ok.sum()),
    )
    return cands, footprint, plat_ok


def _greedy(mesh: TriMesh, config: SearchConfig, constrained: bool) -> DecompositionPlan:
    params = config.self_support
    platform = config.platform
    input_volume = mesh.volume
    if risky_area(mesh, platform, params).total_risky_area <= RISK_FREE_EPS:
        return _single_component_plan(mesh, config)
    cands, footprint, plat_ok = _prepare(mesh, config)

    remaining = mesh
    history: list[ClipRecord] = []
    while True:
        risky_now = risky_area(remaining, platform, params).total_risky_area
        if _terminal(remaining, config, input_volume, risky_now):
            break
        scores = score_candidates(
            remaining, cands, platform, params,
            need_local=True, max_workers=config.max_workers,
        )
        mask = _candidate_order_mask(scores, plat_ok, input_volume / config.volume_divisor)
        candidates = np.flatnonzero(mask)
        if not len(candidates):
            break
        order = candidates[np.lexsort((candidates, -scores.local_descent[candidates]))]

        passes = [order]
        if constrained:
            support_free = order[scores.upper_risky[order] <= RISK_FREE_EPS]
            passes = [support_free, order]

        chosen: Optional[tuple[int, CriteriaReport]] = None
        for pass_no, pool in enumerate(passes):
            for ci in pool:
                report = check_criteria(
                    remaining, cands.planes[ci], config, input_volume, footprint
                )
                if not report.feasible:
                    continue
                if pass_no == 0 and constrained:
                    r_up = risky_area(report.upper, cands.planes[ci], params).total_risky_area
                    if r_up > RISK_FREE_EPS:
                        continue
                chosen = (int(ci), report)
                break
            if chosen:
                break
        if not chosen:
            break
        ci, report = chosen
        gamma = cands.planes[ci]
        descent = (
            risky_now
            - risky_area(report.lower, platform, params).total_risky_area
            - risky_area(report.upper, gamma, params).total_risky_area
        )
        if descent <= 0.0:
            break
        r_up = risky_area(report.upper, gamma, params).total_risky_area
        history.append(ClipRecord(gamma, report.upper, r_up))
        remaining = report.lower
        log.info(
            "greedy clip %d: candidate %d, descent %.3f mm^2, upper risk %.3f mm^2",
            len(history), ci, descent, r_up,
        )
    return invert_to_sequence(mesh, history, platform, params)


def greedy_unconstrained(mesh: TriMesh, config: SearchConfig) -> DecompositionPlan:
    """Peel off the clip with the largest risky-area descent each step."""
    return _greedy(mesh, config, constrained=False)


def greedy_constrained(mesh: TriMesh, config: SearchConfig) -> DecompositionPlan:
    """Like greedy_unconstrained but prefers clips whose upper part is fully
    self-supported, falling back to the unconstrained choice when none is."""
    return _greedy(mesh, config, constrained=True)


@dataclass
class _BeamState:
    remaining: TriMesh
    history: tuple
    jg_partial: float     # risky area of all removed components so far


@dataclass(frozen=True)
class _Finished:
    jg_total: float
    order: int
    history: tuple


def _relaxation_round(entry_r: float, delta0: float, mult: float) -> int:
    """Index of the first relaxation round whose threshold exceeds entry_r."""
    if entry_r < delta0:
        return 0
    return int(math.floor(math.log(entry_r / delta0) / math.log(mult))) + 1


def beam_search(mesh: TriMesh, config: SearchConfig) -> DecompositionPlan:
    """
    Breadth-first search over clip sequences keeping `beam_width` partial
    decompositions per round, filled by progressively relaxing the
    support-free admission threshold.  Returns the finished decomposition
    with the smallest total risky area.
    """
    params = config.self_support
    platform = config.platform
    b = config.beam_width
    input_volume = mesh.volume
    min_volume = input_volume / config.volume_divisor
    if risky_area(mesh, platform, params).total_risky_area <= RISK_FREE_EPS:
        return _single_component_plan(mesh, config)
    cands, footprint, plat_ok = _prepare(mesh, config)

    cos_dedup = math.cos(math.radians(config.dedup_angle_deg))
    off_dedup = config.dedup_offset

    live: list[_BeamState] = [_BeamState(mesh, (), 0.0)]
    finished: list[_Finished] = []
    finish_counter = 0

    def finalize(state: _BeamState, risky_remaining: float) -> None:
        nonlocal finish_counter
        finished.append(
            _Finished(state.jg_partial + risky_remaining, finish_counter, state.history)
        )
        finish_counter += 1

    round_no = 0
    while live:
        round_no += 1
        still_live: list[_BeamState] = []
        for state in live:
            risky_now = risky_area(state.remaining, platform, params).total_risky_area
            if _terminal(state.remaining, config, input_volume, risky_now):
                finalize(state, risky_now)
            else:
                still_live.append(state)
        live = still_live
        if not live:
            break

        # pool of scored expansions across all live beams
        pool_entries = []  # (jg_key, cand_idx, beam_idx, r_score)
        for bi, state in enumerate(live):
            scores = score_candidates(
                state.remaining, cands, platform, params,
                need_local=False, max_workers=config.max_workers,
            )
            mask = _candidate_order_mask(scores, plat_ok, min_volume)
            for ci in np.flatnonzero(mask):
                r = float(scores.upper_risky[ci])
                pool_entries.append((state.jg_partial + max(r, 0.0), int(ci), bi, max(r, 0.0)))

        if not pool_entries:
            for state in live:
                finalize(
                    state,
                    risky_area(state.remaining, platform, params).total_risky_area,
                )
            break

        # bucket entries by the relaxation round that first admits them
        buckets: dict[int, list] = {}
        max_round = 0
        for jg_key, ci, bi, r in pool_entries:
            rnd = _relaxation_round(r, config.delta0, config.delta_mult)
            buckets.setdefault(rnd, []).append((jg_key, ci, bi, r))
            max_round = max(max_round, rnd)

        admitted: list[_BeamState] = []
        admitted_marks: dict[int, list[tuple[np.ndarray, float]]] = {}
        heap: list = []
        delta = config.delta0
        rnd = 0
        clip_attempts = 0
        while len(admitted) < b:
            for entry in sorted(buckets.pop(rnd, [])):
                heapq.heappush(heap, entry)
            while heap and len(admitted) < b:
                jg_key, ci, bi, r = heapq.heappop(heap)
                plane = cands.planes[ci]
                normal = cands.normals[cands.normal_index[ci]]
                offset = float(cands.offsets[ci])
                duplicate = any(
                    float(normal @ n0) >= cos_dedup and abs(offset - o0) <= off_dedup
                    for n0, o0 in admitted_marks.get(bi, ())
                )
                if duplicate:
                    continue
                parent = live[bi]
                report = check_criteria(
                    parent.remaining, plane, config, input_volume, footprint
                )
                clip_attempts += 1
                if not report.feasible:
                    continue
                r_mesh = risky_area(report.upper, plane, params).total_risky_area
                if r_mesh >= delta:
                    # exact risk crosses the current threshold: defer
                    later = _relaxation_round(r_mesh, config.delta0, config.delta_mult)
                    buckets.setdefault(max(later, rnd + 1), []).append(
                        (parent.jg_partial + r_mesh, ci, bi, r_mesh)
                    )
                    max_round = max(max_round, later)
                    continue
                admitted.append(
                    _BeamState(
                        report.lower,
                        parent.history + (ClipRecord(plane, report.upper, r_mesh),),
                        parent.jg_partial + r_mesh,
                    )
                )
                admitted_marks.setdefault(bi, []).append((normal, offset))
            if len(admitted) >= b:
                break
            rnd += 1
            delta *= config.delta_mult
            if rnd > max_round and not heap and not buckets:
                break

        log.info(
            "round %d: %d live beams, %d pool entries, %d clips tried, %d admitted, %d finished",
            round_no, len(live), len(pool_entries), clip_attempts, len(admitted), len(finished),
        )
        if not admitted:
            for state in live:
                finalize(
                    state,
                    risky_area(state.remaining, platform, params).total_risky_area,
                )
            break
        live = admitted

    if not finished:
        return _single_component_plan(mesh, config)
    best = min(finished, key=lambda f: (f.jg_total, f.order))
    return invert_to_sequence(mesh, best.history, platform, params)


def plan_mesh(mesh: TriMesh, config: SearchConfig) -> DecompositionPlan:
    """Dispatch to the planner selected by config.mode."""
    if config.mode == "beam":
        return beam_search(mesh, config)
    if config.mode == "greedy_unconstrained":
        return greedy_unconstrained(mesh, config)
    if config.mode == "greedy_constrained":
        return greedy_constrained(mesh, config)
    raise ValueError(f"unknown search mode {config.mode!r}")
