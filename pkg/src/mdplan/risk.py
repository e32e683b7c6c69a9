"""
Printability scoring: the per-face overhang predicate, risky-area totals and
the global/local objectives used by the decomposition search.

A face overhangs when its normal points more than the self-supporting angle
below the printing direction.  Faces resting on the base plane itself (caps
from clipping, or a model's flat bottom) are supported by the platform or by
previously printed material and are therefore exempt.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .clipping import clip
from .mesh import Plane, TriMesh


@dataclass(frozen=True)
class SelfSupportParams:
    """Self-support limits: angle in degrees in (0, 90), contact slack in mm."""

    alpha_max_deg: float = 45.0
    base_contact_eps: float = 1e-3

    def __post_init__(self):
        if not 0.0 < self.alpha_max_deg < 90.0:
            raise ValueError("alpha_max_deg must be in (0, 90)")
        if self.base_contact_eps < 0:
            raise ValueError("base_contact_eps must be >= 0")

    @property
    def sin_alpha(self) -> float:
        return math.sin(math.radians(self.alpha_max_deg))


@dataclass(frozen=True)
class RiskReport:
    """Risky-face summary for one mesh against one base plane."""

    total_risky_area: float
    per_face_flags: np.ndarray

    def __post_init__(self):
        flags = np.asarray(self.per_face_flags, dtype=bool)
        flags.setflags(write=False)
        object.__setattr__(self, "per_face_flags", flags)


def risky_flags(mesh: TriMesh, base: Plane, params: SelfSupportParams) -> np.ndarray:
    """Boolean per-face overhang flags, with the base-contact exemption."""
    d = base.normal
    dots = mesh.face_normals @ d
    risky = (dots + params.sin_alpha) < 0.0
    if risky.any():
        exempt = dots <= -1.0 + 1e-6
        if exempt.any():
            dist = np.abs(base.signed_distance(mesh.face_centroids))
            exempt &= dist <= params.base_contact_eps
            risky &= ~exempt
    return risky


def face_risky(face_normal, base: Plane, params: SelfSupportParams, face_centroid) -> int:
    """
    Overhang predicate for a single face: 1 when the normal dips below the
    self-support cone of the base plane's printing direction, 0 otherwise.
    Faces lying on the base plane with an antiparallel normal are exempt.
    """
    n = np.asarray(face_normal, dtype=np.float64)
    dot = float(n @ base.normal)
    if dot + params.sin_alpha >= 0.0:
        return 0
    if dot <= -1.0 + 1e-6:
        if abs(base.signed_distance(np.asarray(face_centroid, dtype=np.float64))) <= params.base_contact_eps:
            return 0
    return 1


def risky_area(mesh: TriMesh, base: Plane, params: SelfSupportParams) -> RiskReport:
    """Total area of overhanging faces of `mesh` printed on `base` (mm^2)."""
    flags = risky_flags(mesh, base, params)
    return RiskReport(float(mesh.face_areas[flags].sum()), flags)


def global_objective(plan, params: SelfSupportParams) -> float:
    """
    Total risky area of a decomposition: each component scored against its
    own base plane, summed (mm^2).
    """
    return float(
        sum(risky_area(c.mesh, c.base, params).total_risky_area for c in plan.components)
    )


def local_descent(
    current: TriMesh,
    gamma: Plane,
    platform: Plane,
    params: SelfSupportParams,
) -> float:
    """
    Risky-area reduction achieved by one clip: the current model's risky area
    against the platform, minus what remains after the cut (lower part still
    scored against the platform, upper part against its new base `gamma`).
    Degenerate clips propagate as DegenerateClipError.
    """
    upper, lower = clip(current, gamma)
    before = risky_area(current, platform, params).total_risky_area
    after = 0.0
    if lower is not None:
        after += risky_area(lower, platform, params).total_risky_area
    if upper is not None:
        after += risky_area(upper, gamma, params).total_risky_area
    return before - after
