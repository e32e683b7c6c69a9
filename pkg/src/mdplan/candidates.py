"""
Candidate clipping-plane generation.

Directions come from a Fibonacci lattice over the full sphere (five-DOF
hardware) or from a uniform circle orthogonal to the rotation axis (four-DOF
hardware).  Along every direction, planes are placed at a fixed offset step
across the mesh extent, excluding the tangent endpoints.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .mesh import Plane, TriMesh, plane_basis


class NoCandidatesError(ValueError):
    """Raised when the offset step exceeds the mesh extent in every direction."""


@dataclass(frozen=True)
class SamplerConfig:
    """
    Plane sampling parameters.

    rotation_axis None means a five-DOF system (full Gaussian sphere);
    otherwise directions are restricted to the circle orthogonal to the axis.
    max_tilt_deg, when set, removes directions tilted more than that from +z.
    """

    normal_count: int = 250
    offset_step: float = 1.0
    rotation_axis: Optional[tuple[float, float, float]] = None
    max_tilt_deg: Optional[float] = None

    def __post_init__(self):
        if self.normal_count < 1:
            raise ValueError("normal_count must be >= 1")
        if self.offset_step <= 0:
            raise ValueError("offset_step must be positive")
        if self.rotation_axis is not None:
            axis = np.asarray(self.rotation_axis, dtype=np.float64)
            norm = float(np.linalg.norm(axis))
            if norm < 1e-12:
                raise ValueError("rotation axis must be nonzero")
            if abs(norm - 1.0) > 1e-9:
                raise ValueError("rotation axis must be unit length")

    @property
    def dof_mode(self) -> str:
        return "five_dof" if self.rotation_axis is None else "four_dof"


@dataclass(frozen=True)
class CandidateSet:
    """
    Ordered, reproducible set of candidate planes.

    planes[i] has direction normals[normal_index[i]] and scalar offset
    offsets[i] along that direction.  Order is by normal index, then
    ascending offset.
    """

    planes: tuple
    normals: np.ndarray
    normal_index: np.ndarray
    offsets: np.ndarray

    def __len__(self) -> int:
        return len(self.planes)


def sample_normals(config: SamplerConfig) -> np.ndarray:
    """Unit sampling directions for the configured degrees of freedom."""
    n = config.normal_count
    if config.rotation_axis is None:
        k = np.arange(n)
        z = 1.0 - 2.0 * (k + 0.5) / n
        golden = math.pi * (3.0 - math.sqrt(5.0))
        theta = golden * k
        r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
        dirs = np.column_stack([r * np.cos(theta), r * np.sin(theta), z])
    else:
        axis = np.asarray(config.rotation_axis, dtype=np.float64)
        u, v = plane_basis(axis)
        ang = 2.0 * math.pi * np.arange(n) / n
        dirs = np.cos(ang)[:, None] * u + np.sin(ang)[:, None] * v
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    if config.max_tilt_deg is not None:
        cos_limit = math.cos(math.radians(config.max_tilt_deg))
        dirs = dirs[dirs[:, 2] >= cos_limit - 1e-12]
    return dirs


def generate_candidates(mesh: TriMesh, config: SamplerConfig) -> CandidateSet:
    """
    Build the finite search space of clipping planes for a mesh.

    For each sampled direction, planes sit at offsets
    t_min + step, t_min + 2*step, ... up to t_max - step, where [t_min, t_max]
    spans the vertex projections.  Planes that do not cross the mesh interior
    (no triangle strictly on both sides) are excluded.
    """
    dirs = sample_normals(config)
    verts = mesh.vertices
    tris = mesh.triangles
    step = config.offset_step

    planes: list[Plane] = []
    normal_index: list[int] = []
    offsets: list[float] = []
    for ni, n in enumerate(dirs):
        proj = verts @ n
        t_min = float(proj.min())
        t_max = float(proj.max())
        count = int(math.floor((t_max - t_min) / step - 1.0 + 1e-9))
        if count < 1:
            continue
        ts = t_min + step * np.arange(1, count + 1)
        tri_proj = proj[tris]
        lo = tri_proj.min(axis=1)
        hi = tri_proj.max(axis=1)
        order = np.argsort(lo, kind="stable")
        lo_sorted = lo[order]
        hi_prefix_max = np.maximum.accumulate(hi[order])
        for t in ts:
            # a triangle strictly crossing t exists iff some triangle with
            # lo < t also has hi > t
            pos = int(np.searchsorted(lo_sorted, t - 1e-9, side="left"))
            crossing = pos > 0 and float(hi_prefix_max[pos - 1]) > t + 1e-9
            if crossing:
                planes.append(Plane(n * t, n))
                normal_index.append(ni)
                offsets.append(float(t))
    if not planes:
        raise NoCandidatesError("no candidates: offset step exceeds mesh extent")
    return CandidateSet(
        planes=tuple(planes),
        normals=dirs,
        normal_index=np.asarray(normal_index, dtype=np.int64),
        offsets=np.asarray(offsets, dtype=np.float64),
    )
