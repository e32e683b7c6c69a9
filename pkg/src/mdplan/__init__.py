"""
mdplan: support-effective volume decomposition for multi-directional FDM
printing, with projected tree supports and a planning CLI.
"""

from .candidates import (
    CandidateSet,
    NoCandidatesError,
    SamplerConfig,
    generate_candidates,
    sample_normals,
)
from .clipping import cap_face_mask, clip, plane_crosses
from .mesh import (
    Aabb,
    DegenerateClipError,
    HalfSpaceCell,
    InvalidMeshError,
    Plane,
    TriMesh,
    cell_contains,
    connected_components,
    plane_basis,
    surface_area,
    volume,
)
from .meshio import load_mesh, load_mesh_file, save_stl, save_stl_file
from .risk import (
    RiskReport,
    SelfSupportParams,
    face_risky,
    global_objective,
    local_descent,
    risky_area,
)
from .search import (
    Beam,
    ClipRecord,
    CriteriaReport,
    DecompositionPlan,
    PlanComponent,
    SearchConfig,
    ThinPartFilter,
    ValidationReport,
    beam_search,
    check_criteria,
    greedy_constrained,
    greedy_unconstrained,
    invert_to_sequence,
    plan_mesh,
    validate_plan,
)
from .supports import (
    OverhangSample,
    Strut,
    SupportConfig,
    SupportTree,
    UnprojectableSupportError,
    detect_overhangs,
    emit_support_mesh,
    grow_tree,
    progressive_projection,
    support_volume,
)

__all__ = [
    "Aabb",
    "Beam",
    "CandidateSet",
    "ClipRecord",
    "CriteriaReport",
    "DecompositionPlan",
    "DegenerateClipError",
    "HalfSpaceCell",
    "InvalidMeshError",
    "NoCandidatesError",
    "OverhangSample",
    "Plane",
    "PlanComponent",
    "RiskReport",
    "SamplerConfig",
    "SearchConfig",
    "SelfSupportParams",
    "Strut",
    "SupportConfig",
    "SupportTree",
    "ThinPartFilter",
    "TriMesh",
    "UnprojectableSupportError",
    "ValidationReport",
    "beam_search",
    "cap_face_mask",
    "cell_contains",
    "check_criteria",
    "clip",
    "connected_components",
    "detect_overhangs",
    "emit_support_mesh",
    "face_risky",
    "generate_candidates",
    "global_objective",
    "greedy_constrained",
    "greedy_unconstrained",
    "grow_tree",
    "invert_to_sequence",
    "load_mesh",
    "load_mesh_file",
    "local_descent",
    "plan_basis",
    "plan_mesh",
    "plane_crosses",
    "progressive_projection",
    "risky_area",
    "sample_normals",
    "save_stl",
    "save_stl_file",
    "support_volume",
    "surface_area",
    "validate_plan",
    "volume",
]
