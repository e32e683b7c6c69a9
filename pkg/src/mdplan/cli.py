"""
Command-line pipeline: load a mesh, plan its decomposition, generate
projected supports, validate, and write parts, supports, plan.json and a
run report.

Exit codes: 0 success, 2 infeasible input (parse or manifold errors),
3 internal validation failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .candidates import NoCandidatesError, SamplerConfig
from .mesh import HalfSpaceCell, InvalidMeshError, Plane, TriMesh
from .meshio import load_mesh, detect_format, save_stl_file
from .risk import SelfSupportParams, risky_area
from .search import (
    DecompositionPlan,
    SearchConfig,
    plan_mesh,
    validate_plan,
)
from .supports import (
    SupportConfig,
    SupportTree,
    UnprojectableSupportError,
    detect_overhangs,
    emit_support_mesh,
    grow_tree,
    progressive_projection,
    support_volume,
)

log = logging.getLogger(__name__)

_MODE_NAMES = {
    "greedy": "greedy_unconstrained",
    "greedy-constrained": "greedy_constrained",
    "beam": "beam",
}
_NOZZLE_INTERVALS = {0.4: 2.0, 0.8: 3.0}


@dataclass
class RunConfig:
    input_path: str
    output_dir: str
    mode: str = "beam"
    beam_width: int = 10
    volume_divisor: int = 10
    delta0: float = 0.1
    delta_mult: float = 5.0
    alpha_max_deg: float = 45.0
    dof: int = 5
    axis: tuple[float, float, float] = (1.0, 0.0, 0.0)
    max_tilt_deg: Optional[float] = None
    normal_count: int = 250
    offset_step: float = 1.0
    nozzle: float = 0.4
    emit_supports: bool = True
    threads: int = 1
    report_format: str = "json"

    def search_config(self) -> SearchConfig:
        sampler = SamplerConfig(
            normal_count=self.normal_count,
            offset_step=self.offset_step,
            rotation_axis=self.axis if self.dof == 4 else None,
            max_tilt_deg=self.max_tilt_deg,
        )
        return SearchConfig(
            mode=self.mode,
            beam_width=self.beam_width,
            volume_divisor=self.volume_divisor,
            delta0=self.delta0,
            delta_mult=self.delta_mult,
            self_support=SelfSupportParams(alpha_max_deg=self.alpha_max_deg),
            sampler=sampler,
            max_workers=max(1, self.threads),
        )

    def support_config(self) -> SupportConfig:
        return SupportConfig(sample_interval=_NOZZLE_INTERVALS.get(self.nozzle, 2.0))


def _round_sig(value: float, digits: int = 9) -> float:
    return float(format(float(value), f".{digits}g"))


def _json_ready(obj):
    if isinstance(obj, float):
        return _round_sig(obj)
    if isinstance(obj, (np.floating,)):
        return _round_sig(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_json_ready(x) for x in obj.tolist()]
    if isinstance(obj, (list, tuple)):
        return [_json_ready(x) for x in obj]
    if isinstance(obj, dict):
        return {k: _json_ready(v) for k, v in obj.items()}
    return obj


def _plane_dict(plane: Plane) -> dict:
    return {"anchor": list(plane.anchor), "normal": list(plane.normal)}


def _cell_list(cell: HalfSpaceCell) -> list:
    return [
        {"anchor": list(p.anchor), "normal": list(p.normal), "side": side}
        for p, side in cell.halves
    ]


def emit_plan(
    plan: DecompositionPlan,
    tree: Optional[SupportTree],
    path: str,
    mode: str = "beam",
    config: Optional[dict] = None,
    support_files: Optional[list[str]] = None,
) -> None:
    """Write plan.json: fixed key order, 9 significant digits, byte-stable."""
    doc = {
        "units": "mm",
        "mode": mode,
        "config": config or {},
        "j_global": plan.j_global,
        "components": [
            {
                "index": i + 1,
                "mesh_file": f"part_{i + 1}.stl",
                "base_plane": _plane_dict(c.base),
                "direction": list(c.direction),
                "risky_area_mm2": c.risky_area,
                "cell": _cell_list(c.cell),
            }
            for i, c in enumerate(plan.components)
        ],
        "supports": {
            "volume_mm3": support_volume(tree) if tree is not None else 0.0,
            "files": support_files or [],
        },
    }
    text = json.dumps(_json_ready(doc), indent=2)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text + "\n")


def load_plan(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _config_dict(config: RunConfig) -> dict:
    return {
        "mode": config.mode,
        "beam_width": config.beam_width,
        "volume_divisor": config.volume_divisor,
        "delta0": config.delta0,
        "delta_mult": config.delta_mult,
        "alpha_max_deg": config.alpha_max_deg,
        "dof": config.dof,
        "axis": list(config.axis) if config.dof == 4 else None,
        "max_tilt_deg": config.max_tilt_deg,
        "normal_count": config.normal_count,
        "offset_step": config.offset_step,
        "nozzle": config.nozzle,
        "supports": config.emit_supports,
    }


def _single_direction_supports(
    mesh: TriMesh, platform: Plane, params: SelfSupportParams, support_cfg: SupportConfig
) -> float:
    """Support volume if the whole input were printed along the platform
    normal (the fixed-direction baseline in the report)."""
    samples = detect_overhangs(mesh, platform, params, support_cfg)
    if not samples:
        return 0.0
    cell = HalfSpaceCell(((platform, "above"),))
    tree = grow_tree(samples, mesh, cell, platform.normal, support_cfg, self_support=params)
    return support_volume(tree)


@dataclass
class PlanReport:
    model: str
    triangles: int
    dof: str
    compute_time_s: float
    parts: int
    j_global_before: float
    j_global_after: float
    support_volume_before: Optional[float]
    support_volume_after: Optional[float]

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "triangles": self.triangles,
            "dof": self.dof,
            "compute_time_s": self.compute_time_s,
            "parts": self.parts,
            "j_global_before": self.j_global_before,
            "j_global_after": self.j_global_after,
            "support_volume_before_mm3": self.support_volume_before,
            "support_volume_after_mm3": self.support_volume_after,
        }

    def to_text(self) -> str:
        def num(x):
            return "-" if x is None else f"{x:.2f}"

        rows = [
            ("Model", self.model),
            ("Trgl. #", str(self.triangles)),
            ("Type", self.dof),
            ("Computing Time", f"{self.compute_time_s:.1f} sec."),
            ("Part #", str(self.parts)),
            ("J_G Before", num(self.j_global_before)),
            ("J_G After", num(self.j_global_after)),
            ("Support Volume Before", num(self.support_volume_before)),
            ("Support Volume After", num(self.support_volume_after)),
        ]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows) + "\n"


def run_pipeline(config: RunConfig) -> int:
    """Execute the full planning pipeline; returns the process exit code."""
    out_dir = Path(config.output_dir)
    try:
        data = Path(config.input_path).read_bytes()
        mesh = load_mesh(data, detect_format(config.input_path, data))
    except (OSError, InvalidMeshError) as exc:
        print(f"error: cannot load {config.input_path}: {exc}", file=sys.stderr)
        return 2

    search_cfg = config.search_config()
    support_cfg = config.support_config()
    params = search_cfg.self_support
    platform = search_cfg.platform

    started = time.perf_counter()
    try:
        plan = plan_mesh(mesh, search_cfg)
    except NoCandidatesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    tree: Optional[SupportTree] = None
    support_before: Optional[float] = None
    if config.emit_supports:
        try:
            tree = progressive_projection(plan, params, support_cfg)
        except UnprojectableSupportError as exc:
            print(f"error: support generation failed: {exc}", file=sys.stderr)
            return 3
        support_before = _single_direction_supports(mesh, platform, params, support_cfg)
    elapsed = time.perf_counter() - started

    validation = validate_plan(plan, mesh, params, platform)
    if not validation.ok:
        for violation in validation.violations:
            print(f"validation: {violation}", file=sys.stderr)
        return 3

    out_dir.mkdir(parents=True, exist_ok=True)
    for i, comp in enumerate(plan.components):
        save_stl_file(comp.mesh, str(out_dir / f"part_{i + 1}.stl"))

    support_files: list[str] = []
    if tree is not None and tree.struts:
        by_cell: dict[int, list] = {}
        for strut in tree.struts:
            by_cell.setdefault(strut.cell_index, []).append(strut)
        for ci in sorted(by_cell):
            sub = SupportTree(nodes=tree.nodes, struts=by_cell[ci])
            sub_mesh = emit_support_mesh(sub)
            if sub_mesh is not None:
                name = f"supports_{ci + 1}.stl"
                save_stl_file(sub_mesh, str(out_dir / name))
                support_files.append(name)

    emit_plan(
        plan,
        tree,
        str(out_dir / "plan.json"),
        mode=config.mode,
        config=_config_dict(config),
        support_files=support_files,
    )

    report = PlanReport(
        model=Path(config.input_path).stem,
        triangles=len(mesh.triangles),
        dof=f"{config.dof}DOF",
        compute_time_s=elapsed,
        parts=len(plan.components),
        j_global_before=risky_area(mesh, platform, params).total_risky_area,
        j_global_after=plan.j_global,
        support_volume_before=support_before,
        support_volume_after=support_volume(tree) if tree is not None else None,
    )
    if config.report_format == "json":
        with open(out_dir / "report.json", "w", encoding="utf-8") as fh:
            json.dump(_json_ready(report.to_dict()), fh, indent=2)
            fh.write("\n")
    else:
        (out_dir / "report.txt").write_text(report.to_text(), encoding="utf-8")
    print(
        f"{report.model}: {report.parts} parts, risky area "
        f"{report.j_global_before:.2f} -> {report.j_global_after:.2f} mm^2 "
        f"in {elapsed:.1f} s"
    )
    return 0


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mdplan",
        description="Decompose a mesh for multi-directional FDM printing.",
    )
    parser.add_argument("--input", required=True, help="input mesh (STL or OBJ)")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument(
        "--mode", choices=sorted(_MODE_NAMES), default="beam", help="search scheme"
    )
    parser.add_argument("--beam-width", type=int, default=10)
    parser.add_argument("--w", type=int, default=10, dest="volume_divisor",
                        help="volume divisor: parts smaller than V/w terminate")
    parser.add_argument("--alpha-max", type=float, default=45.0,
                        help="maximal self-supporting angle in degrees")
    parser.add_argument("--dof", type=int, choices=(4, 5), default=5)
    parser.add_argument("--axis", type=str, default="1,0,0",
                        help="rotation axis for --dof 4, as x,y,z")
    parser.add_argument("--max-tilt", type=float, default=None,
                        help="discard directions tilted more than this from +z")
    parser.add_argument("--normals", type=int, default=250)
    parser.add_argument("--offset-step", type=float, default=1.0)
    parser.add_argument("--delta0", type=float, default=0.1)
    parser.add_argument("--delta-mult", type=float, default=5.0)
    parser.add_argument("--nozzle", type=float, choices=(0.4, 0.8), default=0.4)
    parser.add_argument("--supports", choices=("on", "off"), default="on")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--report", choices=("json", "text"), default="json")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    axis = tuple(float(x) for x in args.axis.split(","))
    if len(axis) != 3:
        raise ValueError("--axis expects three comma-separated numbers")
    norm = float(np.linalg.norm(axis))
    if norm < 1e-12:
        raise ValueError("--axis must be nonzero")
    axis = tuple(float(x) / norm for x in axis)
    return RunConfig(
        input_path=args.input,
        output_dir=args.out,
        mode=_MODE_NAMES[args.mode],
        beam_width=args.beam_width,
        volume_divisor=args.volume_divisor,
        alpha_max_deg=args.alpha_max,
        dof=args.dof,
        axis=axis,
        max_tilt_deg=args.max_tilt,
        normal_count=args.normals,
        offset_step=args.offset_step,
        delta0=args.delta0,
        delta_mult=args.delta_mult,
        nozzle=args.nozzle,
        emit_supports=args.supports == "on",
        threads=args.threads,
        report_format=args.report,
    )


def main(argv: Optional[list[str]] = None) -> int:
    level = os.environ.get("MDP_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_arg_parser().parse_args(argv)
    try:
        config = config_from_args(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return run_pipeline(config)


if __name__ == "__main__":
    sys.exit(main())
