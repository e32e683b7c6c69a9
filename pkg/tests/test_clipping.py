import math

import numpy as np
import pytest

import fixtures as fx
from mdplan import DegenerateClipError, Plane, TriMesh
from mdplan.clipping import cap_face_mask, clip, plane_crosses


def _watertight(mesh: TriMesh) -> bool:
    try:
        TriMesh(mesh.vertices, mesh.triangles)
        return True
    except Exception:
        return False


def test_cube_symmetric_cut():
    m = fx.cube(1.0)
    up, low = clip(m, Plane((0.0, 0.0, 0.5), (0.0, 0.0, 1.0)))
    assert up.volume == pytest.approx(0.5)
    assert low.volume == pytest.approx(0.5)
    assert _watertight(up) and _watertight(low)


def test_cube_plane_misses():
    m = fx.cube(1.0)
    up, low = clip(m, Plane((0.0, 0.0, 2.0), (0.0, 0.0, 1.0)))
    assert up is None
    assert low is m


def test_cube_plane_below():
    m = fx.cube(1.0)
    up, low = clip(m, Plane((0.0, 0.0, -1.0), (0.0, 0.0, 1.0)))
    assert up is m
    assert low is None


def test_hemisphere_volumes(sphere_fine_origin):
    up, low = clip(sphere_fine_origin, Plane((0.0, 0.0, 0.0), (0.0, 0.0, 1.0)))
    half = 2.0 * math.pi / 3.0 * 40.0**3
    assert up.volume == pytest.approx(half, rel=0.01)
    assert low.volume == pytest.approx(half, rel=0.01)
    assert _watertight(up) and _watertight(low)


def test_degenerate_clip_rejected():
    m = fx.cube(1.0)
    with pytest.raises(DegenerateClipError):
        clip(m, Plane((0.0, 0.0, 1.0), (0.0, 0.0, 1.0)))


def test_cap_orientation():
    m = fx.cube(2.0)
    plane = Plane((0.0, 0.0, 1.0), (0.0, 0.0, 1.0))
    up, low = clip(m, plane)
    up_caps = cap_face_mask(up, plane, "upper")
    low_caps = cap_face_mask(low, plane, "lower")
    assert up_caps.any() and low_caps.any()
    assert np.allclose(up.face_normals[up_caps], [0.0, 0.0, -1.0])
    assert np.allclose(low.face_normals[low_caps], [0.0, 0.0, 1.0])
    # cap area equals the cross-section
    assert up.face_areas[up_caps].sum() == pytest.approx(4.0)


def test_torus_horizontal_cut_has_hole(torus_mesh):
    # the cross-section is an annulus: capping must handle the inner loop
    plane = Plane((0.0, 0.0, 10.0), (0.0, 0.0, 1.0))
    up, low = clip(torus_mesh, plane)
    assert up.volume + low.volume == pytest.approx(torus_mesh.volume, rel=1e-9)
    assert _watertight(up) and _watertight(low)
    caps = cap_face_mask(up, plane, "upper")
    ring_area = math.pi * (35.0**2 - 15.0**2)
    assert up.face_areas[caps].sum() == pytest.approx(ring_area, rel=0.02)


def test_torus_vertical_cut_two_loops(torus_mesh):
    # slicing through the hole yields two disjoint circular cross-sections
    plane = Plane((0.0, 0.0, 10.0), (0.0, 1.0, 0.0))
    up, low = clip(torus_mesh, plane)
    assert up.volume == pytest.approx(torus_mesh.volume / 2.0, rel=1e-6)
    assert _watertight(up) and _watertight(low)


def test_sphere_equator_on_vertices():
    # subdivided icosahedra have vertices and whole edges exactly on z=0
    m = fx.icosphere(1.0, 3)
    on_plane = np.abs(m.vertices[:, 2]) < 1e-12
    assert on_plane.any()
    up, low = clip(m, Plane((0.0, 0.0, 0.0), (0.0, 0.0, 1.0)))
    assert up.volume + low.volume == pytest.approx(m.volume, rel=1e-9)
    assert _watertight(up) and _watertight(low)


def test_clip_side_separation(lprism):
    n = np.array([1.0, 0.0, 1.0]) / math.sqrt(2.0)
    plane = Plane(n * 20.0, n)
    up, low = clip(lprism, plane)
    assert plane.signed_distance(up.vertices).min() >= -1e-6
    assert plane.signed_distance(low.vertices).max() <= 1e-6


def test_clip_area_never_shrinks(lprism):
    n = np.array([1.0, 0.0, 1.0]) / math.sqrt(2.0)
    up, low = clip(lprism, Plane(n * 20.0, n))
    assert up.area + low.area >= lprism.area - 1e-9


def test_plane_crosses(cube20):
    assert plane_crosses(cube20, Plane((0.0, 0.0, 10.0), (0.0, 0.0, 1.0)))
    assert not plane_crosses(cube20, Plane((0.0, 0.0, 30.0), (0.0, 0.0, 1.0)))


@pytest.mark.parametrize("seed", range(5))
def test_conservation_random_cuts(seed, sphere_small, torus_mesh, lprism):
    rng = np.random.default_rng(1000 + seed)
    for mesh in (sphere_small, torus_mesh, lprism):
        for _ in range(8):
            n = rng.normal(size=3)
            n /= np.linalg.norm(n)
            proj = mesh.vertices @ n
            span = proj.max() - proj.min()
            t = rng.uniform(proj.min() + 0.05 * span, proj.max() - 0.05 * span)
            try:
                up, low = clip(mesh, Plane(n * t, n))
            except DegenerateClipError:
                continue
            v_up = up.volume if up is not None else 0.0
            v_low = low.volume if low is not None else 0.0
            assert abs(v_up + v_low - mesh.volume) <= 1e-6 * mesh.volume
            for part in (up, low):
                if part is not None:
                    assert _watertight(part)
