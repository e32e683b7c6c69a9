import math

import numpy as np
import pytest

import fixtures as fx
from mdplan import (
    Aabb,
    HalfSpaceCell,
    InvalidMeshError,
    Plane,
    TriMesh,
    cell_contains,
    connected_components,
    surface_area,
    volume,
)
from mdplan.clipping import clip


def test_cube_volume_and_area():
    m = fx.cube(1.0)
    assert volume(m) == pytest.approx(1.0)
    assert surface_area(m) == pytest.approx(6.0)


def test_two_disjoint_cubes_additivity():
    m = fx.two_cubes()
    assert volume(m) == pytest.approx(2.0)
    assert surface_area(m) == pytest.approx(12.0)


def test_icosphere_volume_close_to_analytic(sphere_small):
    # 4/3 pi at this resolution is matched to a few tenths of a percent
    assert volume(sphere_small) == pytest.approx(4.18879, rel=4e-3)


def test_fine_icosphere_volume_within_tenth_percent():
    m = fx.icosphere(1.0, 5)
    assert len(m.triangles) == 20480
    assert volume(m) == pytest.approx(4.0 / 3.0 * math.pi, rel=1e-3)


def test_validation_rejects_open_mesh():
    m = fx.cube(1.0)
    with pytest.raises(InvalidMeshError, match="non-watertight"):
        TriMesh(m.vertices, m.triangles[:-1])


def test_validation_rejects_inverted():
    m = fx.cube(1.0)
    with pytest.raises(InvalidMeshError):
        TriMesh(m.vertices, m.triangles[:, ::-1])


def test_validation_rejects_duplicate_face():
    m = fx.cube(1.0)
    faces = np.vstack([m.triangles, m.triangles[:1]])
    with pytest.raises(InvalidMeshError, match="non-manifold"):
        TriMesh(m.vertices, faces)


def test_immutability():
    m = fx.cube(1.0)
    with pytest.raises(ValueError):
        m.vertices[0, 0] = 5.0
    with pytest.raises(AttributeError):
        m.vertices = None


def test_connected_components_single(cube20):
    assert len(connected_components(cube20)) == 1


def test_connected_components_two_cubes():
    parts = connected_components(fx.two_cubes())
    assert len(parts) == 2
    assert parts[0].aabb.min[0] < parts[1].aabb.min[0]
    assert volume(parts[0]) == pytest.approx(1.0)


def test_connected_components_detached_corner(lprism):
    # a diagonal cut isolates the arm tip and the corner wedge
    n = np.array([1.0, 0.0, 1.0]) / math.sqrt(2.0)
    upper, lower = clip(lprism, Plane(n * 20.0, n))
    assert upper is not None
    parts = connected_components(upper)
    assert len(parts) == 2
    assert volume(parts[0]) + volume(parts[1]) == pytest.approx(volume(upper))


def test_connected_components_assigns_cavity():
    parts = connected_components(fx.hollow_box())
    assert len(parts) == 1
    assert volume(parts[0]) == pytest.approx(784.0)


def test_components_partition_faces(lprism):
    n = np.array([1.0, 0.0, 1.0]) / math.sqrt(2.0)
    upper, _ = clip(lprism, Plane(n * 20.0, n))
    parts = connected_components(upper)
    assert sum(len(p.triangles) for p in parts) == len(upper.triangles)
    assert sum(volume(p) for p in parts) == pytest.approx(volume(upper))


def test_cell_contains_vacuous():
    assert cell_contains(HalfSpaceCell(), (1e9, -1e9, 0.0), eps=0.0)


def test_cell_contains_slack(platform):
    cell = HalfSpaceCell(((platform, "above"),))
    assert cell_contains(cell, (0.0, 0.0, -1e-6), eps=1e-3)
    assert not cell_contains(cell, (0.0, 0.0, -1.0), eps=1e-3)


def test_cell_contains_band(platform):
    top = Plane((0.0, 0.0, 1.0), (0.0, 0.0, 1.0))
    cell = HalfSpaceCell(((platform, "above"), (top, "below")))
    assert cell_contains(cell, (0.0, 0.0, 0.5), eps=1e-3)
    assert not cell_contains(cell, (0.0, 0.0, 2.0), eps=1e-3)


def test_aabb_invariant():
    with pytest.raises(ValueError):
        Aabb((1.0, 0.0, 0.0), (0.0, 1.0, 1.0))
    box = Aabb((0.0, 0.0, 0.0), (2.0, 3.0, 6.0))
    assert box.diagonal == pytest.approx(7.0)


def test_plane_normalisation_required():
    with pytest.raises(ValueError):
        Plane((0.0, 0.0, 0.0), (0.0, 0.0, 2.0))


def test_plane_signed_distance_sign():
    p = Plane((0.0, 0.0, 1.0), (0.0, 0.0, 1.0))
    assert p.signed_distance(np.array([0.0, 0.0, 3.0])) == pytest.approx(2.0)
    assert p.signed_distance(np.array([[0.0, 0.0, 0.0]]))[0] == pytest.approx(-1.0)
