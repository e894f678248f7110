import numpy as np
import pytest

from greenhybrid.geometry import (
    MeshError, TriangleMesh, generate_sphere, load_off, validate, write_off,
)

TETRA_OFF = """OFF
4 4 6
0 0 0
1 0 0
0 1 0
0 0 1
3 0 2 1
3 0 1 3
3 1 2 3
3 0 3 2
"""

OCTA_OFF = """OFF
6 8 12
1 0 0
-1 0 0
0 1 0
0 -1 0
0 0 1
0 0 -1
3 0 2 4
3 2 1 4
3 1 3 4
3 3 0 4
3 2 0 5
3 1 2 5
3 3 1 5
3 0 3 5
"""


def test_load_tetrahedron():
    mesh = load_off(TETRA_OFF)
    assert mesh.n_triangles == 4
    assert validate(mesh).closed


def test_quad_face_rejected():
    bad = TETRA_OFF.replace("3 0 2 1", "4 0 2 1 3")
    with pytest.raises(MeshError, match="non-triangular face"):
        load_off(bad)


def test_parse_error_carries_line_number():
    bad = TETRA_OFF.replace("1 0 0", "1 0")
    with pytest.raises(MeshError, match="line 4"):
        load_off(bad)


def test_octahedron_area():
    mesh = load_off(OCTA_OFF)
    # 8 equilateral triangles of side sqrt(2), each sqrt(3)/2
    assert mesh.areas.sum() == pytest.approx(4 * np.sqrt(3), rel=1e-14)


def test_open_surface_rejected():
    lines = TETRA_OFF.strip().splitlines()
    lines[1] = "4 3 6"
    with pytest.raises(MeshError, match="open surface"):
        load_off("\n".join(lines[:-1]))


def test_inconsistent_orientation_rejected():
    bad = TETRA_OFF.replace("3 1 2 3", "3 1 3 2")
    with pytest.raises(MeshError, match="orientation"):
        load_off(bad)


@pytest.mark.parametrize("level,count", [(0, 8), (4, 2048), (5, 8192), (6, 32768)])
def test_sphere_counts(level, count, sphere):
    assert sphere(level).n_triangles == count
    assert sphere(level).n_triangles == 8 * 4**level


def test_sphere_vertices_on_unit_sphere(sphere):
    for level in (0, 2, 3):
        norms = np.linalg.norm(sphere(level).vertices, axis=1)
        assert np.abs(norms - 1.0).max() <= 1e-14


def test_sphere_area_close_to_4pi(sphere):
    area = sphere(3).areas.sum()
    assert abs(area - 4 * np.pi) / (4 * np.pi) <= 0.02


def test_sphere_volume_monotone(sphere):
    vols = [sphere(level).signed_volume() for level in range(5)]
    target = 4 * np.pi / 3
    assert all(b > a for a, b in zip(vols, vols[1:]))
    assert all(v < target for v in vols)
    assert vols[-1] == pytest.approx(target, rel=1e-2)


def test_sphere_level_guard():
    with pytest.raises(ValueError):
        generate_sphere(9)


def test_validate_sphere(sphere):
    report = validate(sphere(2))
    assert report.ok
    assert report.closed and report.oriented and report.outward
    assert not report.problems


def test_validate_flipped_triangle(sphere):
    mesh = sphere(1)
    tris = mesh.triangles.copy()
    tris[5] = tris[5][[0, 2, 1]]
    bad = TriangleMesh(mesh.vertices, tris)
    report = validate(bad)
    assert not report.oriented
    assert any("same direction" in p for p in report.problems)


def test_tetrahedron_outwardness():
    report = validate(load_off(TETRA_OFF))
    assert report.outward


def test_degenerate_triangle_rejected():
    with pytest.raises(MeshError, match="degenerate"):
        TriangleMesh(np.array([[0.0, 0, 0], [1, 0, 0], [2, 0, 0]]),
                     np.array([[0, 1, 2]]))


def test_write_off_roundtrip(sphere):
    text = write_off(sphere(1))
    again = load_off(text)
    assert np.array_equal(again.triangles, sphere(1).triangles)
    assert np.array_equal(again.vertices, sphere(1).vertices)
    assert write_off(again) == text
