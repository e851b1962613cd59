import numpy as np
import pytest

from meshmark import TriMesh, load_mesh, save_off, snap_points_to_vertices, synthetic
from meshmark.errors import (
    DegenerateTriangleError,
    NotDiskTypeError,
    ParseError,
    TopologyError,
)

SINGLE_TRIANGLE_OFF = """OFF
3 1 3
0 0 0
1 0 0
0 1 0
3 0 1 2
"""

ICOSA_OFF_HEADER = "OFF\n{nv} {nf} 0\n"


def icosa_off_text():
    ico = synthetic.icosahedron()
    lines = [ICOSA_OFF_HEADER.format(nv=12, nf=20)]
    for v in ico.vertices:
        lines.append(" ".join(repr(float(c)) for c in v) + "\n")
    for f in ico.triangles:
        lines.append("3 " + " ".join(str(i) for i in f) + "\n")
    return "".join(lines)


def test_load_single_triangle_off(tmp_path):
    path = tmp_path / "tri.off"
    path.write_text(SINGLE_TRIANGLE_OFF)
    mesh = load_mesh(path)
    assert mesh.n_vertices == 3
    assert mesh.n_triangles == 1


def test_load_icosahedron_off(tmp_path):
    path = tmp_path / "ico.off"
    path.write_text(icosa_off_text())
    mesh = load_mesh(path)
    assert mesh.n_vertices == 12
    assert mesh.n_triangles == 20
    assert mesh.is_closed()
    assert mesh.euler_characteristic() == 2


def test_off_out_of_range_index(tmp_path):
    text = SINGLE_TRIANGLE_OFF.replace("3 0 1 2", "3 0 1 99")
    path = tmp_path / "bad.off"
    path.write_text(text)
    with pytest.raises(ParseError):
        load_mesh(path)


def test_off_truncated(tmp_path):
    path = tmp_path / "trunc.off"
    path.write_text("OFF\n3 1 0\n0 0 0\n1 0 0\n")
    with pytest.raises(ParseError):
        load_mesh(path)


def test_off_roundtrip_preserves_vertex_order(tmp_path):
    mesh = synthetic.icosphere(1)
    path = tmp_path / "sphere.off"
    save_off(path, mesh)
    back = load_mesh(path)
    np.testing.assert_array_equal(back.triangles, mesh.triangles)
    np.testing.assert_allclose(back.vertices, mesh.vertices, rtol=0, atol=0)


def test_load_ply_ascii(tmp_path):
    text = (
        "ply\nformat ascii 1.0\ncomment test\n"
        "element vertex 3\n"
        "property float x\nproperty float y\nproperty float z\n"
        "element face 1\nproperty list uchar int vertex_indices\n"
        "end_header\n"
        "0 0 0\n1 0 0\n0 1 0\n"
        "3 0 1 2\n"
    )
    path = tmp_path / "tri.ply"
    path.write_text(text)
    mesh = load_mesh(path)
    assert mesh.n_vertices == 3 and mesh.n_triangles == 1


def test_ply_binary_rejected(tmp_path):
    path = tmp_path / "bin.ply"
    path.write_text("ply\nformat binary_little_endian 1.0\nend_header\n")
    with pytest.raises(ParseError):
        load_mesh(path)


def test_load_obj(tmp_path):
    text = "# comment\nv 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n"
    path = tmp_path / "tri.obj"
    path.write_text(text)
    mesh = load_mesh(path)
    assert mesh.n_vertices == 3 and mesh.n_triangles == 1


def test_obj_face_with_slashes_and_negative_indices(tmp_path):
    text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1 2/2 -1\n"
    path = tmp_path / "tri.obj"
    path.write_text(text)
    mesh = load_mesh(path)
    np.testing.assert_array_equal(mesh.triangles, [[0, 1, 2]])


def test_nonmanifold_edge_rejected():
    v = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [0, -0.5, 1]]
    f = [[0, 1, 2], [0, 3, 1], [0, 1, 4]]  # edge (0,1) in three faces
    with pytest.raises(TopologyError):
        TriMesh(v, f)


def test_inconsistent_orientation_rejected():
    v = [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]]
    f = [[0, 1, 2], [0, 2, 3]]
    TriMesh(v, f)  # consistent: fine
    with pytest.raises(TopologyError):
        TriMesh(v, [[0, 1, 2], [0, 3, 2]])


def test_isolated_vertex_rejected():
    v = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [5, 5, 5]]
    with pytest.raises(TopologyError):
        TriMesh(v, [[0, 1, 2]])


def test_degenerate_triangle_rejected():
    v = [[0, 0, 0], [1, 0, 0], [2, 0, 0]]
    with pytest.raises(DegenerateTriangleError):
        TriMesh(v, [[0, 1, 2]])


def test_disconnected_rejected():
    v = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [10, 0, 0], [11, 0, 0], [10, 1, 0]]
    with pytest.raises(TopologyError):
        TriMesh(v, [[0, 1, 2], [3, 4, 5]])


def test_disk_detection(hemisphere, icosphere2):
    assert hemisphere.is_disk()
    assert not icosphere2.is_disk()
    with pytest.raises(NotDiskTypeError):
        icosphere2.require_disk()
    cyl = synthetic.open_cylinder()
    assert not cyl.is_disk()  # two boundary loops
    assert len(cyl.boundary_loops()) == 2


def test_boundary_loop_of_disk(hemisphere):
    (loop,) = hemisphere.boundary_loops()
    assert len(loop) == len(np.unique(loop))
    assert len(loop) == len(hemisphere.boundary_edges)


def test_unit_area_normalization(icosphere2):
    unit = icosphere2.normalized_to_unit_area()
    assert unit.total_area() == pytest.approx(1.0, rel=1e-12)


def test_subdivision_counts(icosahedron):
    sub = icosahedron.subdivided_midpoint()
    assert sub.n_vertices == 12 + len(icosahedron.edges)
    assert sub.n_triangles == 4 * icosahedron.n_triangles
    assert sub.total_area() == pytest.approx(icosahedron.total_area(), rel=1e-12)


def test_snap_points(icosahedron):
    pts = icosahedron.vertices[[3, 7]] + 1e-3
    idx, dist = snap_points_to_vertices(icosahedron, pts)
    np.testing.assert_array_equal(idx, [3, 7])
    assert np.all(dist < 2e-3)


def test_deterministic_load(tmp_path):
    path = tmp_path / "ico.off"
    path.write_text(icosa_off_text())
    a = load_mesh(path)
    b = load_mesh(path)
    assert a.vertices.tobytes() == b.vertices.tobytes()
    assert a.triangles.tobytes() == b.triangles.tobytes()
