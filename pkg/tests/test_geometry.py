import heapq

import numpy as np
import pytest

from meshmark import (
    TriMesh,
    cotan_laplacian,
    gaussian_curvature,
    geodesic_distances,
    mean_curvature,
    synthetic,
    voronoi_areas,
)
from meshmark.errors import DisconnectedMeshError
from meshmark.geometry import stiffness_and_mass

from conftest import interior_mask


# ---------------------------------------------------------------- areas


def test_tetrahedron_areas_by_symmetry():
    tet = synthetic.tetrahedron(edge=1.0)
    nu = np.asarray(voronoi_areas(tet))
    total = tet.total_area()
    np.testing.assert_allclose(nu, total / 4.0, rtol=1e-12)
    assert total == pytest.approx(np.sqrt(3.0), rel=1e-12)


@pytest.mark.parametrize("maker", [lambda: synthetic.icosphere(2), lambda: synthetic.hemisphere(8), lambda: synthetic.molar_like(n_rings=8)[0]])
def test_areas_partition_surface(maker):
    mesh = maker()
    nu = np.asarray(voronoi_areas(mesh))
    assert nu.min() > 0
    assert np.isclose(nu.sum(), mesh.total_area(), rtol=1e-10)


def test_obtuse_triangle_mixed_areas_hand_computed():
    # obtuse at C; the mixed-area rule assigns area/2 to the obtuse
    # corner and area/4 to the other two. Area = 0.5 * 1 * 0.2 = 0.1.
    v = [[0, 0, 0], [1, 0, 0], [0.5, 0.2, 0]]
    mesh = TriMesh(v, [[0, 1, 2]])
    nu = np.asarray(voronoi_areas(mesh))
    np.testing.assert_allclose(nu, [0.025, 0.025, 0.05], rtol=1e-12)


def test_right_triangle_mixed_areas_hand_computed():
    # right angle at A (not obtuse): circumcentric rule. With unit legs,
    # nu = (1/4, 1/8, 1/8) from 1/8 * (len^2 * cot(opposite)) sums.
    v = [[0, 0, 0], [1, 0, 0], [0, 1, 0]]
    mesh = TriMesh(v, [[0, 1, 2]])
    nu = np.asarray(voronoi_areas(mesh))
    np.testing.assert_allclose(nu, [0.25, 0.125, 0.125], rtol=1e-12)


def test_equilateral_triangle_areas_by_symmetry():
    v = [[0, 0, 0], [1, 0, 0], [0.5, np.sqrt(3) / 2, 0]]
    mesh = TriMesh(v, [[0, 1, 2]])
    nu = np.asarray(voronoi_areas(mesh))
    np.testing.assert_allclose(nu, mesh.total_area() / 3.0, rtol=1e-12)


# ---------------------------------------------------------------- curvature


def test_flat_grid_interior_curvatures_zero(grid):
    kappa = np.asarray(gaussian_curvature(grid))
    eta = np.asarray(mean_curvature(grid))
    mask = interior_mask(grid)
    np.testing.assert_allclose(kappa[mask], 0.0, atol=1e-12)
    np.testing.assert_allclose(eta[mask], 0.0, atol=1e-10)


def test_gauss_bonnet_closed(icosahedron, icosphere3):
    for mesh in (icosahedron, icosphere3):
        nu = voronoi_areas(mesh)
        kappa = gaussian_curvature(mesh, nu)
        total = float(np.asarray(kappa) @ np.asarray(nu))
        chi = mesh.euler_characteristic()
        assert total == pytest.approx(2.0 * np.pi * chi, rel=1e-8)


def test_sphere_gaussian_curvature_converges(icosphere3):
    kappa = np.asarray(gaussian_curvature(icosphere3))
    np.testing.assert_allclose(kappa, 1.0, rtol=0.05)


def test_sphere_mean_curvature_converges(icosphere3):
    eta = np.asarray(mean_curvature(icosphere3))
    np.testing.assert_allclose(np.abs(eta), 1.0, rtol=0.05)
    # outward-normal sign convention: positive on a sphere
    assert (eta > 0).all()


def test_cylinder_mean_curvature():
    r = 0.8
    cyl = synthetic.open_cylinder(radius=r, n_around=32, n_along=10)
    eta = np.asarray(mean_curvature(cyl))
    mask = interior_mask(cyl)
    np.testing.assert_allclose(np.abs(eta[mask]), 1.0 / (2.0 * r), rtol=0.10)


def test_curvature_scaling():
    # kappa scales as 1/s^2, eta as 1/s
    base = synthetic.icosphere(2)
    scaled = base.scaled(2.0)
    np.testing.assert_allclose(
        np.asarray(gaussian_curvature(scaled)) * 4.0,
        np.asarray(gaussian_curvature(base)),
        rtol=1e-9,
    )
    np.testing.assert_allclose(
        np.asarray(mean_curvature(scaled)) * 2.0,
        np.asarray(mean_curvature(base)),
        rtol=1e-9,
    )


# ---------------------------------------------------------------- laplacian


def test_laplacian_constant_in_kernel(icosphere2):
    L = cotan_laplacian(icosphere2)
    u = np.ones(icosphere2.n_vertices)
    np.testing.assert_allclose(L @ u, 0.0, atol=1e-12)
    asym = np.abs((L - L.T).toarray()).max()
    assert asym < 1e-14


def test_laplacian_single_equilateral_triangle():
    v = [[0, 0, 0], [1, 0, 0], [0.5, np.sqrt(3) / 2, 0]]
    mesh = TriMesh(v, [[0, 1, 2]])
    L = cotan_laplacian(mesh).toarray()
    expected = 0.5 / np.sqrt(3.0)  # cot(60 deg) / 2, one face per edge
    for i in range(3):
        for j in range(3):
            if i != j:
                assert L[i, j] == pytest.approx(expected, rel=1e-12)
    np.testing.assert_allclose(L.sum(axis=1), 0.0, atol=1e-15)


def test_laplacian_two_triangle_square_hand_computed():
    # unit square split along the diagonal (0, 2): the diagonal's
    # opposite angles are right angles (cot = 0), the boundary edges see
    # one 45-degree angle each (cot = 1, halved).
    v = [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]]
    mesh = TriMesh(v, [[0, 1, 2], [0, 2, 3]])
    L = cotan_laplacian(mesh).toarray()
    assert L[0, 1] == pytest.approx(0.5, rel=1e-12)
    assert L[1, 2] == pytest.approx(0.5, rel=1e-12)
    assert L[2, 3] == pytest.approx(0.5, rel=1e-12)
    assert L[0, 3] == pytest.approx(0.5, rel=1e-12)
    assert L[0, 2] == pytest.approx(0.0, abs=1e-15)
    assert L[1, 3] == 0.0  # not an edge


def test_stiffness_psd(hemisphere):
    S, M = stiffness_and_mass(hemisphere)
    rng = np.random.default_rng(0)
    for _ in range(5):
        u = rng.normal(size=hemisphere.n_vertices)
        assert u @ (S @ u) >= -1e-10
    assert (M.diagonal() > 0).all()


# ---------------------------------------------------------------- geodesics


def reference_dijkstra(mesh, source):
    """Independent pure-python Dijkstra over the edge graph."""
    adj = {i: [] for i in range(mesh.n_vertices)}
    for a, b in mesh.edges:
        d = float(np.linalg.norm(mesh.vertices[a] - mesh.vertices[b]))
        adj[int(a)].append((int(b), d))
        adj[int(b)].append((int(a), d))
    dist = [np.inf] * mesh.n_vertices
    dist[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for v, w in adj[u]:
            if d + w < dist[v]:
                dist[v] = d + w
                heapq.heappush(heap, (d + w, v))
    return np.asarray(dist)


def test_geodesics_all_sources_zero(icosahedron):
    d = geodesic_distances(icosahedron, np.arange(icosahedron.n_vertices))
    np.testing.assert_array_equal(d, 0.0)


def test_geodesics_monotone_along_strip():
    mesh = synthetic.strip(12)
    d = geodesic_distances(mesh, [0])
    # distance grows with x along the bottom row of the strip
    bottom = d[:13]
    assert (np.diff(bottom) > 0).all()


def test_geodesics_match_reference_dijkstra(icosahedron):
    got = geodesic_distances(icosahedron, [0])
    want = reference_dijkstra(icosahedron, 0)
    np.testing.assert_allclose(got, want, rtol=1e-12)


def test_geodesics_metric_properties(icosphere2):
    rng = np.random.default_rng(1)
    n = icosphere2.n_vertices
    verts = rng.choice(n, size=6, replace=False)
    fields = {int(v): geodesic_distances(icosphere2, [int(v)]) for v in verts}
    for a in verts:
        for b in verts:
            # symmetry
            assert fields[int(a)][b] == pytest.approx(fields[int(b)][a], rel=1e-10)
            for c in verts:
                # triangle inequality
                assert fields[int(a)][b] <= fields[int(a)][c] + fields[int(c)][b] + 1e-12


def test_geodesics_subdivided_not_longer(icosphere2):
    d0 = geodesic_distances(icosphere2, [0])
    d1 = geodesic_distances(icosphere2, [0], subdivide=True)
    assert (d1 <= d0 + 1e-12).all()


def test_geodesics_disconnected_raises():
    v = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [10, 0, 0], [11, 0, 0], [10, 1, 0]]
    mesh = TriMesh(v, [[0, 1, 2], [3, 4, 5]], validate=False)
    with pytest.raises(DisconnectedMeshError):
        geodesic_distances(mesh, [0])
