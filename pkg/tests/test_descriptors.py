import numpy as np
import pytest

from meshmark import synthetic
from meshmark.registration.descriptors import descriptor_distances, laplace_eigenpairs, wks


def test_values_nonnegative_and_column_normalized(hemisphere):
    desc = wks(hemisphere, n_eigs=40, n_energies=30)
    assert (desc.values >= 0).all()
    np.testing.assert_allclose(desc.values.sum(axis=0), 1.0, rtol=1e-12)
    assert desc.values.shape == (hemisphere.n_vertices, 30)


def test_rigid_motion_invariance(hemisphere):
    moved = synthetic.rigid_motion(hemisphere)
    a = wks(hemisphere, n_eigs=40, n_energies=30)
    b = wks(moved, n_eigs=40, n_energies=30)
    assert np.abs(a.values - b.values).max() < 1e-8


def test_self_isometry_antipodes(icosphere2):
    # the subdivided icosahedron is centrally symmetric: vertex -v
    # exists for every v and the antipodal map is a mesh self-isometry
    desc = wks(icosphere2, n_eigs=60, n_energies=40)
    v = icosphere2.vertices
    from scipy.spatial import cKDTree

    tree = cKDTree(v)
    d, anti = tree.query(-v)
    assert d.max() < 1e-12
    assert np.abs(desc.values - desc.values[anti]).max() <= 1e-6


def test_planted_nearest_neighbor_recovery(molar_pair):
    from meshmark import GPLandmarker

    m1, m2, _, _ = molar_pair
    u1 = m1.normalized_to_unit_area()
    u2 = m2.normalized_to_unit_area()
    ids = GPLandmarker(n_landmarks=40).fit_landmarks(u1).indices
    d1 = wks(u1)
    d2 = wks(u2)
    dist = descriptor_distances(d1, d2, ids, ids)
    recovered = np.mean(np.argmin(dist, axis=1) == np.arange(len(ids)))
    assert recovered >= 0.70


def test_eigenpairs_sorted_and_mass_orthonormal(hemisphere):
    vals, vecs = laplace_eigenpairs(hemisphere, 20)
    assert (np.diff(vals) >= -1e-10).all()
    assert vals[0] > 1e-8  # constant mode removed
    from meshmark.geometry import stiffness_and_mass

    _, M = stiffness_and_mass(hemisphere)
    gram = vecs.T @ (M @ vecs)
    np.testing.assert_allclose(gram, np.eye(vecs.shape[1]), atol=1e-8)


def test_n_eigs_clamped():
    mesh = synthetic.hemisphere(4)
    desc = wks(mesh, n_eigs=10**6, n_energies=10)
    assert desc.n_eigs <= mesh.n_vertices // 2


def test_descriptor_distance_zero_on_self(hemisphere):
    desc = wks(hemisphere, n_eigs=30, n_energies=20)
    idx = np.array([0, 5, 11])
    dist = descriptor_distances(desc, desc, idx, idx)
    np.testing.assert_allclose(np.diag(dist), 0.0, atol=1e-14)
    assert (dist >= 0).all()
