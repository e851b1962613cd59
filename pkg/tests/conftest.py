import numpy as np
import pytest

from meshmark import synthetic


@pytest.fixture(scope="session")
def icosahedron():
    return synthetic.icosahedron()


@pytest.fixture(scope="session")
def icosphere2():
    return synthetic.icosphere(2)


@pytest.fixture(scope="session")
def icosphere3():
    return synthetic.icosphere(3)


@pytest.fixture(scope="session")
def grid():
    return synthetic.grid_patch(8, 8)


@pytest.fixture(scope="session")
def hemisphere():
    return synthetic.hemisphere(10)


@pytest.fixture(scope="session")
def molar_pair():
    """Same connectivity, smoothly perturbed geometry: planted vertex
    correspondence is the identity."""
    m1, cusps1 = synthetic.molar_like(n_rings=12, seed=0)
    m2, cusps2 = synthetic.molar_like(n_rings=12, seed=1, cusp_height=0.44, noise=0.005)
    return m1, m2, cusps1, cusps2


def random_psd(n, seed, jitter=0.0):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n))
    k = a @ a.T
    if jitter:
        k = k + jitter * np.eye(n)
    return k


def interior_mask(mesh):
    mask = np.ones(mesh.n_vertices, dtype=bool)
    if len(mesh.boundary_edges):
        mask[np.unique(mesh.boundary_edges.ravel())] = False
    return mask
