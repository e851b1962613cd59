import numpy as np
import pytest

from meshmark import synthetic
from meshmark.errors import NotDiskTypeError
from meshmark.registration.parametrize import SymmetricDistortion, rest_frames_from_mesh
from meshmark.registration.pipeline import (
    PairRegistration,
    RegistrationError,
    RegistrationParams,
    prepare_surface,
    register_pair,
    register_prepared,
)


@pytest.fixture(scope="module")
def molar_preps(molar_pair):
    params = RegistrationParams()
    m1, m2, _, _ = molar_pair
    return prepare_surface(m1, params), prepare_surface(m2, params), params


def test_self_registration_identity(molar_preps):
    p1, _, params = molar_preps
    result = register_prepared(p1, p1, params)
    assert result.distance <= 1e-6
    assert len(result.correspondences) == len(p1.landmarks)


def test_rigid_invariance(molar_pair):
    m1, _, _, _ = molar_pair
    moved = synthetic.rigid_motion(m1)
    result = register_pair(m1, moved)
    assert result.distance <= 1e-6


def test_perturbed_pair_keeps_enough_matches(molar_preps):
    p1, p2, params = molar_preps
    result = register_prepared(p1, p2, params)
    assert len(result.correspondences) >= 25
    assert result.distance < 0.1
    # parametrizations flip-free (invariant checked on mesh1's domain)
    rest, areas = rest_frames_from_mesh(p1.mesh)
    problem = SymmetricDistortion(rest, p1.mesh.triangles, areas)
    assert (problem.dets(p1.param.uv) > 0).all()


def test_direction_asymmetry_is_small(molar_preps):
    p1, p2, params = molar_preps
    d12 = register_prepared(p1, p2, params).distance
    d21 = register_prepared(p2, p1, params).distance
    assert d12 > 0 and d21 > 0
    assert abs(d12 - d21) < 0.5 * max(d12, d21)


def test_closed_mesh_fails_with_stage_label(icosphere2):
    with pytest.raises(RegistrationError) as err:
        register_pair(icosphere2, icosphere2)
    assert err.value.stage == "parametrize"
    assert isinstance(err.value.__cause__, NotDiskTypeError)


def test_deterministic_pipeline(molar_preps):
    p1, p2, params = molar_preps
    a = register_prepared(p1, p2, params)
    b = register_prepared(p1, p2, params)
    np.testing.assert_array_equal(a.correspondences.pairs, b.correspondences.pairs)
    assert a.distance == b.distance


def test_estimator_wrapper(molar_pair):
    m1, m2, _, _ = molar_pair
    reg = PairRegistration(n_landmarks=30)
    reg.fit(m1, m2)
    assert reg.distance_ > 0
    assert len(reg.correspondences_) >= 4
    assert reg.get_params()["distortion_bound"] == 1.5
    summary = reg.result_.summary()
    assert set(summary) >= {"n_matches", "procrustes_distance", "map_energy"}


def test_summary_fields(molar_preps):
    p1, p2, params = molar_preps
    s = register_prepared(p1, p2, params).summary()
    assert s["n_matches"] <= params.n_landmarks
    assert s["distortion_bound"] == params.distortion_bound
    assert s["procrustes_distance"] >= 0
