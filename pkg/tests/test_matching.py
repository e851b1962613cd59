import numpy as np
import pytest

from meshmark import synthetic
from meshmark.errors import NoConsensusError
from meshmark.landmarks import LandmarkSet
from meshmark.registration.descriptors import wks
from meshmark.registration.matching import (
    CandidateMatches,
    bd_filter,
    candidate_matches,
    conformal_distortion,
    fit_similarity,
)
from meshmark.registration.parametrize import PlanarParam, aiap_parametrize


def flat_param(points2d, faces, boundary=None):
    uv = np.asarray(points2d, dtype=float)
    return PlanarParam(
        uv, np.asarray(faces), np.asarray(boundary if boundary is not None else [0]), 0.0
    )


def make_candidates(n, target_of, uv1, uv2):
    """Candidate structure mapping source ordinal l to target ordinal target_of[l]."""
    cands = np.asarray(target_of, dtype=np.int64)[:, None]
    return CandidateMatches(
        candidates=cands,
        distances=np.zeros_like(cands, dtype=float),
        source_vertices=np.arange(n, dtype=np.int64),
        target_vertices=np.arange(len(uv2), dtype=np.int64),
    )


@pytest.fixture(scope="module")
def planted_setup():
    """Flat disk landmarks moved by an exact planar rigid motion."""
    disk = synthetic.disk_mesh(5)
    rng = np.random.default_rng(0)
    n = 20
    ids = rng.choice(disk.n_vertices, size=n, replace=False)
    z1 = disk.vertices[ids][:, :2]
    theta = 0.6
    rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    z2 = z1 @ rot.T + np.array([0.4, -0.9])
    uv1 = disk.vertices[:, :2]
    uv2 = uv1 @ rot.T + np.array([0.4, -0.9])
    p1 = flat_param(uv1, disk.triangles)
    p2 = flat_param(uv2, disk.triangles)
    # landmark ordinal l lives at vertex ids[l] on both sides
    cands = CandidateMatches(
        candidates=np.arange(n, dtype=np.int64)[:, None],
        distances=np.zeros((n, 1)),
        source_vertices=ids.astype(np.int64),
        target_vertices=ids.astype(np.int64),
    )
    return cands, p1, p2, n


def test_exact_rigid_all_retained_at_bound_one(planted_setup):
    cands, p1, p2, n = planted_setup
    corr = bd_filter(cands, p1, p2, distortion_bound=1.0)
    assert len(corr) == n
    assert (corr.residuals < 1e-9).all()
    np.testing.assert_array_equal(corr.pairs[:, 0], corr.pairs[:, 1])


def test_planted_outlier_dropped(planted_setup):
    cands, p1, p2, n = planted_setup
    bad = 7
    tv = cands.target_vertices.copy()
    # send source ordinal 7 to a far-off wrong landmark position
    uv2 = p2.uv.copy()
    far = np.argmax(np.linalg.norm(uv2 - uv2[tv[bad]], axis=1))
    candidates = cands.candidates.copy()
    # give ordinal 7 a candidate pointing at the far vertex
    tv2 = np.append(tv, far)
    candidates[bad, 0] = n  # new last slot
    cands_out = CandidateMatches(candidates, cands.distances, cands.source_vertices, tv2.astype(np.int64))
    corr = bd_filter(cands_out, p1, p2, distortion_bound=1.0)
    assert len(corr) == n - 1
    retained_sources = set(corr.source_ordinals.tolist())
    assert bad not in retained_sources


def test_retained_count_monotone_in_bound(molar_pair):
    from meshmark.registration.pipeline import RegistrationParams, prepare_surface

    m1, m2, _, _ = molar_pair
    params = RegistrationParams()
    p1 = prepare_surface(m1, params)
    p2 = prepare_surface(m2, params)
    cands = candidate_matches(p1.landmarks, p2.landmarks, p1.descriptor, p2.descriptor, 2)
    counts = [
        len(bd_filter(cands, p1.param, p2.param, kb, seed=0)) for kb in (1.0, 1.5, 2.0)
    ]
    assert counts[0] <= counts[1] <= counts[2]
    assert counts[0] >= 4


def test_one_to_one_output(molar_pair):
    from meshmark.registration.pipeline import RegistrationParams, prepare_surface

    m1, m2, _, _ = molar_pair
    params = RegistrationParams()
    p1 = prepare_surface(m1, params)
    p2 = prepare_surface(m2, params)
    cands = candidate_matches(p1.landmarks, p2.landmarks, p1.descriptor, p2.descriptor, 2)
    corr = bd_filter(cands, p1.param, p2.param, 1.5)
    assert len(np.unique(corr.pairs[:, 0])) == len(corr)
    assert len(np.unique(corr.pairs[:, 1])) == len(corr)
    assert len(corr) <= min(len(p1.landmarks), len(p2.landmarks))


def test_no_consensus_raises():
    rng = np.random.default_rng(3)
    n = 12
    uv1 = rng.normal(size=(n, 2))
    uv2 = rng.normal(size=(n, 2))  # unrelated scatter: no similarity fits
    p1 = flat_param(uv1, [[0, 1, 2]])
    p2 = flat_param(uv2, [[0, 1, 2]])
    cands = make_candidates(n, np.arange(n), uv1, uv2)
    with pytest.raises(NoConsensusError):
        bd_filter(cands, p1, p2, 1.0)


def test_candidates_exhaustive_when_T_is_all(molar_pair):
    m1, _, _, _ = molar_pair
    from meshmark import GPLandmarker

    u1 = m1.normalized_to_unit_area()
    lms = GPLandmarker(n_landmarks=10).fit_landmarks(u1)
    desc = wks(u1, n_eigs=40, n_energies=30)
    cands = candidate_matches(lms, lms, desc, desc, n_candidates=10)
    assert cands.candidates.shape == (10, 10)
    for row in cands.candidates:
        assert sorted(row.tolist()) == list(range(10))


def test_candidates_self_match_first(molar_pair):
    m1, _, _, _ = molar_pair
    from meshmark import GPLandmarker

    u1 = m1.normalized_to_unit_area()
    lms = GPLandmarker(n_landmarks=15).fit_landmarks(u1)
    desc = wks(u1, n_eigs=40, n_energies=30)
    cands = candidate_matches(lms, lms, desc, desc, n_candidates=1)
    np.testing.assert_array_equal(cands.candidates[:, 0], np.arange(15))


def test_candidates_within_two_planted(molar_pair):
    from meshmark import GPLandmarker

    m1, m2, _, _ = molar_pair
    u1 = m1.normalized_to_unit_area()
    u2 = m2.normalized_to_unit_area()
    ids = GPLandmarker(n_landmarks=40).fit_landmarks(u1).indices
    planted = LandmarkSet(ids, np.zeros(len(ids)), "GP")
    cands = candidate_matches(planted, planted, wks(u1), wks(u2), n_candidates=2)
    hits = np.mean([i in row for i, row in enumerate(cands.candidates)])
    assert hits >= 0.80


def test_fit_similarity_recovers_exact():
    rng = np.random.default_rng(1)
    z = rng.normal(size=8) + 1j * rng.normal(size=8)
    a_true = 1.3 * np.exp(1j * 0.4)
    b_true = 0.2 - 0.7j
    a, b = fit_similarity(z, a_true * z + b_true)
    assert abs(a - a_true) < 1e-12
    assert abs(b - b_true) < 1e-12


def test_conformal_distortion_values():
    tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    # similarity: distortion exactly 1
    rot = np.array([[0.0, -1.0], [1.0, 0.0]]) * 2.0
    assert conformal_distortion(tri, tri @ rot.T) == pytest.approx(1.0, abs=1e-12)
    # anisotropic stretch by 3: distortion 3
    stretch = np.diag([3.0, 1.0])
    assert conformal_distortion(tri, tri @ stretch.T) == pytest.approx(3.0, rel=1e-12)
    # reflection: infinite
    refl = np.diag([-1.0, 1.0])
    assert conformal_distortion(tri, tri @ refl.T) == np.inf
