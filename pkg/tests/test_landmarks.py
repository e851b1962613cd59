import numpy as np
import pytest

from meshmark import (
    GFPSSampler,
    GPLandmarker,
    RandomLandmarker,
    gfps_landmarks,
    gp_landmarks,
    greedy_logdet_ratio,
    plain_kernel,
    random_landmarks,
    synthetic,
    uncertainty_field,
)
from meshmark.errors import ComplexityGuardError, RankExhaustionError, SingularSubmatrixError
from meshmark.landmarks import load_landmarks_csv, save_landmarks_csv

from conftest import random_psd
from test_geometry import reference_dijkstra


def dense_variance_oracle(K, chosen):
    """Conditional variance via explicit dense inversion (independent route)."""
    diag = np.diag(K).copy()
    if len(chosen) == 0:
        return diag
    idx = np.asarray(chosen)
    A = K[np.ix_(idx, idx)]
    C = K[idx, :]
    sigma = diag - np.einsum("kn,kn->n", C, np.linalg.inv(A) @ C)
    sigma[idx] = 0.0
    return sigma


def greedy_oracle(K, L):
    """Naive greedy: re-derive the score field by dense inversion each step."""
    chosen = []
    traces = []
    for _ in range(L):
        sigma = dense_variance_oracle(K, chosen)
        traces.append(np.maximum(sigma, 0.0))
        chosen.append(int(np.argmax(sigma)))
    return np.asarray(chosen), np.asarray(traces)


# ---------------------------------------------------------------- greedy


def test_first_pick_is_diagonal_argmax():
    K = np.diag([1.0, 3.0, 2.0])
    lms = gp_landmarks(K, 1)
    assert lms.indices.tolist() == [1]
    assert lms.scores[0] == 3.0


def test_full_rank_exhaustive_selection():
    K = random_psd(6, seed=2, jitter=1e-6)
    lms = gp_landmarks(K, 6)
    assert sorted(lms.indices.tolist()) == list(range(6))
    sigma = np.asarray(uncertainty_field(K, lms.indices))
    np.testing.assert_allclose(sigma, 0.0, atol=1e-6 * np.diag(K).max())


def test_greedy_matches_dense_inversion_oracle():
    K = random_psd(30, seed=5)
    lms = gp_landmarks(K, 5, keep_trace=True)
    want_idx, want_trace = greedy_oracle(K, 5)
    np.testing.assert_array_equal(lms.indices, want_idx)
    scale = np.abs(want_trace).max()
    assert np.abs(lms.trace - want_trace).max() <= 1e-8 * scale


def test_rank_exhaustion_raises_and_truncates():
    # rank-2 kernel cannot produce 4 landmarks
    a = np.random.default_rng(0).normal(size=(6, 2))
    K = a @ a.T
    with pytest.raises(RankExhaustionError):
        gp_landmarks(K, 4)
    lms = gp_landmarks(K, 4, on_exhaustion="truncate")
    assert lms.exhausted
    assert len(lms) == 2


def test_scores_positive_and_recorded():
    K = random_psd(25, seed=9)
    lms = gp_landmarks(K, 8)
    assert (lms.scores > 0).all()
    # score at step k equals the max of the step-k field
    lms_t = gp_landmarks(K, 8, keep_trace=True)
    np.testing.assert_allclose(lms_t.trace.max(axis=1), lms.scores, rtol=1e-12)


def test_permutation_equivariance():
    K = random_psd(20, seed=13)
    rng = np.random.default_rng(4)
    perm = rng.permutation(20)
    P = np.eye(20)[perm]
    Kp = P @ K @ P.T  # Kp[i, j] = K[perm[i], perm[j]]
    lms = gp_landmarks(K, 6).indices
    lms_p = gp_landmarks(Kp, 6).indices
    inverse = np.argsort(perm)
    np.testing.assert_array_equal(inverse[lms], lms_p)


def test_greedy_deterministic():
    K = random_psd(50, seed=21)
    a = gp_landmarks(K, 10)
    b = gp_landmarks(K, 10)
    assert a.indices.tobytes() == b.indices.tobytes()
    assert a.scores.tobytes() == b.scores.tobytes()


# ---------------------------------------------------------------- variance field


def test_uncertainty_no_landmarks_is_diagonal():
    K = random_psd(10, seed=1)
    sigma = np.asarray(uncertainty_field(K, []))
    np.testing.assert_allclose(sigma, np.diag(K), rtol=1e-15)


def test_uncertainty_zero_at_landmarks():
    K = random_psd(15, seed=2)
    sigma = np.asarray(uncertainty_field(K, [3, 7, 11]))
    assert sigma[3] == sigma[7] == sigma[11] == 0.0
    assert (sigma >= 0).all()


def test_uncertainty_single_landmark_scalar_formula():
    pts = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 2.0, 0.0]])
    K = np.asarray(plain_kernel(pts, 2.0))
    xi = 1
    sigma = np.asarray(uncertainty_field(K, [xi]))
    for i in range(3):
        expected = K[i, i] - K[i, xi] ** 2 / K[xi, xi]
        if i == xi:
            expected = 0.0
        assert sigma[i] == pytest.approx(expected, abs=1e-14)


def test_uncertainty_monotone_in_landmarks():
    K = random_psd(40, seed=3)
    lms = gp_landmarks(K, 12).indices
    prev = np.asarray(uncertainty_field(K, []))
    for k in range(1, 13):
        cur = np.asarray(uncertainty_field(K, lms[:k]))
        assert (cur <= prev + 1e-9).all()
        prev = cur


def test_uncertainty_singular_submatrix():
    K = np.ones((4, 4))  # rank one: two landmarks are linearly dependent
    with pytest.raises(SingularSubmatrixError):
        uncertainty_field(K, [0, 1])


# ---------------------------------------------------------------- gfps / random


def test_gfps_strip_endpoints():
    mesh = synthetic.strip(10)
    lms = gfps_landmarks(mesh, 2, seed_vertex=0)
    # farthest vertex from corner 0 is the opposite corner (top-right)
    assert lms.indices[1] == 2 * 11 - 1


def test_gfps_full_permutation(icosahedron):
    lms = gfps_landmarks(icosahedron, 12, seed_vertex=0)
    assert sorted(lms.indices.tolist()) == list(range(12))


def test_gfps_matches_naive_oracle(icosahedron):
    lms = gfps_landmarks(icosahedron, 4, seed_vertex=0)
    chosen = [0]
    for _ in range(3):
        dist = np.min([reference_dijkstra(icosahedron, s) for s in chosen], axis=0)
        chosen.append(int(np.argmax(dist)))
    np.testing.assert_array_equal(lms.indices, chosen)


def test_gfps_coverage_radius_nonincreasing(icosphere2):
    from meshmark import geodesic_distances

    lms = gfps_landmarks(icosphere2, 10, seed_vertex=0)
    radii = []
    for m in range(1, 11):
        d = geodesic_distances(icosphere2, lms.indices[:m])
        radii.append(d.max())
    assert all(b <= a + 1e-12 for a, b in zip(radii, radii[1:]))


def test_random_landmarks_reproducible(icosahedron):
    a = random_landmarks(icosahedron, 5, seed=7)
    b = random_landmarks(icosahedron, 5, seed=7)
    np.testing.assert_array_equal(a.indices, b.indices)
    assert len(np.unique(a.indices)) == 5


def test_random_landmarks_all(icosahedron):
    lms = random_landmarks(icosahedron, 12, seed=0)
    assert sorted(lms.indices.tolist()) == list(range(12))


def test_random_landmarks_uniform_frequency():
    counts = np.zeros(10)
    for trial in range(10000):
        lms = random_landmarks(10, 1, seed=trial)
        counts[lms.indices[0]] += 1
    freq = counts / 10000.0
    assert (freq >= 0.08).all() and (freq <= 0.12).all()


# ---------------------------------------------------------------- near-optimality


def test_logdet_ratio_diagonal_matrix():
    K = np.diag([5.0, 4.0, 3.0, 2.0, 1.0])
    assert greedy_logdet_ratio(K, 3) == pytest.approx(1.0, rel=1e-12)


def test_logdet_ratio_single():
    K = random_psd(12, seed=0)
    assert greedy_logdet_ratio(K, 1) == pytest.approx(1.0, rel=1e-12)


def test_logdet_ratio_near_optimal_random_fixture():
    K = random_psd(20, seed=31, jitter=1e-9)
    ratio = greedy_logdet_ratio(K, 3)
    assert ratio >= 1.0 - 1.0 / np.e - 1e-9
    assert ratio <= 1.0 + 1e-9


def test_logdet_ratio_complexity_guard():
    K = np.eye(300)
    with pytest.raises(ComplexityGuardError):
        greedy_logdet_ratio(K, 4, max_subsets=10**5)


# ---------------------------------------------------------------- estimators


def test_gp_landmarker_estimator(icosphere2):
    est = GPLandmarker(n_landmarks=6)
    est.fit(icosphere2)
    assert len(est.indices_) == 6
    assert est.landmarks_.method == "GP"
    assert est.get_params()["n_landmarks"] == 6
    np.testing.assert_allclose(np.asarray(est.uncertainty_)[est.indices_], 0.0, atol=1e-12)
    # variants produce the documented tags
    assert GPLandmarker(n_landmarks=3, kernel_variant="euclidean").fit_landmarks(icosphere2).method == "GP_Euc"
    assert GPLandmarker(n_landmarks=3, kernel_variant="unweighted").fit_landmarks(icosphere2).method == "GP_nW"


def test_gp_landmarker_variants_differ():
    mesh, cusps = synthetic.molar_like(n_rings=10)
    full = GPLandmarker(n_landmarks=8).fit_landmarks(mesh)
    euc = GPLandmarker(n_landmarks=8, kernel_variant="euclidean").fit_landmarks(mesh)
    nw = GPLandmarker(n_landmarks=8, kernel_variant="unweighted").fit_landmarks(mesh)
    assert full.indices.tolist() != euc.indices.tolist()
    assert full.indices.tolist() != nw.indices.tolist()
    # curvature weighting sends the first picks to the cusps
    assert len(set(full.indices[:4]) & set(cusps)) >= 2


def test_sampler_estimators(icosphere2):
    g = GFPSSampler(n_landmarks=5, seed_vertex=3).fit(icosphere2)
    assert g.indices_[0] == 3
    r = RandomLandmarker(n_landmarks=5, seed=1).fit(icosphere2)
    assert len(r.indices_) == 5
    assert set(r.get_params()) == {"n_landmarks", "seed"}


def test_landmark_csv_roundtrip(tmp_path, icosphere2):
    lms = GPLandmarker(n_landmarks=5).fit_landmarks(icosphere2)
    path = tmp_path / "lms.csv"
    save_landmarks_csv(path, lms, icosphere2)
    back = load_landmarks_csv(path)
    np.testing.assert_array_equal(back.indices, lms.indices)
    np.testing.assert_allclose(back.scores, lms.scores, rtol=1e-15)
    assert back.method == "GP"


def test_landmark_csv_snaps_coordinates(tmp_path, icosphere2):
    path = tmp_path / "obs.csv"
    vids = [5, 17, 40]
    with open(path, "w") as fh:
        fh.write("ordinal,x,y,z\n")
        for o, v in enumerate(vids):
            x, y, z = icosphere2.vertices[v] * 1.0001
            fh.write(f"{o},{x},{y},{z}\n")
    back = load_landmarks_csv(path, mesh=icosphere2, method="observer")
    np.testing.assert_array_equal(back.indices, vids)
    assert back.method == "observer"
