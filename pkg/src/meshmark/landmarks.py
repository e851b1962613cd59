"""Landmark generation: greedy uncertainty maximization, farthest-point
sampling, and the random baseline.

The greedy selector treats the kernel as the covariance of a zero-mean
Gaussian process and repeatedly picks the vertex with the largest
conditional prediction variance given the landmarks chosen so far.
Internally this is a pivoted Cholesky factorization: each step extends
a triangular factor by one column and downdates the residual diagonal,
which equals the conditional variance field, at O(n * k) per step. The
direct dense-inversion evaluation of the variance is kept as
:func:`uncertainty_field` and used by the tests as an oracle.
"""

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator

from .errors import (
    ComplexityGuardError,
    DisconnectedMeshError,
    RankExhaustionError,
    SingularSubmatrixError,
)
from .geometry import edge_graph, gaussian_curvature, mean_curvature, voronoi_areas
from .kernels import (
    KernelMatrix,
    KernelParams,
    plain_kernel,
    reweighted_kernel,
    weight_function,
)
from .mesh import TriMesh, VertexField
from .validation import check_count, check_indices, check_symmetric

logger = logging.getLogger(__name__)

# Greedy selection stops when the best remaining score drops below
# RANK_EXHAUSTION_FACTOR * max(diag).
RANK_EXHAUSTION_FACTOR = 1e-10
# Round-off tolerance for conditional variances: values in
# [-NEGATIVE_SCORE_TOL, 0) are clamped to zero, anything lower warns.
NEGATIVE_SCORE_TOL = 1e-9

METHODS = ("GP", "GP_nW", "GP_Euc", "GFPS", "random", "observer")


@dataclass(frozen=True)
class LandmarkSet:
    """An ordered list of landmark vertices with selection metadata.

    Attributes
    ----------
    indices : ndarray of int
        Distinct vertex indices in selection order.
    scores : ndarray of float
        Selection-time score per landmark (conditional variance for the
        greedy methods, distance-to-set for farthest-point, NaN for
        random/observer).
    method : str
        One of ``METHODS``.
    params : dict
        Sampler parameters for reproducibility.
    exhausted : bool
        True if greedy selection stopped early on numerical rank.
    trace : ndarray or None
        Optional (L, n) matrix of the score field before each pick.
    """

    indices: np.ndarray
    scores: np.ndarray
    method: str
    params: dict = field(default_factory=dict)
    exhausted: bool = False
    trace: np.ndarray | None = None

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if len(np.unique(idx)) != len(idx):
            raise ValueError("landmark indices must be distinct")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "scores", np.asarray(self.scores, dtype=float))
        if self.method not in METHODS:
            raise ValueError(f"unknown landmark method {self.method!r}")

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)


def _as_kernel_array(kernel):
    if isinstance(kernel, KernelMatrix):
        return np.asarray(kernel)
    return check_symmetric(np.asarray(kernel, dtype=float), "kernel")


def gp_landmarks(kernel, n_landmarks, method="GP", on_exhaustion="raise", keep_trace=False):
    """Greedy conditional-variance landmark selection.

    The first landmark maximizes the kernel diagonal; each subsequent
    one maximizes the conditional variance given the previous picks,
    with ties broken deterministically toward the lowest vertex index.

    Parameters
    ----------
    kernel : KernelMatrix or (n, n) array
        Symmetric PSD covariance matrix.
    n_landmarks : int
        Number of landmarks to select, 1 <= n_landmarks <= n.
    method : str
        Tag stored on the result ("GP", "GP_nW", or "GP_Euc").
    on_exhaustion : {"raise", "truncate"}
        What to do when the numerical rank runs out early: raise
        RankExhaustionError (library default) or return the shorter
        set flagged ``exhausted=True``.
    keep_trace : bool
        Also record the full score field before each pick.

    Returns
    -------
    LandmarkSet

    Raises
    ------
    RankExhaustionError
        Best remaining score fell below 1e-10 * max(diag) before
        n_landmarks were selected (with on_exhaustion="raise").
    """
    K = _as_kernel_array(kernel)
    n = K.shape[0]
    L = check_count(n_landmarks, 1, n, "n_landmarks")
    if on_exhaustion not in ("raise", "truncate"):
        raise ValueError("on_exhaustion must be 'raise' or 'truncate'")

    diag = np.diag(K).astype(float).copy()
    threshold = RANK_EXHAUSTION_FACTOR * diag.max()
    scores = diag.copy()  # residual conditional variance per vertex
    factors = np.zeros((n, L))  # pivoted Cholesky columns
    chosen = []
    chosen_scores = []
    trace = np.zeros((L, n)) if keep_trace else None
    exhausted = False

    for k in range(L):
        if keep_trace:
            trace[k] = np.maximum(scores, 0.0)
        best = int(np.argmax(scores))  # argmax takes the lowest index on ties
        best_score = scores[best]
        if best_score < threshold:
            if on_exhaustion == "raise":
                raise RankExhaustionError(
                    f"kernel rank exhausted after {k} landmarks "
                    f"(best score {best_score:.3e} < {threshold:.3e})"
                )
            exhausted = True
            if keep_trace:
                trace = trace[:k]
            break
        pivot = math.sqrt(best_score)
        column = (K[:, best] - factors[:, :k] @ factors[best, :k]) / pivot
        factors[:, k] = column
        scores = scores - column**2
        if scores.min() < -NEGATIVE_SCORE_TOL:
            warnings.warn(
                f"conditional variance dipped to {scores.min():.3e}; "
                "kernel may be numerically indefinite",
                RuntimeWarning,
                stacklevel=2,
            )
        np.clip(scores, 0.0, None, out=scores)
        scores[chosen] = 0.0
        scores[best] = 0.0
        chosen.append(best)
        chosen_scores.append(best_score)

    return LandmarkSet(
        np.asarray(chosen, dtype=np.int64),
        np.asarray(chosen_scores, dtype=float),
        method,
        params={"n_landmarks": L},
        exhausted=exhausted,
        trace=trace,
    )


def uncertainty_field(kernel, landmarks):
    """Conditional prediction variance at every vertex, by direct solve.

    Sigma(x_i) = K(i, i) - k_i' A^{-1} k_i with A the landmark
    submatrix and k_i the cross-covariances; landmarks themselves have
    exactly zero variance (clamped on report). This is the quadratic
    route the greedy selector's incremental factorization is tested
    against.

    Parameters
    ----------
    kernel : KernelMatrix or (n, n) array
    landmarks : array_like of int
        Distinct landmark indices (may be empty).

    Returns
    -------
    VertexField
        kind="uncertainty", nonnegative.

    Raises
    ------
    SingularSubmatrixError
        The landmark submatrix is not positive definite to working
        precision.
    """
    K = _as_kernel_array(kernel)
    n = K.shape[0]
    idx = check_indices(landmarks, n, "landmarks")
    diag = np.diag(K).astype(float).copy()
    if len(idx) == 0:
        return VertexField(np.maximum(diag, 0.0), "uncertainty")
    A = K[np.ix_(idx, idx)]
    C = K[idx, :]  # (k, n)
    try:
        cho = scipy.linalg.cho_factor(A, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise SingularSubmatrixError(f"landmark submatrix is singular: {exc}") from exc
    solved = scipy.linalg.cho_solve(cho, C)
    sigma = diag - np.einsum("kn,kn->n", C, solved)
    low = sigma.min()
    if low < -NEGATIVE_SCORE_TOL:
        warnings.warn(
            f"conditional variance dipped to {low:.3e}; "
            "kernel may be numerically indefinite",
            RuntimeWarning,
            stacklevel=2,
        )
    sigma = np.maximum(sigma, 0.0)
    sigma[idx] = 0.0
    return VertexField(sigma, "uncertainty")


def gfps_landmarks(mesh, n_landmarks, seed_vertex=0):
    """Geodesic farthest-point sampling.

    Starting from ``seed_vertex``, repeatedly adds the vertex with the
    largest edge-graph distance to the current set (lowest index on
    ties). Scores record the distance-to-set at selection time.

    Raises
    ------
    DisconnectedMeshError
        Propagated from the distance computation.
    """
    n = mesh.n_vertices
    L = check_count(n_landmarks, 1, n, "n_landmarks")
    seed_vertex = check_count(seed_vertex, 0, n - 1, "seed_vertex")
    graph = edge_graph(mesh)
    from scipy.sparse import csgraph

    chosen = [seed_vertex]
    dist = csgraph.dijkstra(graph, directed=False, indices=seed_vertex)
    if np.isinf(dist).any():
        raise DisconnectedMeshError("mesh edge graph is disconnected")
    scores = [np.inf]
    for _ in range(1, L):
        nxt = int(np.argmax(dist))
        scores.append(float(dist[nxt]))
        chosen.append(nxt)
        dist = np.minimum(dist, csgraph.dijkstra(graph, directed=False, indices=nxt))
    return LandmarkSet(
        np.asarray(chosen, dtype=np.int64),
        np.asarray(scores),
        "GFPS",
        params={"seed_vertex": seed_vertex, "n_landmarks": L},
    )


def random_landmarks(mesh_or_count, n_landmarks, seed=0):
    """Uniform random landmarks without replacement (reproducible by seed)."""
    n = mesh_or_count.n_vertices if isinstance(mesh_or_count, TriMesh) else int(mesh_or_count)
    L = check_count(n_landmarks, 1, n, "n_landmarks")
    rng = np.random.default_rng(seed)
    idx = rng.choice(n, size=L, replace=False)
    return LandmarkSet(
        idx.astype(np.int64),
        np.full(L, np.nan),
        "random",
        params={"seed": seed, "n_landmarks": L},
    )


def greedy_logdet_ratio(kernel, n_select, max_subsets=10**6):
    """Determinant of the greedy submatrix over the best n-subset determinant.

    Exhaustively enumerates all n-subsets, so it is only usable on
    small kernels (the greedy-selection near-optimality check).

    Parameters
    ----------
    kernel : KernelMatrix or array
    n_select : int
        Subset size, at most 4.
    max_subsets : int
        Complexity guard on the enumeration.

    Returns
    -------
    float
        det(greedy) / max_subset det.

    Raises
    ------
    ComplexityGuardError
        The number of subsets exceeds ``max_subsets``.
    """
    K = _as_kernel_array(kernel)
    n = K.shape[0]
    n_select = check_count(n_select, 1, min(4, n), "n_select")
    total = math.comb(n, n_select)
    if total > max_subsets:
        raise ComplexityGuardError(
            f"{total} subsets exceed the {max_subsets} enumeration budget"
        )
    greedy = gp_landmarks(K, n_select).indices
    det_greedy = np.linalg.det(K[np.ix_(greedy, greedy)])
    best = -np.inf
    for subset in combinations(range(n), n_select):
        sub = K[np.ix_(subset, subset)]
        best = max(best, np.linalg.det(sub))
    if best <= 0:
        raise ValueError("all subset determinants are non-positive")
    return float(det_greedy / best)


# ----------------------------------------------------------------------
# mesh-level estimators


def build_landmark_kernel(mesh, params=KernelParams(), variant="reweighted"):
    """Assemble the covariance kernel a sampler runs on.

    variant="reweighted" uses curvature weights, "unweighted" sets the
    weight function to 1 (area weighting only), "euclidean" uses the
    plain distance kernel directly.

    Returns
    -------
    KernelMatrix
    """
    t = params.resolve_bandwidth(mesh)
    K = plain_kernel(mesh, t)
    if variant == "euclidean":
        return K
    nu = voronoi_areas(mesh)
    if variant == "unweighted":
        w = VertexField(np.ones(mesh.n_vertices), "weight")
    elif variant == "reweighted":
        areas = nu
        kappa = gaussian_curvature(mesh, areas=areas)
        eta = mean_curvature(mesh, areas=areas)
        w = weight_function(kappa, eta, nu, params)
    else:
        raise ValueError(f"unknown kernel variant {variant!r}")
    return reweighted_kernel(K, w, nu)


_VARIANT_TAGS = {"reweighted": "GP", "unweighted": "GP_nW", "euclidean": "GP_Euc"}


class GPLandmarker(BaseEstimator):
    """Greedy Gaussian-process landmark sampler over a triangle mesh.

    Parameters
    ----------
    n_landmarks : int, default=40
    bandwidth : float or None
        Kernel bandwidth t; None derives (0.08 * bbox diagonal)^2.
    blend : float, default=0.5
        Gaussian- vs mean-curvature mixing weight of the weight function.
    power : float, default=1.0
        Curvature exponent.
    kernel_variant : {"reweighted", "unweighted", "euclidean"}
    on_exhaustion : {"raise", "truncate"}

    Attributes
    ----------
    landmarks_ : LandmarkSet
    indices_ : ndarray of int
    scores_ : ndarray of float
    kernel_ : KernelMatrix
    bandwidth_ : float
    uncertainty_ : VertexField
        Conditional variance field after all picks.
    """

    def __init__(
        self,
        n_landmarks=40,
        bandwidth=None,
        blend=0.5,
        power=1.0,
        kernel_variant="reweighted",
        on_exhaustion="raise",
    ):
        self.n_landmarks = n_landmarks
        self.bandwidth = bandwidth
        self.blend = blend
        self.power = power
        self.kernel_variant = kernel_variant
        self.on_exhaustion = on_exhaustion

    def fit(self, mesh, y=None):
        params = KernelParams(self.bandwidth, self.blend, self.power)
        self.bandwidth_ = params.resolve_bandwidth(mesh)
        self.kernel_ = build_landmark_kernel(mesh, params, self.kernel_variant)
        lms = gp_landmarks(
            self.kernel_,
            min(self.n_landmarks, mesh.n_vertices),
            method=_VARIANT_TAGS[self.kernel_variant],
            on_exhaustion=self.on_exhaustion,
        )
        self.landmarks_ = LandmarkSet(
            lms.indices,
            lms.scores,
            lms.method,
            params={
                "bandwidth": self.bandwidth_,
                "blend": self.blend,
                "power": self.power,
                "variant": self.kernel_variant,
            },
            exhausted=lms.exhausted,
        )
        self.indices_ = self.landmarks_.indices
        self.scores_ = self.landmarks_.scores
        self.uncertainty_ = uncertainty_field(self.kernel_, self.indices_)
        return self

    def fit_landmarks(self, mesh):
        """Fit and return the LandmarkSet."""
        return self.fit(mesh).landmarks_


class GFPSSampler(BaseEstimator):
    """Farthest-point sampling baseline (see :func:`gfps_landmarks`)."""

    def __init__(self, n_landmarks=40, seed_vertex=0):
        self.n_landmarks = n_landmarks
        self.seed_vertex = seed_vertex

    def fit(self, mesh, y=None):
        self.landmarks_ = gfps_landmarks(
            mesh, min(self.n_landmarks, mesh.n_vertices), self.seed_vertex
        )
        self.indices_ = self.landmarks_.indices
        return self

    def fit_landmarks(self, mesh):
        return self.fit(mesh).landmarks_


class RandomLandmarker(BaseEstimator):
    """Uniform random baseline (see :func:`random_landmarks`)."""

    def __init__(self, n_landmarks=40, seed=0):
        self.n_landmarks = n_landmarks
        self.seed = seed

    def fit(self, mesh, y=None):
        self.landmarks_ = random_landmarks(
            mesh, min(self.n_landmarks, mesh.n_vertices), self.seed
        )
        self.indices_ = self.landmarks_.indices
        return self

    def fit_landmarks(self, mesh):
        return self.fit(mesh).landmarks_


# ----------------------------------------------------------------------
# CSV round trip

LANDMARK_CSV_HEADER = ["ordinal", "vertex", "x", "y", "z", "score", "method"]


def save_landmarks_csv(path, landmarks, mesh):
    """Write a landmark set as CSV: ordinal, vertex, x, y, z, score, method."""
    with open(str(path), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(LANDMARK_CSV_HEADER)
        for ordinal, (vid, score) in enumerate(zip(landmarks.indices, landmarks.scores)):
            x, y, z = (float(c) for c in mesh.vertices[vid])
            writer.writerow([ordinal, int(vid), repr(x), repr(y), repr(z), repr(float(score)), landmarks.method])


def load_landmarks_csv(path, mesh=None, method=None):
    """Read a landmark CSV back into a LandmarkSet.

    If the file has no usable vertex column but has coordinates and a
    mesh is given, points are snapped to the nearest vertices (the snap
    distance is logged).
    """
    with open(str(path), newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: empty landmark file")
    indices = []
    scores = []
    methods = set()
    coords = []
    for row in rows:
        vid = row.get("vertex", "")
        indices.append(int(vid) if vid not in ("", None) else -1)
        score = row.get("score", "")
        scores.append(float(score) if score not in ("", None) else np.nan)
        methods.add(row.get("method") or "observer")
        if {"x", "y", "z"} <= set(row):
            coords.append([float(row["x"]), float(row["y"]), float(row["z"])])
    indices = np.asarray(indices, dtype=np.int64)
    if (indices < 0).any():
        if mesh is None or len(coords) != len(rows):
            raise ValueError(f"{path}: rows lack vertex indices and coordinates")
        from .mesh import snap_points_to_vertices

        indices, snap = snap_points_to_vertices(mesh, np.asarray(coords))
        logger.info("snapped %d landmarks, max snap distance %.3e", len(indices), snap.max())
    tag = method or (methods.pop() if len(methods) == 1 else "observer")
    if tag not in METHODS:
        tag = "observer"
    return LandmarkSet(indices, np.asarray(scores), tag)
