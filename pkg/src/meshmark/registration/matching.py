"""Landmark matching: descriptor candidates and consensus filtering.

Candidates pair every landmark on the source with its T most similar
landmarks on the target (descriptor distance). The filter then searches
planar similarity transforms between the two parametrizations by
consensus over minimal candidate subsets, keeps the transform with the
most reprojection inliers, and admits further candidates whose locally
implied affine map stays within the conformal distortion bound. The
retained set is one-to-one by maximum-cardinality assignment.

Because the per-pair admission sets are nested in the distortion bound,
the number of retained matches is monotone in the bound.
"""

import logging
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..errors import NoConsensusError
from .descriptors import descriptor_distances

logger = logging.getLogger(__name__)

# reprojection inlier tolerance, fraction of the target-domain diagonal
INLIER_FRACTION = 0.02
# enumerate all minimal 2-subsets exhaustively up to this many candidates
_EXHAUSTIVE_PAIR_LIMIT = 120
_RANSAC_DRAWS = 4000
_REFINE_ROUNDS = 10
_MIN_CONSENSUS = 4
_UNMATCHABLE = 1e30


@dataclass(frozen=True)
class CandidateMatches:
    """T target candidates per source landmark, sorted by similarity.

    Attributes
    ----------
    candidates : ndarray (L1, T)
        Ordinals into the target landmark list.
    distances : ndarray (L1, T)
        Ascending descriptor distances.
    source_vertices, target_vertices : ndarray
        Landmark vertex ids on each mesh.
    """

    candidates: np.ndarray
    distances: np.ndarray
    source_vertices: np.ndarray
    target_vertices: np.ndarray


@dataclass(frozen=True)
class CorrespondenceSet:
    """One-to-one landmark matches surviving the consensus filter.

    Attributes
    ----------
    pairs : ndarray (L, 2)
        (source vertex id, target vertex id) per retained match.
    source_ordinals, target_ordinals : ndarray
        The same matches as ordinals into the landmark lists.
    distortion_bound : float
    rotation_scale : ndarray (2, 2)
        Linear part of the fitted planar similarity.
    translation : ndarray (2,)
    residuals : ndarray (L,)
        Reprojection residual per retained match under the similarity.
    n_candidates : int
        Size of the candidate pool the filter started from.
    """

    pairs: np.ndarray
    source_ordinals: np.ndarray
    target_ordinals: np.ndarray
    distortion_bound: float
    rotation_scale: np.ndarray
    translation: np.ndarray
    residuals: np.ndarray
    n_candidates: int

    def __len__(self):
        return len(self.pairs)


def candidate_matches(landmarks1, landmarks2, descriptor1, descriptor2, n_candidates=2):
    """Seed matches: the T most descriptor-similar target landmarks per source.

    Ties are broken toward the lower target ordinal (stable sort).
    """
    if n_candidates < 1:
        raise ValueError("n_candidates must be >= 1")
    src = np.asarray(landmarks1.indices)
    tgt = np.asarray(landmarks2.indices)
    T = int(min(n_candidates, len(tgt)))
    dist = descriptor_distances(descriptor1, descriptor2, src, tgt)
    order = np.argsort(dist, axis=1, kind="stable")[:, :T]
    rows = np.arange(len(src))[:, None]
    return CandidateMatches(order, dist[rows, order], src, tgt)


def fit_similarity(z_src, z_tgt, weights=None):
    """Least-squares orientation-preserving planar similarity w = a z + b.

    Points are passed as complex numbers; returns (a, b).
    """
    if weights is None:
        weights = np.ones(len(z_src))
    wsum = weights.sum()
    zc = (weights * z_src).sum() / wsum
    wc = (weights * z_tgt).sum() / wsum
    num = (weights * np.conj(z_src - zc) * (z_tgt - wc)).sum()
    den = (weights * np.abs(z_src - zc) ** 2).sum()
    if den == 0:
        raise ValueError("degenerate source configuration for a similarity fit")
    a = num / den
    b = wc - a * zc
    return a, b


def conformal_distortion(src_tri, tgt_tri):
    """Singular-value ratio of the affine map between two planar triangles.

    Returns inf when the map is orientation reversing or degenerate.
    """
    S = np.column_stack([src_tri[1] - src_tri[0], src_tri[2] - src_tri[0]])
    T = np.column_stack([tgt_tri[1] - tgt_tri[0], tgt_tri[2] - tgt_tri[0]])
    det_s = S[0, 0] * S[1, 1] - S[0, 1] * S[1, 0]
    if abs(det_s) < 1e-300:
        return np.inf
    M = T @ np.linalg.inv(S)
    det_m = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    if det_m <= 0:
        return np.inf
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[1] <= 0:
        return np.inf
    return float(sv[0] / sv[1])


def _pair_pool(cands):
    """Deduplicated candidate pairs as (source ordinal, target ordinal) rows."""
    L1, T = cands.candidates.shape
    rows = np.repeat(np.arange(L1), T)
    cols = cands.candidates.ravel()
    pairs = np.unique(np.column_stack([rows, cols]), axis=0)
    return pairs


def bd_filter(cands, param1, param2, distortion_bound=1.5, seed=0):
    """Consensus filter for candidate matches under a distortion bound.

    Parameters
    ----------
    cands : CandidateMatches
    param1, param2 : PlanarParam
        Parametrizations supplying the planar landmark positions.
    distortion_bound : float >= 1
        Conformal distortion allowance; 1 admits only matches
        consistent with a single planar similarity (up to the
        reprojection tolerance).
    seed : int
        RNG seed for the sampled search used above the exhaustive
        enumeration limit.

    Returns
    -------
    CorrespondenceSet

    Raises
    ------
    NoConsensusError
        Fewer than 4 one-to-one consensus matches exist.
    """
    if distortion_bound < 1.0:
        raise ValueError("distortion_bound must be >= 1")
    pool = _pair_pool(cands)
    z1 = param1.uv[cands.source_vertices][:, 0] + 1j * param1.uv[cands.source_vertices][:, 1]
    z2 = param2.uv[cands.target_vertices][:, 0] + 1j * param2.uv[cands.target_vertices][:, 1]
    src = z1[pool[:, 0]]
    tgt = z2[pool[:, 1]]
    tau = INLIER_FRACTION * param2.domain_diagonal()
    scale1 = param1.domain_diagonal()

    a, b = _consensus_similarity(pool, src, tgt, tau, scale1, seed)
    for _ in range(_REFINE_ROUNDS):
        residual = np.abs(a * src + b - tgt)
        inlier = residual <= tau
        if inlier.sum() < 2:
            break
        a_new, b_new = fit_similarity(src[inlier], tgt[inlier])
        if np.allclose([a_new, b_new], [a, b], rtol=1e-12, atol=1e-15):
            a, b = a_new, b_new
            break
        a, b = a_new, b_new
    residual = np.abs(a * src + b - tgt)
    inlier = residual <= tau * (1.0 + 1e-9)

    n1, n2 = len(z1), len(z2)
    if _matching_size(pool[inlier], n1, n2) < _MIN_CONSENSUS:
        raise NoConsensusError(
            f"best planar consensus keeps {int(inlier.sum())} matches (< {_MIN_CONSENSUS})"
        )

    distortion = _implied_distortions(pool, src, tgt, inlier, a, b, scale1)
    admitted = inlier | (distortion <= distortion_bound * (1.0 + 1e-9))

    rows, cols = _max_cardinality_assignment(pool[admitted], residual[admitted], n1, n2)
    order = np.argsort(rows)
    rows, cols = rows[order], cols[order]
    sel_res = np.abs(a * z1[rows] + b - z2[cols])

    rot_scale = np.array([[a.real, -a.imag], [a.imag, a.real]])
    return CorrespondenceSet(
        pairs=np.column_stack([cands.source_vertices[rows], cands.target_vertices[cols]]),
        source_ordinals=rows,
        target_ordinals=cols,
        distortion_bound=float(distortion_bound),
        rotation_scale=rot_scale,
        translation=np.array([b.real, b.imag]),
        residuals=sel_res,
        n_candidates=len(pool),
    )


def _consensus_similarity(pool, src, tgt, tau, scale, seed):
    """Best similarity by minimal-subset consensus (exhaustive or sampled)."""
    n = len(pool)
    if n < 2:
        raise NoConsensusError("need at least two candidate pairs")
    if n <= _EXHAUSTIVE_PAIR_LIMIT:
        samples = combinations(range(n), 2)
    else:
        rng = np.random.default_rng(seed)
        draws = rng.integers(0, n, size=(_RANSAC_DRAWS, 2))
        samples = (tuple(row) for row in draws if row[0] != row[1])
    best = (-1, None, None)
    for i, j in samples:
        if pool[i, 0] == pool[j, 0] or pool[i, 1] == pool[j, 1]:
            continue
        dz = src[j] - src[i]
        if abs(dz) < 1e-12 * scale:
            continue
        a = (tgt[j] - tgt[i]) / dz
        if abs(a) < 1e-12:
            continue
        b = tgt[i] - a * src[i]
        count = int((np.abs(a * src + b - tgt) <= tau).sum())
        if count > best[0]:
            best = (count, a, b)
    if best[1] is None:
        raise NoConsensusError("no non-degenerate candidate pair subsets")
    return best[1], best[2]


def _implied_distortions(pool, src, tgt, inlier, a, b, scale):
    """Conformal distortion implied by each pair against its nearest inliers.

    For each candidate pair, form the triangle of its source point and
    the two nearest non-collinear inlier source points, map the inliers
    by the fitted similarity and the candidate to its actual target;
    the distortion of that affine map is 1 exactly when the candidate
    agrees with the similarity and grows with its deviation.
    """
    n = len(pool)
    out = np.full(n, np.inf)
    anchor_idx = np.flatnonzero(inlier)
    if len(anchor_idx) < 2:
        return out
    anchors = src[anchor_idx]
    for p in range(n):
        if inlier[p]:
            out[p] = 1.0
            continue
        d = np.abs(anchors - src[p])
        order = np.argsort(d, kind="stable")
        q1 = None
        for cand in order:
            if d[cand] < 1e-12 * scale:
                continue
            if q1 is None:
                q1 = cand
                continue
            area = abs(
                ((anchors[q1] - src[p]) * np.conj(anchors[cand] - src[p])).imag
            )
            if area > 1e-10 * scale**2:
                src_tri = np.array(
                    [
                        [src[p].real, src[p].imag],
                        [anchors[q1].real, anchors[q1].imag],
                        [anchors[cand].real, anchors[cand].imag],
                    ]
                )
                w1 = a * anchors[q1] + b
                w2 = a * anchors[cand] + b
                tgt_tri = np.array(
                    [
                        [tgt[p].real, tgt[p].imag],
                        [w1.real, w1.imag],
                        [w2.real, w2.imag],
                    ]
                )
                out[p] = conformal_distortion(src_tri, tgt_tri)
                break
    return out


def _matching_size(pairs, n1, n2):
    if len(pairs) == 0:
        return 0
    rows, _ = _max_cardinality_assignment(pairs, np.zeros(len(pairs)), n1, n2)
    return len(rows)


def _max_cardinality_assignment(pairs, costs, n1, n2):
    """Max-cardinality min-cost one-to-one subset of the given pairs."""
    if len(pairs) == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    cost = np.full((n1, n2), _UNMATCHABLE)
    cost[pairs[:, 0], pairs[:, 1]] = costs
    rows, cols = linear_sum_assignment(cost)
    keep = cost[rows, cols] < _UNMATCHABLE
    return rows[keep].astype(np.int64), cols[keep].astype(np.int64)
