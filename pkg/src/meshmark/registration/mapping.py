"""Landmark-constrained map interpolation between parametrized surfaces.

Retained landmark correspondences become hard positional constraints on
a planar map from the source parameter domain into the target domain;
the map minimizes the symmetric distortion energy over the free
vertices while a pin-continuation scheme keeps every intermediate
configuration flip-free. Composing with the target parametrization
yields, for every source vertex, a barycentric image point on the
target mesh.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ..errors import ConstraintInfeasibleError
from .matching import fit_similarity
from .parametrize import SymmetricDistortion, rest_frames_from_plane

logger = logging.getLogger(__name__)

_MIN_SUBSTEP = 1.0 / 2**20
_RELAX_ITERS = 60
_FINAL_TOL = 1e-7
_FINAL_ITERS = 500


@dataclass(frozen=True)
class SurfaceMap:
    """Per-source-vertex image points on a target mesh.

    Attributes
    ----------
    face_ids : ndarray (n,)
        Target triangle containing each image point.
    barycentric : ndarray (n, 3)
        Nonnegative weights summing to 1 in each row.
    constraints : ndarray (L, 2)
        The (source vertex, target vertex) pairs that constrained the map.
    planar_images : ndarray (n, 2)
        Raw planar images in the target parameter domain.
    energy : float
        Final symmetric distortion energy of the planar map.
    """

    face_ids: np.ndarray
    barycentric: np.ndarray
    constraints: np.ndarray
    planar_images: np.ndarray
    energy: float

    def image_points(self, target_mesh):
        """3D image point per source vertex on the target mesh."""
        tri = target_mesh.triangles[self.face_ids]
        corners = target_mesh.vertices[tri]  # (n, 3, 3)
        return np.einsum("nk,nkd->nd", self.barycentric, corners)

    def __len__(self):
        return len(self.face_ids)


# ----------------------------------------------------------------------
# planar point location


def _barycentric(uv, faces, face_ids, queries):
    a = uv[faces[face_ids, 0]]
    b = uv[faces[face_ids, 1]]
    c = uv[faces[face_ids, 2]]
    m00 = b[:, 0] - a[:, 0]
    m01 = c[:, 0] - a[:, 0]
    m10 = b[:, 1] - a[:, 1]
    m11 = c[:, 1] - a[:, 1]
    det = m00 * m11 - m01 * m10
    qx = queries[:, 0] - a[:, 0]
    qy = queries[:, 1] - a[:, 1]
    l1 = (m11 * qx - m01 * qy) / det
    l2 = (-m10 * qx + m00 * qy) / det
    return np.column_stack([1.0 - l1 - l2, l1, l2])


def _closest_point_on_triangles(tri_uv, q):
    """Closest point to q among triangle boundaries, per triangle.

    tri_uv: (m, 3, 2). Returns (m,) squared distances and (m, 2) points.
    """
    best_d = np.full(len(tri_uv), np.inf)
    best_p = np.zeros((len(tri_uv), 2))
    for i, j in ((0, 1), (1, 2), (2, 0)):
        p0 = tri_uv[:, i]
        seg = tri_uv[:, j] - p0
        denom = np.einsum("md,md->m", seg, seg)
        denom[denom == 0] = 1.0
        t = np.clip(np.einsum("md,md->m", q - p0, seg) / denom, 0.0, 1.0)
        proj = p0 + t[:, None] * seg
        d = np.einsum("md,md->m", q - proj, q - proj)
        better = d < best_d
        best_d[better] = d[better]
        best_p[better] = proj[better]
    return best_d, best_p


def locate_points(uv, faces, queries, tol=1e-10):
    """Locate planar points in a triangulation (nearest triangle outside).

    Returns (face_ids, barycentric) with barycentric clamped
    nonnegative and renormalized; queries outside the domain map to the
    closest point on the closest triangle.
    """
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    centroids = uv[faces].mean(axis=1)
    tree = cKDTree(centroids)
    n = len(queries)
    face_ids = np.full(n, -1, dtype=np.int64)
    bary = np.zeros((n, 3))
    unresolved = np.arange(n)
    k = min(16, len(faces))
    while len(unresolved) and k <= len(faces):
        _, near = tree.query(queries[unresolved], k=k)
        near = np.atleast_2d(near)
        still = []
        for row, q_idx in enumerate(unresolved):
            cand = near[row]
            lam = _barycentric(uv, faces, cand, np.repeat(queries[None, q_idx], len(cand), axis=0))
            inside = lam.min(axis=1) >= -tol
            if inside.any():
                # among containing triangles take the most interior one
                pick = int(np.argmax(np.where(inside, lam.min(axis=1), -np.inf)))
                face_ids[q_idx] = cand[pick]
                bary[q_idx] = lam[pick]
            else:
                still.append(q_idx)
        unresolved = np.asarray(still, dtype=np.int64)
        if k == len(faces):
            break
        k = min(4 * k, len(faces))
    if len(unresolved):
        # outside the domain: closest boundary point over all triangles
        tri_uv = uv[faces]
        for q_idx in unresolved:
            d, p = _closest_point_on_triangles(tri_uv, queries[q_idx][None, :])
            fid = int(np.argmin(d))
            face_ids[q_idx] = fid
            bary[q_idx] = _barycentric(uv, faces, np.array([fid]), p[fid][None, :])[0]
    bary = np.clip(bary, 0.0, None)
    bary /= bary.sum(axis=1, keepdims=True)
    return face_ids, bary


# ----------------------------------------------------------------------
# constrained interpolation


def _assert_noncollinear(points):
    centered = points - points.mean(axis=0)
    if len(points) < 3 or np.linalg.matrix_rank(centered, tol=1e-10) < 2:
        raise ValueError("need at least 3 non-collinear constraint points")


def interpolate_map(param1, param2, correspondences, target_mesh):
    """Minimal-distortion planar map interpolating landmark constraints.

    Starts from the least-squares similarity of the constraints (flip
    free), walks the pinned vertices toward their exact targets in a
    backtracking continuation that relaxes the free vertices after
    every move, then polishes with a full descent. Pins end exactly at
    their targets, so the constraint residual is zero to roundoff.

    Parameters
    ----------
    param1, param2 : PlanarParam
        Source and target parametrizations.
    correspondences : CorrespondenceSet
        Retained landmark matches (source/target vertex id pairs).
    target_mesh : TriMesh
        Mesh behind param2 (supplies triangles for barycentric output).

    Returns
    -------
    SurfaceMap

    Raises
    ------
    ConstraintInfeasibleError
        The constraints force a triangle flip that continuation cannot
        resolve.
    """
    pairs = np.asarray(correspondences.pairs)
    src_ids = pairs[:, 0]
    tgt_pos = param2.uv[pairs[:, 1]]
    _assert_noncollinear(param1.uv[src_ids])
    _assert_noncollinear(tgt_pos)

    rest, areas = rest_frames_from_plane(param1.uv, param1.faces)
    problem = SymmetricDistortion(rest, param1.faces, areas)

    z_src = param1.uv[src_ids, 0] + 1j * param1.uv[src_ids, 1]
    z_tgt = tgt_pos[:, 0] + 1j * tgt_pos[:, 1]
    a, b = fit_similarity(z_src, z_tgt)
    zu = param1.uv[:, 0] + 1j * param1.uv[:, 1]
    w = a * zu + b
    uv = np.column_stack([w.real, w.imag])

    free = np.ones(len(uv), dtype=bool)
    free[src_ids] = False

    # continuation: move pins toward targets, relax, backtrack on flips
    remaining = 1.0
    substep = 1.0
    while remaining > 0.0:
        fraction = min(substep, remaining)
        trial = uv.copy()
        if fraction >= remaining:
            trial[src_ids] = tgt_pos
        else:
            trial[src_ids] += (fraction / remaining) * (tgt_pos - uv[src_ids])
        if (problem.dets(trial) <= 0).any():
            substep *= 0.5
            if substep < _MIN_SUBSTEP:
                raise ConstraintInfeasibleError(
                    "pin continuation cannot avoid triangle flips"
                )
            continue
        uv, _, _ = problem.minimize(
            trial, free_mask=free, tol=1e-9, max_iter=_RELAX_ITERS
        )
        remaining -= fraction
        substep = min(1.0, substep * 2.0)
    uv[src_ids] = tgt_pos
    uv, energy, _ = problem.minimize(
        uv, free_mask=free, tol=_FINAL_TOL, max_iter=_FINAL_ITERS
    )
    if (problem.dets(uv) <= 0).any():
        raise ConstraintInfeasibleError("final configuration contains flipped triangles")

    face_ids, bary = locate_points(param2.uv, param2.faces, uv)
    return SurfaceMap(
        face_ids=face_ids,
        barycentric=bary,
        constraints=pairs,
        planar_images=uv,
        energy=float(energy),
    )
