"""Shape-distance evaluation and permutation statistics.

Closed-form rigid alignment of landmark configurations and of mapped
surfaces (area-weighted), observer-coverage curves, the Mantel
correlation permutation test, and PERMANOVA pseudo-F with label
permutations. Permutation p-values use the add-one convention and both
tests switch to exact enumeration when the requested permutation count
covers the whole group.
"""

import csv
import logging
import math
from dataclasses import dataclass
from itertools import permutations as iter_permutations

import numpy as np

from .errors import (
    ConstantMatrixError,
    DegenerateConfigurationError,
    EmptyGroupError,
    SingleGroupError,
)
from .geometry import edge_graph, voronoi_areas
from .landmarks import LandmarkSet
from .validation import check_square_matrix

logger = logging.getLogger(__name__)


# ----------------------------------------------------------------------
# rigid alignment


def _optimal_rigid(source, target, weights, allow_reflections):
    """Weighted least-squares rigid motion source -> target (Kabsch)."""
    wsum = weights.sum()
    mu_s = (weights[:, None] * source).sum(axis=0) / wsum
    mu_t = (weights[:, None] * target).sum(axis=0) / wsum
    s = source - mu_s
    t = target - mu_t
    H = (weights[:, None] * s).T @ t
    if np.linalg.matrix_rank(H, tol=1e-12 * max(np.abs(H).max(), 1e-300)) < 2:
        raise DegenerateConfigurationError(
            "point configuration is (near) collinear; rotation is ill-determined"
        )
    U, _, Vt = np.linalg.svd(H)
    R = Vt.T @ U.T
    if not allow_reflections and np.linalg.det(R) < 0:
        D = np.diag([1.0, 1.0, -1.0])
        R = Vt.T @ D @ U.T
    trans = mu_t - R @ mu_s
    return R, trans


def landmark_procrustes(points1, points2, allow_reflections=False):
    """Root-mean-square residual after optimal rigid alignment.

    sqrt((1/L) * min over rigid motions T of sum_l |T(x_l) - y_l|^2),
    solved in closed form (centroid alignment plus SVD rotation). By
    default only orientation-preserving motions are searched; pass
    allow_reflections=True to include reflections.

    Raises
    ------
    DegenerateConfigurationError
        The configurations are too collinear to determine a rotation.
    """
    X = np.asarray(points1, dtype=float)
    Y = np.asarray(points2, dtype=float)
    if X.shape != Y.shape or X.ndim != 2 or X.shape[1] != 3:
        raise ValueError("point sets must share a common (L, 3) shape")
    if len(X) < 3:
        raise ValueError("need at least 3 landmark pairs")
    w = np.ones(len(X))
    R, trans = _optimal_rigid(X, Y, w, allow_reflections)
    residual = X @ R.T + trans - Y
    return float(np.sqrt(np.mean(np.sum(residual**2, axis=1))))


def procrustes_of_map(surface_map, mesh1, mesh2, allow_reflections=False):
    """Area-weighted alignment residual of a mapped surface.

    sqrt(min over rigid motions R of sum_i nu_i * |f(x_i) - R(x_i)|^2)
    with nu the Voronoi areas of the source mesh; both meshes must be
    area-normalized so distances are comparable across pairs.
    """
    for name, m in (("mesh1", mesh1), ("mesh2", mesh2)):
        if abs(m.total_area() - 1.0) > 1e-6:
            raise ValueError(f"{name} must be unit-area normalized (area={m.total_area():.6g})")
    images = surface_map.image_points(mesh2)
    nu = np.asarray(voronoi_areas(mesh1))
    R, trans = _optimal_rigid(mesh1.vertices, images, nu, allow_reflections)
    residual = mesh1.vertices @ R.T + trans - images
    return float(np.sqrt(np.sum(nu * np.sum(residual**2, axis=1))))


# ----------------------------------------------------------------------
# coverage curves


@dataclass(frozen=True)
class CoverageCurve:
    """Median observer-to-nearest-landmark distance per landmark count."""

    counts: np.ndarray
    values: np.ndarray
    method: str

    def __post_init__(self):
        if (np.diff(self.values) > 1e-12).any():
            raise ValueError("coverage curve must be nonincreasing")


def coverage_curve(mesh, observer, auto, m_max=None):
    """Coverage of observer landmarks by the first m automatic landmarks.

    For each m the curve holds the median, over observer landmarks, of
    the edge-graph geodesic distance to the nearest of the first m
    automatic landmarks. Nonincreasing in m by construction.

    Parameters
    ----------
    mesh : TriMesh
    observer : LandmarkSet or array of vertex ids
    auto : LandmarkSet
        Ordered automatic landmarks.
    m_max : int, optional
        Curve length (defaults to all of ``auto``).
    """
    from scipy.sparse import csgraph

    obs = np.asarray(observer.indices if isinstance(observer, LandmarkSet) else observer, dtype=np.int64)
    auto_idx = np.asarray(auto.indices if isinstance(auto, LandmarkSet) else auto, dtype=np.int64)
    if m_max is None:
        m_max = len(auto_idx)
    if not 1 <= m_max <= len(auto_idx):
        raise ValueError("m_max out of range")
    graph = edge_graph(mesh)
    dist = csgraph.dijkstra(graph, directed=False, indices=auto_idx[:m_max])
    if np.isinf(dist).any():
        from .errors import DisconnectedMeshError

        raise DisconnectedMeshError("mesh edge graph is disconnected")
    # running minimum over landmark prefixes, median over observers
    running = np.minimum.accumulate(dist[:, obs], axis=0)
    values = np.median(running, axis=1)
    return CoverageCurve(np.arange(1, m_max + 1), values, getattr(auto, "method", "auto"))


# ----------------------------------------------------------------------
# distance matrices


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric nonnegative distances with specimen labels and groups.

    Failed entries may be NaN; statistics decide how to treat them.
    """

    entries: np.ndarray
    labels: tuple
    groups: tuple | None = None

    def __post_init__(self):
        entries = check_square_matrix(self.entries, "distance matrix")
        n = entries.shape[0]
        labels = tuple(str(x) for x in self.labels)
        if len(labels) != n:
            raise ValueError("label count does not match matrix size")
        finite = np.isfinite(entries)
        sym_ok = np.allclose(
            entries[finite & finite.T & ~np.eye(n, dtype=bool)],
            entries.T[finite & finite.T & ~np.eye(n, dtype=bool)],
            rtol=1e-9,
            atol=1e-12,
        )
        if not sym_ok:
            raise ValueError("distance matrix is not symmetric")
        if not np.allclose(np.diag(entries), 0.0, atol=1e-12):
            raise ValueError("distance matrix diagonal must be zero")
        if np.nanmin(entries) < -1e-12:
            raise ValueError("distances must be nonnegative")
        entries = entries.copy()
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "labels", labels)
        if self.groups is not None:
            groups = tuple(str(g) for g in self.groups)
            if len(groups) != n:
                raise ValueError("group count does not match matrix size")
            object.__setattr__(self, "groups", groups)

    @property
    def n(self):
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


def save_distance_matrix_csv(path, dmat):
    """Write a labeled distance matrix: header row of labels, rows labeled."""
    with open(str(path), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", *dmat.labels])
        for label, row in zip(dmat.labels, dmat.entries):
            writer.writerow([label, *[repr(float(x)) for x in row]])


def load_distance_matrix_csv(path):
    """Read a matrix written by :func:`save_distance_matrix_csv`."""
    with open(str(path), newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "label":
        raise ValueError(f"{path}: not a labeled distance matrix CSV")
    labels = rows[0][1:]
    entries = np.array([[float(x) for x in row[1:]] for row in rows[1:]])
    row_labels = [row[0] for row in rows[1:]]
    if row_labels != labels:
        raise ValueError(f"{path}: row labels do not match column labels")
    return DistanceMatrix(entries, labels)


def load_groups_csv(path):
    """Read a two-column (label, group) CSV into a dict."""
    with open(str(path), newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if rows and [c.strip().lower() for c in rows[0]] == ["label", "group"]:
        rows = rows[1:]
    out = {}
    for row in rows:
        if len(row) != 2:
            raise ValueError(f"{path}: expected two columns (label, group)")
        out[row[0]] = row[1]
    return out


# ----------------------------------------------------------------------
# permutation statistics


def _upper(matrix):
    n = matrix.shape[0]
    iu = np.triu_indices(n, k=1)
    return matrix[iu]


def _pearson(x, y):
    mask = np.isfinite(x) & np.isfinite(y)
    x, y = x[mask], y[mask]
    if len(x) < 3:
        return np.nan
    xc = x - x.mean()
    yc = y - y.mean()
    denom = np.sqrt((xc**2).sum() * (yc**2).sum())
    if denom == 0:
        return np.nan
    return float((xc * yc).sum() / denom)


def mantel_test(dmat1, dmat2, n_permutations=9999, seed=0):
    """Permutation test of correlation between two distance matrices.

    The statistic is the Pearson correlation of the strictly upper
    triangles; the null distribution comes from simultaneous row/column
    relabelings of the second matrix. When n_permutations covers the
    full permutation group (n_permutations >= n!), all n! relabelings
    are enumerated and the p-value is exact; otherwise relabelings are
    sampled and the add-one convention applies. NaN entries are
    excluded pairwise.

    Returns
    -------
    result : dict
        statistic (r), p_value, n_permutations (performed), exact flag,
        seed.

    Raises
    ------
    ConstantMatrixError
        Either matrix has zero off-diagonal variance.
    """
    D1 = np.asarray(dmat1, dtype=float)
    D2 = np.asarray(dmat2, dtype=float)
    D1 = check_square_matrix(D1, "first matrix")
    D2 = check_square_matrix(D2, "second matrix")
    n = D1.shape[0]
    if D2.shape[0] != n:
        raise ValueError("matrices must share dimensions")
    if n < 3:
        raise ValueError("need at least 3 specimens")
    if isinstance(dmat1, DistanceMatrix) and isinstance(dmat2, DistanceMatrix):
        if dmat1.labels != dmat2.labels:
            raise ValueError("matrices must share label order")
    x = _upper(D1)
    for name, v in (("first", _upper(D1)), ("second", _upper(D2))):
        fin = v[np.isfinite(v)]
        if len(fin) == 0 or np.allclose(fin, fin[0]):
            raise ConstantMatrixError(f"{name} matrix has zero off-diagonal variance")
    r_obs = _pearson(x, _upper(D2))
    if not np.isfinite(r_obs):
        raise ConstantMatrixError("correlation undefined for the observed matrices")

    full = math.factorial(n)
    exact = n_permutations >= full
    count = 0
    total = 0
    if exact:
        for perm in iter_permutations(range(n)):
            p = np.asarray(perm)
            r = _pearson(x, _upper(D2[np.ix_(p, p)]))
            total += 1
            if r >= r_obs - 1e-12:
                count += 1
        p_value = count / total
        performed = total
    else:
        rng = np.random.default_rng(seed)
        for _ in range(n_permutations):
            p = rng.permutation(n)
            r = _pearson(x, _upper(D2[np.ix_(p, p)]))
            if r >= r_obs - 1e-12:
                count += 1
        p_value = (1 + count) / (1 + n_permutations)
        performed = n_permutations
    return {
        "statistic": float(r_obs),
        "p_value": float(p_value),
        "n_permutations": int(performed),
        "exact": bool(exact),
        "seed": int(seed),
    }


def _permanova_f(d2, group_ids, n_groups, group_sizes):
    """Pseudo-F from squared distances and integer group labels."""
    n = d2.shape[0]
    iu = np.triu_indices(n, k=1)
    vals = d2[iu]
    ss_total = vals.sum() / n
    same = group_ids[iu[0]] == group_ids[iu[1]]
    ss_within = 0.0
    for g in range(n_groups):
        in_g = same & (group_ids[iu[0]] == g)
        ss_within += vals[in_g].sum() / group_sizes[g]
    ss_among = ss_total - ss_within
    a = n_groups
    if ss_within <= 0:
        return math.inf
    return (ss_among / (a - 1)) / (ss_within / (n - a))


def permanova(dmat, groups=None, n_permutations=9999, seed=0):
    """Permutational multivariate analysis of variance on distances.

    pseudo-F = (SS_among / (a - 1)) / (SS_within / (n - a)) computed
    from squared distances, with SS_total = (1/n) * sum_{i<j} d_ij^2
    and SS_within summing (1/n_g) * sum_{i<j in g} d_ij^2 per group;
    significance by permuting group labels (exact enumeration when
    n_permutations >= n!). Perfect separation (zero within-group sum)
    yields an infinite pseudo-F sentinel; permuted statistics compare
    with >= so the p-value still counts permutations that also separate
    perfectly.

    Parameters
    ----------
    dmat : DistanceMatrix or square array
        Complete (NaN-free) distance matrix.
    groups : sequence, optional
        Group label per specimen (defaults to dmat.groups).

    Returns
    -------
    result : dict
        statistic (pseudo-F, may be inf), p_value, n_permutations,
        exact flag, seed, n_groups.

    Raises
    ------
    SingleGroupError, EmptyGroupError, ValueError
    """
    D = np.asarray(dmat, dtype=float)
    D = check_square_matrix(D, "distance matrix")
    n = D.shape[0]
    if groups is None and isinstance(dmat, DistanceMatrix):
        groups = dmat.groups
    if groups is None:
        raise ValueError("group assignments are required")
    groups = [str(g) for g in groups]
    if len(groups) != n:
        raise ValueError("group count does not match matrix size")
    if not np.isfinite(D).all():
        raise ValueError("PERMANOVA requires a complete distance matrix")
    levels = sorted(set(groups))
    if len(levels) < 2:
        raise SingleGroupError("need at least two groups")
    gid = np.asarray([levels.index(g) for g in groups])
    sizes = np.bincount(gid, minlength=len(levels)).astype(float)
    if (sizes == 0).any():
        raise EmptyGroupError("a declared group has no members")
    d2 = D**2
    f_obs = _permanova_f(d2, gid, len(levels), sizes)

    full = math.factorial(n)
    exact = n_permutations >= full
    count = 0
    if exact:
        total = 0
        for perm in iter_permutations(range(n)):
            f = _permanova_f(d2, gid[np.asarray(perm)], len(levels), sizes)
            total += 1
            if f >= f_obs - 1e-12 or (math.isinf(f) and math.isinf(f_obs)):
                count += 1
        p_value = count / total
        performed = total
    else:
        rng = np.random.default_rng(seed)
        for _ in range(n_permutations):
            f = _permanova_f(d2, gid[rng.permutation(n)], len(levels), sizes)
            if f >= f_obs - 1e-12 or (math.isinf(f) and math.isinf(f_obs)):
                count += 1
        p_value = (1 + count) / (1 + n_permutations)
        performed = n_permutations
    return {
        "statistic": float(f_obs),
        "p_value": float(p_value),
        "n_permutations": int(performed),
        "exact": bool(exact),
        "seed": int(seed),
        "n_groups": len(levels),
    }


# ----------------------------------------------------------------------
# all-pairs registration driver


def _register_one(args):
    from .registration.pipeline import register_prepared

    i, j, prep_i, prep_j, params = args
    try:
        result = register_prepared(prep_i, prep_j, params)
        return i, j, result.distance, None
    except Exception as exc:  # recorded, not raised: batch continues
        return i, j, math.nan, f"{type(exc).__name__}: {exc}"


def distance_matrix(meshes, labels=None, params=None, groups=None, jobs=1):
    """All-pairs registration distances, symmetrized across directions.

    Every ordered pair (i, j) is registered; the matrix entry is the
    mean of the two directional distances. Per-pair failures are logged
    and leave NaN entries instead of aborting the batch.

    Parameters
    ----------
    meshes : sequence of TriMesh
    labels : sequence of str, optional
    params : RegistrationParams, optional
    groups : sequence, optional
        Stored on the result for downstream PERMANOVA.
    jobs : int
        Worker processes for the pair loop (1 = run inline).

    Returns
    -------
    DistanceMatrix
    """
    from .registration.pipeline import RegistrationParams, prepare_surface

    params = params or RegistrationParams()
    meshes = list(meshes)
    n = len(meshes)
    if n < 2:
        raise ValueError("need at least two meshes")
    labels = [str(i) for i in range(n)] if labels is None else [str(x) for x in labels]
    preps = [prepare_surface(m, params) for m in meshes]
    tasks = [
        (i, j, preps[i], preps[j], params)
        for i in range(n)
        for j in range(n)
        if i != j
    ]
    directed = np.full((n, n), math.nan)
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_register_one, tasks))
    else:
        outcomes = [_register_one(t) for t in tasks]
    for i, j, dist, error in outcomes:
        directed[i, j] = dist
        if error is not None:
            logger.warning("pair (%s, %s) failed: %s", labels[i], labels[j], error)
    sym = 0.5 * (directed + directed.T)
    np.fill_diagonal(sym, 0.0)
    return DistanceMatrix(sym, labels, tuple(groups) if groups is not None else None)
