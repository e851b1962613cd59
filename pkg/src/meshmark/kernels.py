"""Kernel construction for Gaussian-process landmarking.

Builds the squared-exponential distance kernel, the curvature weight
function, the area-weighted Gram ("reweighted") kernel K' diag(w*nu) K,
and the symmetrically normalized operator D^{-1/2} K_full D^{-1/2}
whose leading eigenvectors localize at the wells of a potential when
the weights take the form exp(-V/eps).
"""

import logging
import struct
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg
from scipy.spatial.distance import pdist, squareform

from .errors import (
    AllZeroCurvatureError,
    ConvergenceError,
    DimensionMismatchError,
    ZeroRowSumError,
)
from .mesh import TriMesh, VertexField, as_field_values
from .validation import check_bandwidth, check_count, check_symmetric

logger = logging.getLogger(__name__)

# Dense symmetric eigensolves below this size; ARPACK above.
DENSE_EIG_LIMIT = 2000


@dataclass(frozen=True)
class KernelParams:
    """Knobs of the curvature-weighted kernel stack.

    Parameters
    ----------
    bandwidth : float or None
        Squared-length-scale t of the distance kernel; None means
        derive it from the mesh via :func:`default_bandwidth`.
    blend : float
        Mixing weight in [0, 1] between the Gaussian-curvature term
        (blend) and the mean-curvature term (1 - blend) of the weight
        function.
    power : float
        Positive exponent applied to the absolute curvatures.
    """

    bandwidth: float | None = None
    blend: float = 0.5
    power: float = 1.0

    def __post_init__(self):
        if self.bandwidth is not None:
            check_bandwidth(self.bandwidth)
        if not 0.0 <= self.blend <= 1.0:
            raise ValueError(f"blend must be in [0, 1], got {self.blend}")
        if not self.power > 0:
            raise ValueError(f"power must be positive, got {self.power}")

    def resolve_bandwidth(self, mesh):
        return self.bandwidth if self.bandwidth is not None else default_bandwidth(mesh)


@dataclass(frozen=True)
class KernelMatrix:
    """Dense symmetric PSD kernel with bandwidth metadata.

    kind is "plain" for the unit-diagonal distance kernel and
    "reweighted" for the Gram form K' diag(w*nu) K.
    """

    entries: np.ndarray
    t: float
    kind: str

    def __post_init__(self):
        entries = check_symmetric(self.entries, "kernel entries")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        if self.kind not in ("plain", "reweighted"):
            raise ValueError(f"kernel kind must be 'plain' or 'reweighted', got {self.kind!r}")
        check_bandwidth(self.t)

    @property
    def n(self):
        return self.entries.shape[0]

    def diagonal(self):
        return np.diag(self.entries).copy()

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


@dataclass(frozen=True)
class WittenOperator:
    """Normalized operator D^{-1/2} K_full D^{-1/2} with its metadata."""

    matrix: np.ndarray
    row_sums: np.ndarray
    kernel: KernelMatrix
    potential: VertexField | None = None

    def __post_init__(self):
        object.__setattr__(self, "matrix", check_symmetric(self.matrix, "operator"))


def default_bandwidth(mesh):
    """Default kernel bandwidth t = (0.08 * bounding-box diagonal)^2.

    On the standard bumpy-sphere fixture this choice puts the mean
    off-diagonal entry of the plain kernel near 4e-3, comfortably
    inside the useful [1e-3, 1e-1] range (see the pilot test in
    tests/test_kernels.py); scaling the mesh by s scales t by s^2, so
    kernel entries are scale-invariant.
    """
    diag = mesh.bbox_diagonal()
    if diag <= 0:
        raise ValueError("mesh bounding box is degenerate")
    return (0.08 * diag) ** 2


def plain_kernel(mesh_or_points, t):
    """Squared-exponential kernel exp(-||x_i - x_j||^2 / (t/2)).

    Parameters
    ----------
    mesh_or_points : TriMesh or (n, 3) array
    t : float
        Positive bandwidth (squared-length units).

    Returns
    -------
    KernelMatrix
        kind="plain", unit diagonal.
    """
    t = check_bandwidth(t)
    pts = mesh_or_points.vertices if isinstance(mesh_or_points, TriMesh) else np.asarray(mesh_or_points, dtype=float)
    d2 = squareform(pdist(pts, "sqeuclidean"))
    entries = np.exp(-d2 / (t / 2.0))
    np.fill_diagonal(entries, 1.0)
    # pdist/squareform guarantees exact symmetry; enforce bit-symmetry anyway
    return KernelMatrix(entries, t, "plain")


def weight_function(kappa, eta, nu, params=KernelParams()):
    """Curvature-driven sampling weight, area-normalized per term.

    w(x_i) = blend * |kappa_i|^p / sum_k |kappa_k|^p nu_k
           + (1 - blend) * |eta_i|^p / sum_k |eta_k|^p nu_k

    so that sum_i w(x_i) nu(x_i) = 1 whenever both terms are present.
    If one curvature field is identically zero its term is dropped with
    a warning and the other term carries total mass 1.

    Parameters
    ----------
    kappa, eta, nu : VertexField or array_like
        Gaussian curvature, mean curvature, and Voronoi areas on one mesh.
    params : KernelParams

    Returns
    -------
    VertexField
        kind="weight", nonnegative.

    Raises
    ------
    AllZeroCurvatureError
        Both curvature fields vanish identically.
    """
    nu = np.asarray(nu, dtype=float)
    n = len(nu)
    kappa = as_field_values(kappa, n, "kappa")
    eta = as_field_values(eta, n, "eta")
    ak = np.abs(kappa) ** params.power
    ae = np.abs(eta) ** params.power
    denom_k = float(ak @ nu)
    denom_e = float(ae @ nu)
    lam = params.blend
    w = np.zeros(n)
    mass = 0.0
    dropped = []
    if lam > 0:
        if denom_k > 0:
            w = w + lam * ak / denom_k
            mass += lam
        else:
            dropped.append("gaussian")
    if lam < 1:
        if denom_e > 0:
            w = w + (1.0 - lam) * ae / denom_e
            mass += 1.0 - lam
        else:
            dropped.append("mean")
    if mass == 0.0:
        raise AllZeroCurvatureError("both curvature terms vanish; weight undefined")
    if dropped:
        warnings.warn(
            f"{' and '.join(dropped)}-curvature term vanishes; "
            "renormalizing the remaining term to total mass 1",
            RuntimeWarning,
            stacklevel=2,
        )
        w = w / mass
    return VertexField(w, "weight")


def potential_weights(potential, eps):
    """Weights exp(-V / eps) for a nonnegative potential field."""
    v = np.asarray(potential, dtype=float)
    if v.min() < 0:
        raise ValueError("potential must be nonnegative")
    if eps <= 0:
        raise ValueError("eps must be positive")
    return VertexField(np.exp(-v / eps), "weight")


def reweighted_kernel(kernel, w, nu):
    """Gram-form kernel K_full = K' diag(w * nu) K.

    Parameters
    ----------
    kernel : KernelMatrix (kind="plain")
    w : VertexField or array_like
        Nonnegative weights.
    nu : VertexField or array_like
        Voronoi areas.

    Returns
    -------
    KernelMatrix
        kind="reweighted"; symmetric PSD by construction.
    """
    K = np.asarray(kernel)
    n = K.shape[0]
    w = as_field_values(w, n, "w")
    nu = as_field_values(nu, n, "nu")
    if len(w) != n or len(nu) != n:
        raise DimensionMismatchError("w/nu lengths do not match the kernel size")
    scale = w * nu
    if scale.min() < 0:
        raise ValueError("w * nu must be nonnegative")
    root = np.sqrt(scale)
    B = K * root[None, :]  # B = K diag(sqrt(w nu)); K_full = B B'
    full = B @ B.T
    full = 0.5 * (full + full.T)
    return KernelMatrix(full, kernel.t, "reweighted")


def witten_operator(kernel_full):
    """Symmetric normalization D^{-1/2} K_full D^{-1/2}.

    D is the diagonal of row sums of K_full; the result is similar to
    the row-stochastic matrix D^{-1} K_full, so its spectrum lies in
    [-1, 1] with top eigenvalue 1 attained by D^{1/2} 1.

    Raises
    ------
    ZeroRowSumError
        Some row of K_full sums to a non-positive value.
    """
    K = np.asarray(kernel_full)
    d = K.sum(axis=1)
    if d.min() <= 0:
        raise ZeroRowSumError(
            f"row {int(np.argmin(d))} of the kernel sums to {d.min():.3e}"
        )
    inv_root = 1.0 / np.sqrt(d)
    mat = K * inv_root[:, None] * inv_root[None, :]
    mat = 0.5 * (mat + mat.T)
    kernel = kernel_full if isinstance(kernel_full, KernelMatrix) else KernelMatrix(K, 1.0, "reweighted")
    return WittenOperator(mat, d, kernel)


def localized_eigenfunctions(operator, m):
    """Leading eigenpairs of the normalized operator.

    Returns the m eigenpairs with eigenvalues closest to 1 (the top of
    the spectrum), i.e. the smallest eigenvalues of the potential-well
    diffusion generator the operator approximates. Eigenvectors are
    unit length, sorted by descending eigenvalue.

    Parameters
    ----------
    operator : WittenOperator
    m : int
        Number of eigenpairs, 1 <= m <= n.

    Returns
    -------
    eigenvalues : ndarray (m,)
    eigenvectors : ndarray (n, m)

    Raises
    ------
    ConvergenceError
        The iterative eigensolver failed to converge.
    """
    A = operator.matrix
    n = A.shape[0]
    m = check_count(m, 1, n, "m")
    if n <= DENSE_EIG_LIMIT or m > n - 2:
        vals, vecs = scipy.linalg.eigh(A)
        order = np.argsort(vals)[::-1][:m]
        return vals[order], vecs[:, order]
    try:
        vals, vecs = scipy.sparse.linalg.eigsh(A, k=m, which="LA")
    except scipy.sparse.linalg.ArpackNoConvergence as exc:
        raise ConvergenceError(f"eigensolver failed to converge: {exc}") from exc
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order]


# ----------------------------------------------------------------------
# matrix export (CSV and raw binary)

_BINARY_HEADER = struct.Struct("<qq")  # rows, cols as little-endian int64


def save_matrix_csv(path, matrix):
    """Write a dense matrix as bare CSV rows (full precision)."""
    np.savetxt(str(path), np.asarray(matrix, dtype=float), delimiter=",", fmt="%.17g")


def load_matrix_csv(path):
    """Read a dense matrix written by :func:`save_matrix_csv`."""
    return np.atleast_2d(np.loadtxt(str(path), delimiter=",", dtype=float))


def save_matrix_binary(path, matrix):
    """Write a dense matrix as int64 dims followed by float64 row-major data."""
    arr = np.ascontiguousarray(np.asarray(matrix, dtype="<f8"))
    with open(str(path), "wb") as fh:
        fh.write(_BINARY_HEADER.pack(arr.shape[0], arr.shape[1]))
        fh.write(arr.tobytes())


def load_matrix_binary(path):
    """Read a matrix written by :func:`save_matrix_binary`."""
    with open(str(path), "rb") as fh:
        header = fh.read(_BINARY_HEADER.size)
        if len(header) != _BINARY_HEADER.size:
            raise ValueError(f"{path}: truncated header")
        rows, cols = _BINARY_HEADER.unpack(header)
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != rows * cols:
        raise ValueError(f"{path}: expected {rows * cols} values, found {data.size}")
    return data.reshape(rows, cols).copy()
