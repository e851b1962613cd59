"""Flip-free planar parametrization of disk-type surfaces.

A convex (Tutte) embedding of the boundary-to-circle problem provides a
provably injective start; an L-BFGS descent on the symmetric isometric
distortion energy

    E(uv) = 1/2 * sum_f area_f * (|J_f|_F^2 + |J_f^{-1}|_F^2)

then improves it with a line search clamped to the step length at which
the first triangle would degenerate, so no iterate ever contains an
inverted triangle. The identity map of a flat mesh attains the minimum
E = 2 * total area. The same machinery minimizes the energy of planar
maps with pinned vertices (used by the landmark interpolation stage).
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from ..errors import FlipRecoveryError
from ..mesh import TriMesh

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 500
_LBFGS_MEMORY = 8
_ARMIJO_C = 1e-4
_STEP_SAFETY = 0.8


@dataclass(frozen=True)
class PlanarParam:
    """A locally injective planar embedding of a disk-type mesh.

    Attributes
    ----------
    uv : ndarray (n, 2)
        Planar vertex positions.
    faces : ndarray (m, 3)
        Triangles (shared with the source mesh).
    boundary : ndarray of int
        Boundary loop vertex indices in traversal order; the polygon
        uv[boundary] bounds the parameter domain.
    energy : float
        Final symmetric distortion energy.
    """

    uv: np.ndarray
    faces: np.ndarray
    boundary: np.ndarray
    energy: float

    def __post_init__(self):
        uv = np.asarray(self.uv, dtype=np.float64)
        uv.setflags(write=False)
        object.__setattr__(self, "uv", uv)

    def domain_diagonal(self):
        """Bounding-box diagonal of the parameter domain."""
        extent = self.uv.max(axis=0) - self.uv.min(axis=0)
        return float(np.hypot(*extent))

    def boundary_polygon(self):
        """Planar boundary polygon, one row per boundary vertex."""
        return self.uv[self.boundary]


# ----------------------------------------------------------------------
# symmetric distortion energy machinery


def rest_frames_from_mesh(mesh):
    """Per-face 2x2 rest matrices (intrinsic triangle shape) and areas.

    Each triangle's 3D shape is expressed in an orthonormal in-plane
    frame so the rest matrix has positive determinant 2*area.
    """
    p0, p1, p2 = mesh.corner_vectors()
    e1 = p1 - p0
    e2 = p2 - p0
    l1 = np.linalg.norm(e1, axis=1)
    x = e1 / l1[:, None]
    normal = np.cross(e1, e2)
    areas = 0.5 * np.linalg.norm(normal, axis=1)
    y = np.cross(normal / np.linalg.norm(normal, axis=1, keepdims=True), x)
    rest = np.empty((len(l1), 2, 2))
    rest[:, 0, 0] = l1
    rest[:, 1, 0] = 0.0
    rest[:, 0, 1] = np.einsum("ij,ij->i", e2, x)
    rest[:, 1, 1] = np.einsum("ij,ij->i", e2, y)
    return rest, areas


def rest_frames_from_plane(uv, faces):
    """Rest matrices and areas for a planar (already flat) source."""
    e1 = uv[faces[:, 1]] - uv[faces[:, 0]]
    e2 = uv[faces[:, 2]] - uv[faces[:, 0]]
    rest = np.stack([e1, e2], axis=2)  # columns are edge vectors
    areas = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    if (areas <= 0).any():
        raise ValueError("planar source contains non-positively oriented triangles")
    return rest, areas


class SymmetricDistortion:
    """Energy, gradient, and flip-aware line-search bound for a fixed mesh."""

    def __init__(self, rest, faces, areas):
        self.faces = faces
        self.areas = areas
        self.rest_inv = np.linalg.inv(rest)
        self.total_area = float(areas.sum())

    def edge_matrices(self, uv):
        e1 = uv[self.faces[:, 1]] - uv[self.faces[:, 0]]
        e2 = uv[self.faces[:, 2]] - uv[self.faces[:, 0]]
        return np.stack([e1, e2], axis=2)

    def jacobians(self, uv):
        return self.edge_matrices(uv) @ self.rest_inv

    def dets(self, uv):
        J = self.jacobians(uv)
        return J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]

    def energy(self, uv):
        J = self.jacobians(uv)
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        if (det <= 0).any():
            return np.inf
        s = np.einsum("fij,fij->f", J, J)
        return float(0.5 * np.sum(self.areas * s * (1.0 + det**-2)))

    def energy_and_grad(self, uv, free_mask=None):
        J = self.jacobians(uv)
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        if (det <= 0).any():
            return np.inf, None
        s = np.einsum("fij,fij->f", J, J)
        energy = float(0.5 * np.sum(self.areas * s * (1.0 + det**-2)))
        cof = np.empty_like(J)
        cof[:, 0, 0] = J[:, 1, 1]
        cof[:, 0, 1] = -J[:, 1, 0]
        cof[:, 1, 0] = -J[:, 0, 1]
        cof[:, 1, 1] = J[:, 0, 0]
        dpsi = (
            (1.0 + det**-2)[:, None, None] * J
            - (s * det**-3)[:, None, None] * cof
        )
        dU = self.areas[:, None, None] * (
            dpsi @ np.transpose(self.rest_inv, (0, 2, 1))
        )
        grad = np.zeros_like(uv)
        np.add.at(grad, self.faces[:, 1], dU[:, :, 0])
        np.add.at(grad, self.faces[:, 2], dU[:, :, 1])
        np.add.at(grad, self.faces[:, 0], -(dU[:, :, 0] + dU[:, :, 1]))
        if free_mask is not None:
            grad[~free_mask] = 0.0
        return energy, grad

    def max_step(self, uv, direction):
        """Largest step along direction before any triangle degenerates."""
        U = self.edge_matrices(uv)
        d1 = direction[self.faces[:, 1]] - direction[self.faces[:, 0]]
        d2 = direction[self.faces[:, 2]] - direction[self.faces[:, 0]]
        a = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        b = (
            U[:, 0, 0] * d2[:, 1]
            + d1[:, 0] * U[:, 1, 1]
            - U[:, 0, 1] * d2[:, 0]
            - d1[:, 1] * U[:, 1, 0]
        )
        c = U[:, 0, 0] * U[:, 1, 1] - U[:, 0, 1] * U[:, 1, 0]
        alpha = np.inf
        lin = np.abs(a) < 1e-300
        with np.errstate(divide="ignore", invalid="ignore"):
            roots_lin = np.where((lin) & (b < 0), -c / b, np.inf)
            disc = b * b - 4.0 * a * c
            sq = np.sqrt(np.maximum(disc, 0.0))
            r1 = (-b - sq) / (2.0 * a)
            r2 = (-b + sq) / (2.0 * a)
        quad = ~lin & (disc >= 0)
        candidates = np.concatenate(
            [
                roots_lin,
                np.where(quad & (r1 > 0), r1, np.inf),
                np.where(quad & (r2 > 0), r2, np.inf),
            ]
        )
        positive = candidates[candidates > 0]
        if positive.size:
            alpha = float(positive.min())
        return alpha

    def minimize(self, uv0, free_mask=None, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
        """Monotone L-BFGS descent; never crosses a triangle flip.

        Returns (uv, energy, n_iterations). The energy sequence is
        nonincreasing; terminates when the relative decrease drops
        below tol or at max_iter.
        """
        uv = uv0.copy()
        energy, grad = self.energy_and_grad(uv, free_mask)
        if not np.isfinite(energy):
            raise FlipRecoveryError("initial configuration contains flipped triangles")
        s_list, y_list = [], []
        iterations = 0
        for iterations in range(1, max_iter + 1):
            direction = -self._lbfgs_direction(grad, s_list, y_list)
            if np.sum(direction * grad) >= 0:
                s_list, y_list = [], []
                direction = -grad
            gd = float(np.sum(direction * grad))
            if gd == 0.0:
                break
            alpha = min(1.0, _STEP_SAFETY * self.max_step(uv, direction))
            new_energy = np.inf
            for _ in range(40):
                trial = uv + alpha * direction
                new_energy = self.energy(trial)
                if new_energy <= energy + _ARMIJO_C * alpha * gd:
                    break
                alpha *= 0.5
            else:
                break
            _, new_grad = self.energy_and_grad(trial, free_mask)
            s_list.append((trial - uv).copy())
            y_list.append(new_grad - grad)
            if len(s_list) > _LBFGS_MEMORY:
                s_list.pop(0)
                y_list.pop(0)
            uv, grad = trial, new_grad
            decrease = (energy - new_energy) / max(abs(energy), 1e-300)
            energy = new_energy
            if decrease < tol:
                break
        return uv, energy, iterations

    @staticmethod
    def _lbfgs_direction(grad, s_list, y_list):
        q = grad.copy()
        alphas = []
        for s, y in zip(reversed(s_list), reversed(y_list)):
            sy = float(np.sum(s * y))
            if sy <= 1e-300:
                alphas.append((0.0, 0.0))
                continue
            rho = 1.0 / sy
            a = rho * float(np.sum(s * q))
            q -= a * y
            alphas.append((rho, a))
        if s_list:
            s, y = s_list[-1], y_list[-1]
            yy = float(np.sum(y * y))
            sy = float(np.sum(s * y))
            if yy > 0 and sy > 0:
                q *= sy / yy
        for (rho, a), s, y in zip(reversed(alphas), s_list, y_list):
            if rho == 0.0:
                continue
            b = rho * float(np.sum(y * q))
            q += (a - b) * s
        return q


# ----------------------------------------------------------------------
# Tutte initialization and the public entry point


def tutte_embedding(mesh):
    """Uniform-weight convex-boundary (Tutte) disk embedding.

    The single boundary loop maps to a circle by cumulative arc length
    (radius chosen so the disk area matches the surface area); interior
    vertices solve the uniform Laplace equation. Injective for a valid
    disk triangulation.
    """
    mesh.require_disk()
    (loop,) = mesh.boundary_loops()
    pts = mesh.vertices[loop]
    seg = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
    cumulative = np.concatenate([[0.0], np.cumsum(seg[:-1])])
    theta = 2.0 * np.pi * cumulative / seg.sum()
    radius = np.sqrt(mesh.total_area() / np.pi)
    boundary_uv = radius * np.column_stack([np.cos(theta), np.sin(theta)])

    n = mesh.n_vertices
    interior = np.setdiff1d(np.arange(n), loop)
    uv = np.zeros((n, 2))
    uv[loop] = boundary_uv
    if interior.size:
        adj = mesh.adjacency.astype(np.float64)
        deg = np.asarray(adj.sum(axis=1)).ravel()
        lap = sparse.diags(deg) - adj
        A = lap[np.ix_(interior, interior)].tocsc()
        B = -lap[np.ix_(interior, loop)] @ boundary_uv
        uv[interior] = np.column_stack(
            [spsolve(A, B[:, 0]), spsolve(A, B[:, 1])]
        )
    # orient so all triangles are positively oriented in the plane
    e1 = uv[mesh.triangles[:, 1]] - uv[mesh.triangles[:, 0]]
    e2 = uv[mesh.triangles[:, 2]] - uv[mesh.triangles[:, 0]]
    signed = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    if (signed < 0).all():
        uv[:, 0] *= -1.0
        signed = -signed
    if (signed <= 0).any():
        raise FlipRecoveryError(
            f"Tutte embedding produced {int((signed <= 0).sum())} non-positive triangles"
        )
    return uv, loop


def aiap_parametrize(mesh, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """As-isometric-as-possible flattening of a disk-type surface.

    Tutte initialization followed by monotone flip-free descent on the
    symmetric distortion energy (free boundary). The result contains no
    inverted triangles; a flat input reproduces itself up to a rigid
    motion with energy 2 * total area.

    Parameters
    ----------
    mesh : TriMesh
        Disk-type surface.
    tol : float
        Relative energy-decrease stopping threshold.
    max_iter : int
        Iteration cap.

    Returns
    -------
    PlanarParam

    Raises
    ------
    NotDiskTypeError
        Mesh is closed, has handles, or extra boundary loops.
    FlipRecoveryError
        No flip-free start could be produced.
    """
    uv0, loop = tutte_embedding(mesh)
    rest, areas = rest_frames_from_mesh(mesh)
    problem = SymmetricDistortion(rest, mesh.triangles, areas)
    uv, energy, n_iter = problem.minimize(uv0, tol=tol, max_iter=max_iter)
    if (problem.dets(uv) <= 0).any():
        raise FlipRecoveryError("descent returned a flipped configuration")
    logger.debug("parametrization: %d iterations, energy %.6g", n_iter, energy)
    return PlanarParam(uv, mesh.triangles, loop, energy)
