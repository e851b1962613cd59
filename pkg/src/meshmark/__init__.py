"""Curvature-weighted Gaussian-process landmarking and shape statistics on meshes."""

from . import errors
from .geometry import (
    cotan_laplacian,
    gaussian_curvature,
    geodesic_distances,
    mean_curvature,
    voronoi_areas,
)
from .kernels import (
    KernelMatrix,
    KernelParams,
    WittenOperator,
    default_bandwidth,
    localized_eigenfunctions,
    plain_kernel,
    reweighted_kernel,
    weight_function,
    witten_operator,
)
from .landmarks import (
    GFPSSampler,
    GPLandmarker,
    LandmarkSet,
    RandomLandmarker,
    gfps_landmarks,
    gp_landmarks,
    greedy_logdet_ratio,
    random_landmarks,
    uncertainty_field,
)
from .mesh import TriMesh, VertexField, load_mesh, save_off, snap_points_to_vertices

__version__ = "0.1.0"

__all__ = [
    "TriMesh",
    "VertexField",
    "load_mesh",
    "save_off",
    "snap_points_to_vertices",
    "voronoi_areas",
    "gaussian_curvature",
    "mean_curvature",
    "cotan_laplacian",
    "geodesic_distances",
    "KernelMatrix",
    "KernelParams",
    "WittenOperator",
    "plain_kernel",
    "weight_function",
    "reweighted_kernel",
    "witten_operator",
    "localized_eigenfunctions",
    "default_bandwidth",
    "LandmarkSet",
    "gp_landmarks",
    "uncertainty_field",
    "gfps_landmarks",
    "random_landmarks",
    "greedy_logdet_ratio",
    "GPLandmarker",
    "GFPSSampler",
    "RandomLandmarker",
    "errors",
]
