"""End-to-end pairwise registration.

prepare_surface() computes everything registration needs from a single
mesh (unit-area normalization, greedy landmarks, flattening, spectral
descriptors) so batch drivers can reuse per-mesh work across pairs;
register_prepared() matches two prepared surfaces and interpolates the
retained correspondences into a full surface map with its alignment
residual. Failures carry the pipeline stage that produced them.
"""

import logging
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ..errors import MeshmarkError
from ..kernels import KernelParams
from ..landmarks import GPLandmarker
from .descriptors import wks
from .matching import bd_filter, candidate_matches
from .mapping import interpolate_map
from .parametrize import aiap_parametrize

logger = logging.getLogger(__name__)


class RegistrationError(MeshmarkError):
    """A pipeline stage failed; the original error is chained as __cause__."""

    def __init__(self, stage, original):
        super().__init__(f"registration stage '{stage}' failed: {original}")
        self.stage = stage


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except MeshmarkError as exc:
        raise RegistrationError(name, exc) from exc


@dataclass(frozen=True)
class RegistrationParams:
    """Tuning knobs of the registration pipeline.

    n_landmarks / candidates / distortion_bound default to the standard
    configuration (40 landmarks, 2 candidates each, bound 1.5).
    """

    n_landmarks: int = 40
    candidates: int = 2
    distortion_bound: float = 1.5
    bandwidth: float | None = None
    blend: float = 0.5
    power: float = 1.0
    kernel_variant: str = "reweighted"
    wks_eigs: int = 100
    wks_energies: int = 100
    seed: int = 0


@dataclass(frozen=True)
class SurfacePrep:
    """Per-mesh artifacts reused across pair registrations."""

    mesh: "TriMesh"  # unit-area normalized copy
    landmarks: "LandmarkSet"
    param: "PlanarParam"
    descriptor: "WksDescriptor"
    scale: float  # factor applied to reach unit area


@dataclass(frozen=True)
class RegistrationResult:
    surface_map: "SurfaceMap"
    correspondences: "CorrespondenceSet"
    distance: float

    def summary(self):
        return {
            "n_matches": int(len(self.correspondences)),
            "n_candidates": int(self.correspondences.n_candidates),
            "distortion_bound": float(self.correspondences.distortion_bound),
            "map_energy": float(self.surface_map.energy),
            "procrustes_distance": float(self.distance),
        }


def prepare_surface(mesh, params=RegistrationParams()):
    """Normalize to unit area and compute landmarks, flattening, descriptors."""
    scale = 1.0 / np.sqrt(mesh.total_area())
    unit = mesh.scaled(scale)
    sampler = GPLandmarker(
        n_landmarks=params.n_landmarks,
        bandwidth=params.bandwidth,
        blend=params.blend,
        power=params.power,
        kernel_variant=params.kernel_variant,
        on_exhaustion="truncate",
    )
    landmarks = _stage("landmarks", sampler.fit_landmarks, unit)
    if landmarks.exhausted:
        logger.warning(
            "landmarking exhausted at %d of %d", len(landmarks), params.n_landmarks
        )
    param = _stage("parametrize", aiap_parametrize, unit)
    descriptor = _stage("descriptors", wks, unit, params.wks_eigs, params.wks_energies)
    return SurfacePrep(unit, landmarks, param, descriptor, scale)


def register_prepared(prep1, prep2, params=RegistrationParams()):
    """Match two prepared surfaces and interpolate a full map 1 -> 2."""
    from ..evaluate import procrustes_of_map

    cands = _stage(
        "candidates",
        candidate_matches,
        prep1.landmarks,
        prep2.landmarks,
        prep1.descriptor,
        prep2.descriptor,
        params.candidates,
    )
    corr = _stage(
        "consensus",
        bd_filter,
        cands,
        prep1.param,
        prep2.param,
        params.distortion_bound,
        params.seed,
    )
    surface_map = _stage(
        "interpolate", interpolate_map, prep1.param, prep2.param, corr, prep2.mesh
    )
    distance = _stage("procrustes", procrustes_of_map, surface_map, prep1.mesh, prep2.mesh)
    return RegistrationResult(surface_map, corr, float(distance))


def register_pair(mesh1, mesh2, params=RegistrationParams()):
    """Register two raw meshes (convenience wrapper; see register_prepared).

    Returns
    -------
    RegistrationResult
        surface_map, correspondences, and the area-normalized alignment
        distance of the induced map.
    """
    prep1 = prepare_surface(mesh1, params)
    prep2 = prepare_surface(mesh2, params)
    return register_prepared(prep1, prep2, params)


class PairRegistration(BaseEstimator):
    """Estimator wrapper around the pairwise registration pipeline.

    fit(mesh1, mesh2) exposes the retained correspondences, the surface
    map, and the induced alignment distance as attributes.
    """

    def __init__(
        self,
        n_landmarks=40,
        candidates=2,
        distortion_bound=1.5,
        bandwidth=None,
        blend=0.5,
        power=1.0,
        kernel_variant="reweighted",
        wks_eigs=100,
        wks_energies=100,
        seed=0,
    ):
        self.n_landmarks = n_landmarks
        self.candidates = candidates
        self.distortion_bound = distortion_bound
        self.bandwidth = bandwidth
        self.blend = blend
        self.power = power
        self.kernel_variant = kernel_variant
        self.wks_eigs = wks_eigs
        self.wks_energies = wks_energies
        self.seed = seed

    def _params(self):
        return RegistrationParams(
            n_landmarks=self.n_landmarks,
            candidates=self.candidates,
            distortion_bound=self.distortion_bound,
            bandwidth=self.bandwidth,
            blend=self.blend,
            power=self.power,
            kernel_variant=self.kernel_variant,
            wks_eigs=self.wks_eigs,
            wks_energies=self.wks_energies,
            seed=self.seed,
        )

    def fit(self, mesh1, mesh2):
        result = register_pair(mesh1, mesh2, self._params())
        self.result_ = result
        self.map_ = result.surface_map
        self.correspondences_ = result.correspondences
        self.distance_ = result.distance
        return self
