"""Flat key=value run configuration with CLI override semantics.

A config file holds one ``key = value`` pair per line ('#' comments
allowed). Values given on the command line win over the file, which
wins over the defaults. The default config path can be set with the
MESHMARK_CONFIG environment variable.
"""

import os
from dataclasses import dataclass, fields, replace

CONFIG_ENV_VAR = "MESHMARK_CONFIG"


@dataclass(frozen=True)
class RunConfig:
    """Validated pipeline configuration.

    Defaults follow the standard setup: 40 landmarks, 2 candidates per
    landmark, distortion bound 1.5, 9999 permutations, blend 0.5,
    power 1.
    """

    bandwidth: float | None = None  # None = auto from mesh scale
    blend: float = 0.5
    power: float = 1.0
    n_landmarks: int = 40
    method: str = "gp"
    candidates: int = 2
    distortion_bound: float = 1.5
    wks_eigs: int = 100
    wks_energies: int = 100
    n_permutations: int = 9999
    seed: int = 0
    n_random_seeds: int = 20
    jobs: int = 1
    max_vertices: int = 20000

    def __post_init__(self):
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive or auto")
        if not 0.0 <= self.blend <= 1.0:
            raise ValueError("blend must be in [0, 1]")
        if not self.power > 0:
            raise ValueError("power must be positive")
        if not 1 <= self.n_landmarks:
            raise ValueError("n_landmarks must be >= 1")
        if self.method not in ("gp", "gp-euc", "gp-nw", "gfps", "random"):
            raise ValueError(f"unknown method {self.method!r}")
        if not self.candidates >= 1:
            raise ValueError("candidates must be >= 1")
        if not self.distortion_bound >= 1.0:
            raise ValueError("distortion_bound must be >= 1")
        if not self.n_permutations >= 1:
            raise ValueError("n_permutations must be >= 1")
        if not self.n_random_seeds >= 1:
            raise ValueError("n_random_seeds must be >= 1")
        if not self.jobs >= 1:
            raise ValueError("jobs must be >= 1")
        if not self.max_vertices >= 3:
            raise ValueError("max_vertices must be >= 3")

    def registration_params(self):
        from .registration.pipeline import RegistrationParams

        variant = {"gp": "reweighted", "gp-nw": "unweighted", "gp-euc": "euclidean"}
        return RegistrationParams(
            n_landmarks=self.n_landmarks,
            candidates=self.candidates,
            distortion_bound=self.distortion_bound,
            bandwidth=self.bandwidth,
            blend=self.blend,
            power=self.power,
            kernel_variant=variant.get(self.method, "reweighted"),
            wks_eigs=self.wks_eigs,
            wks_energies=self.wks_energies,
            seed=self.seed,
        )

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(RunConfig)}


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_INT_FIELDS = {
    "n_landmarks",
    "candidates",
    "wks_eigs",
    "wks_energies",
    "n_permutations",
    "seed",
    "n_random_seeds",
    "jobs",
    "max_vertices",
}
_FLOAT_FIELDS = {"blend", "power", "distortion_bound"}


def _parse_value(key, raw):
    raw = raw.strip()
    if key == "bandwidth":
        return None if raw.lower() in ("auto", "none", "") else float(raw)
    if key in _INT_FIELDS:
        return int(raw)
    if key in _FLOAT_FIELDS:
        return float(raw)
    if key == "method":
        return raw.lower()
    raise KeyError(key)


def parse_config_text(text, path="<config>"):
    """Parse flat key=value text into a dict of typed overrides."""
    overrides = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().lower().replace("-", "_")
        if key not in _FIELD_TYPES:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            overrides[key] = _parse_value(key, value)
        except (ValueError, TypeError) as exc:
            raise ValueError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return overrides


def load_config(path=None, overrides=None):
    """Assemble a RunConfig from defaults, a file, and explicit overrides.

    Resolution order (later wins): defaults, MESHMARK_CONFIG file, the
    explicit ``path`` file, ``overrides``.
    """
    merged = {}
    env_path = os.environ.get(CONFIG_ENV_VAR)
    for p in (env_path, path):
        if p:
            with open(p, "r", encoding="utf-8") as fh:
                merged.update(parse_config_text(fh.read(), path=str(p)))
    if overrides:
        merged.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**merged)
