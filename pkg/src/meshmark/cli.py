"""Command line front end.

Subcommands: landmark, coverage, eigs, match, distmat, stats. Data goes
to files (or stdout with --print where supported); progress and
warnings go to stderr. Every command honors --seed and --config; runs
with identical inputs and configuration produce byte-identical outputs
except for the JSON timestamp field.

Exit codes: 0 success, 1 input/validation error, 2 topology or
precondition error, 3 numerical failure.
"""

import argparse
import csv
import datetime
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import CONFIG_ENV_VAR, load_config
from .errors import MeshmarkError, NumericalError, TopologyError
from .evaluate import (
    DistanceMatrix,
    coverage_curve,
    distance_matrix,
    load_distance_matrix_csv,
    load_groups_csv,
    mantel_test,
    permanova,
    save_distance_matrix_csv,
)
from .geometry import gaussian_curvature, mean_curvature, voronoi_areas
from .kernels import (
    default_bandwidth,
    plain_kernel,
    potential_weights,
    reweighted_kernel,
    localized_eigenfunctions,
    save_matrix_binary,
    save_matrix_csv,
    witten_operator,
)
from .landmarks import (
    GFPSSampler,
    GPLandmarker,
    RandomLandmarker,
    load_landmarks_csv,
    save_landmarks_csv,
)
from .mesh import load_mesh
from .validation import check_vertex_field

logger = logging.getLogger("meshmark")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_TOPOLOGY = 2
EXIT_NUMERICAL = 3


def _classify(exc):
    chain = []
    cur = exc
    while cur is not None:
        chain.append(cur)
        cur = cur.__cause__
    for e in chain:
        if isinstance(e, TopologyError):
            return EXIT_TOPOLOGY
    for e in chain:
        if isinstance(e, NumericalError):
            return EXIT_NUMERICAL
    return EXIT_INPUT


def _load_mesh_checked(path, config):
    mesh = load_mesh(path)
    if mesh.n_vertices > config.max_vertices:
        raise ValueError(
            f"{path}: {mesh.n_vertices} vertices exceed max_vertices="
            f"{config.max_vertices} (dense kernels; raise the limit explicitly)"
        )
    return mesh


def _sampler(config, mesh=None):
    method = config.method
    if method in ("gp", "gp-euc", "gp-nw"):
        variant = {"gp": "reweighted", "gp-euc": "euclidean", "gp-nw": "unweighted"}[method]
        return GPLandmarker(
            n_landmarks=config.n_landmarks,
            bandwidth=config.bandwidth,
            blend=config.blend,
            power=config.power,
            kernel_variant=variant,
            on_exhaustion="truncate",
        )
    if method == "gfps":
        seed_vertex = 0
        if mesh is not None:
            # match the evaluation protocol: seed farthest-point
            # sampling at the first greedy-variance pick
            seed_vertex = int(
                GPLandmarker(
                    n_landmarks=1,
                    bandwidth=config.bandwidth,
                    blend=config.blend,
                    power=config.power,
                )
                .fit(mesh)
                .indices_[0]
            )
        return GFPSSampler(n_landmarks=config.n_landmarks, seed_vertex=seed_vertex)
    if method == "random":
        return RandomLandmarker(n_landmarks=config.n_landmarks, seed=config.seed)
    raise ValueError(f"unknown method {method!r}")


def _timestamp():
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _write_json(path, payload):
    text = json.dumps(payload, indent=2, allow_nan=False)
    if path == "-":
        sys.stdout.write(text + "\n")
    else:
        Path(path).write_text(text + "\n", encoding="utf-8")


def _json_float(x):
    import math

    if x is None or (isinstance(x, float) and not math.isfinite(x)):
        return None
    return float(x)


# ----------------------------------------------------------------------
# subcommands


def cmd_landmark(args, config):
    mesh = _load_mesh_checked(args.mesh, config)
    sampler = _sampler(config, mesh)
    landmarks = sampler.fit(mesh).landmarks_
    if getattr(landmarks, "exhausted", False):
        logger.warning("kernel rank exhausted: %d landmarks returned", len(landmarks))
    save_landmarks_csv(args.output, landmarks, mesh)
    logger.info("wrote %d landmarks to %s", len(landmarks), args.output)
    if args.print_:
        sys.stdout.write(Path(args.output).read_text(encoding="utf-8"))
    return EXIT_OK


def cmd_coverage(args, config):
    mesh = _load_mesh_checked(args.mesh, config)
    observer = load_landmarks_csv(args.observer, mesh=mesh, method="observer")
    methods = [m.strip().lower() for m in args.methods.split(",") if m.strip()]
    m_max = args.max_count or config.n_landmarks
    columns = {}
    for method in methods:
        sub = config
        if method != "random":
            sub = type(config)(**{**config.as_dict(), "method": method})
            lms = _sampler(sub, mesh).fit(mesh).landmarks_
            if len(lms) < m_max:
                raise ValueError(f"{method} produced {len(lms)} < {m_max} landmarks")
            curve = coverage_curve(mesh, observer, lms, m_max=m_max)
            columns[method] = curve.values
        else:
            samples = []
            for k in range(config.n_random_seeds):
                rnd = RandomLandmarker(n_landmarks=m_max, seed=config.seed + k)
                samples.append(
                    coverage_curve(mesh, observer, rnd.fit(mesh).landmarks_, m_max=m_max).values
                )
            samples = np.asarray(samples)
            columns["random_mean"] = samples.mean(axis=0)
            columns["random_std"] = samples.std(axis=0)
    with open(args.output, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["m", *columns.keys()])
        for i in range(m_max):
            writer.writerow([i + 1, *[repr(float(columns[c][i])) for c in columns]])
    logger.info("wrote coverage curves (%d rows) to %s", m_max, args.output)
    return EXIT_OK


def cmd_eigs(args, config):
    mesh = _load_mesh_checked(args.mesh, config)
    n = mesh.n_vertices
    if args.potential:
        with open(args.potential, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if rows and not rows[0][-1].replace(".", "", 1).lstrip("-").isdigit():
            rows = rows[1:]
        values = np.zeros(n)
        for row in rows:
            values[int(row[0])] = float(row[-1])
        potential = check_vertex_field(values, n, "potential")
    else:
        potential = np.zeros(n)
    t = config.bandwidth if config.bandwidth is not None else default_bandwidth(mesh)
    kernel = plain_kernel(mesh, t)
    nu = voronoi_areas(mesh)
    weights = potential_weights(potential, args.epsilon)
    full = reweighted_kernel(kernel, weights, nu)
    operator = witten_operator(full)
    m = min(args.count, n)
    values, vectors = localized_eigenfunctions(operator, m)
    prefix = Path(args.output)
    save_matrix_csv(f"{prefix}_values.csv", values[None, :])
    save_matrix_csv(f"{prefix}_vectors.csv", vectors)
    if args.binary:
        save_matrix_binary(f"{prefix}_vectors.bin", vectors)
    logger.info("wrote %d eigenpairs to %s_values.csv / %s_vectors.csv", m, prefix, prefix)
    return EXIT_OK


def _write_correspondences(path, corr):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index1", "index2"])
        for a, b in corr.pairs:
            writer.writerow([int(a), int(b)])


def _write_surface_map(path, smap):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["vertex", "triangle", "b0", "b1", "b2"])
        for v, (f, bary) in enumerate(zip(smap.face_ids, smap.barycentric)):
            writer.writerow([v, int(f), *[repr(float(b)) for b in bary]])


def cmd_match(args, config):
    from .registration.pipeline import prepare_surface, register_prepared

    mesh1 = _load_mesh_checked(args.mesh1, config)
    mesh2 = _load_mesh_checked(args.mesh2, config)
    params = config.registration_params()
    prep1 = prepare_surface(mesh1, params)
    prep2 = prepare_surface(mesh2, params)
    result = register_prepared(prep1, prep2, params)
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_correspondences(outdir / "correspondences.csv", result.correspondences)
    _write_surface_map(outdir / "map.csv", result.surface_map)
    summary = {
        "n_matches": int(len(result.correspondences)),
        "n_landmarks": [int(len(prep1.landmarks)), int(len(prep2.landmarks))],
        "distortion_bound": float(config.distortion_bound),
        "candidates": int(config.candidates),
        "procrustes_distance": _json_float(result.distance),
        "parametrization_energy": [
            _json_float(prep1.param.energy),
            _json_float(prep2.param.energy),
        ],
        "map_energy": _json_float(result.surface_map.energy),
        "config": {k: (v if v is None else (float(v) if isinstance(v, float) else v)) for k, v in config.as_dict().items()},
        "timestamp": _timestamp(),
    }
    _write_json(outdir / "summary.json", summary)
    logger.info(
        "matched %d landmarks, distance %.6g; artifacts in %s",
        len(result.correspondences),
        result.distance,
        outdir,
    )
    return EXIT_OK


def cmd_distmat(args, config):
    paths = []
    for entry in args.meshes:
        p = Path(entry)
        if p.is_dir():
            paths.extend(sorted(q for q in p.iterdir() if q.suffix.lower() in (".off", ".ply", ".obj")))
        else:
            paths.append(p)
    if len(paths) < 2:
        raise ValueError("need at least two meshes")
    labels = [p.stem for p in paths]
    meshes = [_load_mesh_checked(p, config) for p in paths]
    groups = None
    if args.groups:
        mapping = load_groups_csv(args.groups)
        try:
            groups = [mapping[lab] for lab in labels]
        except KeyError as exc:
            raise ValueError(f"groups file lacks label {exc.args[0]!r}") from exc
    dm = distance_matrix(
        meshes,
        labels=labels,
        params=config.registration_params(),
        groups=groups,
        jobs=config.jobs,
    )
    save_distance_matrix_csv(args.output, dm)
    n_missing = int(np.isnan(dm.entries).sum())
    if n_missing:
        logger.warning("%d entries missing after failures", n_missing)
    logger.info("wrote %dx%d distance matrix to %s", dm.n, dm.n, args.output)
    return EXIT_OK


def cmd_stats(args, config):
    payload = {"timestamp": _timestamp()}
    ran_any = False
    if args.mantel:
        d1 = load_distance_matrix_csv(args.mantel[0])
        d2 = load_distance_matrix_csv(args.mantel[1])
        res = mantel_test(d1, d2, n_permutations=config.n_permutations, seed=config.seed)
        payload["mantel"] = {
            "statistic": _json_float(res["statistic"]),
            "p_value": _json_float(res["p_value"]),
            "n_permutations": res["n_permutations"],
            "exact": res["exact"],
            "seed": res["seed"],
        }
        ran_any = True
    if args.permanova:
        dm = load_distance_matrix_csv(args.permanova)
        if args.groups:
            mapping = load_groups_csv(args.groups)
            try:
                groups = [mapping[lab] for lab in dm.labels]
            except KeyError as exc:
                raise ValueError(f"groups file lacks label {exc.args[0]!r}") from exc
        elif dm.groups is not None:
            groups = dm.groups
        else:
            raise ValueError("--permanova requires --groups")
        res = permanova(dm, groups, n_permutations=config.n_permutations, seed=config.seed)
        import math

        payload["permanova"] = {
            "statistic": _json_float(res["statistic"]),
            "statistic_infinite": bool(math.isinf(res["statistic"])),
            "p_value": _json_float(res["p_value"]),
            "n_permutations": res["n_permutations"],
            "exact": res["exact"],
            "seed": res["seed"],
            "n_groups": res["n_groups"],
        }
        ran_any = True
    if not ran_any:
        raise ValueError("nothing to do: pass --mantel and/or --permanova")
    _write_json(args.output, payload)
    return EXIT_OK


# ----------------------------------------------------------------------
# parser


def build_parser():
    parser = argparse.ArgumentParser(
        prog="meshmark",
        description="Curvature-weighted Gaussian-process landmarking, "
        "surface registration, and shape statistics on triangle meshes.",
    )
    parser.add_argument("--version", action="version", version=f"meshmark {__version__}")
    parser.add_argument(
        "--config",
        default=None,
        help=f"flat key=value config file (default: ${CONFIG_ENV_VAR})",
    )
    parser.add_argument("--seed", type=int, default=None, help="global RNG seed")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("landmark", help="generate landmarks for one mesh")
    p.add_argument("mesh")
    p.add_argument("-o", "--output", required=True, help="landmark CSV path")
    p.add_argument("--method", default=None, choices=["gp", "gp-euc", "gp-nw", "gfps", "random"])
    p.add_argument("--count", type=int, default=None, help="number of landmarks")
    p.add_argument("--bandwidth", default=None, help="kernel bandwidth or 'auto'")
    p.add_argument("--blend", type=float, default=None)
    p.add_argument("--power", type=float, default=None)
    p.add_argument("--print", dest="print_", action="store_true", help="echo CSV to stdout")
    p.set_defaults(func=cmd_landmark)

    p = sub.add_parser("coverage", help="observer-coverage curves per method")
    p.add_argument("mesh")
    p.add_argument("observer", help="observer landmark CSV (indices or coordinates)")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--methods", default="gp,gfps,random")
    p.add_argument("--max-count", type=int, default=None)
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("eigs", help="export localized eigenfunctions of the normalized kernel operator")
    p.add_argument("mesh")
    p.add_argument("-o", "--output", required=True, help="output path prefix")
    p.add_argument("--potential", default=None, help="CSV of (vertex, value) potentials")
    p.add_argument("--epsilon", type=float, default=0.1, help="potential weight scale")
    p.add_argument("--count", type=int, default=4, help="number of eigenpairs")
    p.add_argument("--bandwidth", default=None)
    p.add_argument("--binary", action="store_true", help="also write raw binary eigenvectors")
    p.set_defaults(func=cmd_eigs)

    p = sub.add_parser("match", help="register a pair of disk-type meshes")
    p.add_argument("mesh1")
    p.add_argument("mesh2")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--candidates", type=int, default=None)
    p.add_argument("--distortion-bound", type=float, default=None)
    p.add_argument("--bandwidth", default=None)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("distmat", help="all-pairs registration distance matrix")
    p.add_argument("meshes", nargs="+", help="mesh files or a directory")
    p.add_argument("-o", "--output", required=True, help="distance matrix CSV")
    p.add_argument("--groups", default=None, help="two-column (label, group) CSV")
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=cmd_distmat)

    p = sub.add_parser("stats", help="Mantel / PERMANOVA on distance matrices")
    p.add_argument("--mantel", nargs=2, metavar=("D1", "D2"), default=None)
    p.add_argument("--permanova", default=None, metavar="D")
    p.add_argument("--groups", default=None)
    p.add_argument("--permutations", type=int, default=None)
    p.add_argument("-o", "--output", required=True, help="JSON path or '-'")
    p.set_defaults(func=cmd_stats)

    return parser


def _config_overrides(args):
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    for attr, key in (
        ("method", "method"),
        ("count", "n_landmarks"),
        ("blend", "blend"),
        ("power", "power"),
        ("candidates", "candidates"),
        ("distortion_bound", "distortion_bound"),
        ("permutations", "n_permutations"),
        ("jobs", "jobs"),
    ):
        if getattr(args, attr, None) is not None:
            overrides[key] = getattr(args, attr)
    bandwidth = getattr(args, "bandwidth", None)
    if bandwidth is not None:
        overrides["bandwidth"] = None if str(bandwidth).lower() == "auto" else float(bandwidth)
    return overrides


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_config(args.config, _config_overrides(args))
        return args.func(args, config)
    except MeshmarkError as exc:
        code = _classify(exc)
        logger.error("%s", exc)
        return code
    except (ValueError, OSError, KeyError, IndexError) as exc:
        logger.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
