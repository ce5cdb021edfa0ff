"""Command-line interface.

Subcommands: ``generate`` (synthetic problems), ``solve`` (MAP estimate),
``sample`` (optimize then draw tempered posterior samples), ``evaluate``
(grade an estimate against ground truth), ``bench`` (parameter sweeps to
CSV).  All machine-readable output is JSON with a ``schema_version`` field
and stable key order; pose files use the g2o text format.

No configuration is read from environment variables; every run is fully
determined by its flags (the ``POSESYNC_BACKEND`` variable selects the
compute backend but changes results only at floating-point reduction
level, and the active backend is echoed in every report).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, kernels, metrics, synth
from .baselines import mst_propagate, pgd
from .g2o_io import load_g2o, save_g2o, save_samples
from .graph import Estimate, PoseGraph, graph_consistency, identity_estimate
from .model import ModelParams, potential
from .quat import normalize
from .tgmcmc import RunReport, SamplerConfig, optimize, sample_posterior

DEFAULT_LAMBDA = 350.0
DEFAULT_SIGMA2 = 0.01
DEFAULT_H = 0.004
DEFAULT_C = 1000.0
DEFAULT_ITERS = 500
DEFAULT_BETA = 1000.0
DEFAULT_OPT_ITERS = 400
DEFAULT_SAMPLES = 40
DEFAULT_THIN = 10


def _positive_float(text: str) -> float:
    value = float(text)
    if value <= 0.0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {text}")
    return value


def _nodes_arg(text: str) -> int:
    value = int(text)
    if value < 2:
        raise argparse.ArgumentTypeError(f"a pose graph needs at least 2 nodes, got {text}")
    return value


def _samples_arg(text: str) -> int:
    value = int(text)
    if value < 2:
        raise argparse.ArgumentTypeError(f"uncertainty statistics need at least 2 samples, got {text}")
    return value


def _unit_interval(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {text}")
    return value


def _lambda_arg(text: str) -> np.ndarray | None:
    """Concentration magnitudes: 'none', one value, or three comma-separated."""
    if text.strip().lower() == "none":
        return None
    parts = [float(p) for p in text.split(",")]
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected one or three comma-separated magnitudes")
    if any(p < 0 for p in parts):
        raise argparse.ArgumentTypeError("concentration magnitudes must be non-negative")
    return -np.asarray(parts, dtype=float)


def _grid_arg(text: str) -> list[float]:
    return [float(p) for p in text.split(",")]


def _emit(obj: dict) -> None:
    print(json.dumps(obj))


def _out_paths(out: str, suffix: str = "") -> tuple[Path, Path]:
    """Split an --out value into (pose file, report file) paths."""
    raw = Path(out)
    prefix = raw.with_suffix("") if raw.suffix == ".g2o" else raw
    stem = f"{prefix}{suffix}" if suffix else str(prefix)
    return Path(f"{stem}.g2o"), Path(f"{prefix}.report.json")


def _model_params(args: argparse.Namespace) -> ModelParams:
    lam = args.lam if args.lam is not None else -DEFAULT_LAMBDA * np.ones(3)
    return ModelParams(data_lambda=lam, sigma2=args.sigma2)


def _initial_estimate(kind: str, graph: PoseGraph, seed: int) -> Estimate:
    if kind == "mst":
        return mst_propagate(graph)
    if kind == "identity":
        return identity_estimate(graph.n)
    if kind == "random":
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), 1])))
        est = Estimate(normalize(rng.standard_normal((graph.n, 4))), rng.standard_normal((graph.n, 3)))
        est.q[0] = (1.0, 0.0, 0.0, 0.0)
        est.t[0] = 0.0
        return est
    raise ValueError(f"unknown init {kind!r}")


# ---------------------------------------------------------------------------
# Subcommands.
# ---------------------------------------------------------------------------


def cmd_generate(args: argparse.Namespace) -> int:
    graph = synth.generate(
        n=args.nodes,
        completeness=args.completeness,
        noise_lambda=args.lam,
        noise_sigma2=args.sigma2,
        outlier_ratio=args.outliers,
        seed=args.seed,
        scene_scale=args.scene_scale,
    )
    graph_file = f"{args.out}.g2o"
    truth_file = f"{args.out}.gt.g2o"
    save_g2o(graph_file, graph=graph)
    save_g2o(truth_file, poses=graph.ground_truth)
    _emit(
        {
            "schema_version": 1,
            "command": "generate",
            "nodes": graph.n,
            "edges": graph.m,
            "outliers": int(round(args.outliers * graph.m)),
            "seed": args.seed,
            "graph_file": graph_file,
            "truth_file": truth_file,
        }
    )
    return 0


def _report_json(report: RunReport, extra: dict | None = None) -> dict:
    doc = report.to_dict()
    if extra:
        doc.update(extra)
    return doc


def cmd_solve(args: argparse.Namespace) -> int:
    graph, _ = load_g2o(args.graph)
    if graph.m == 0:
        print(f"error: {args.graph} contains no measurement edges", file=sys.stderr)
        return 1
    params = _model_params(args)
    init = _initial_estimate(args.init, graph, args.seed)
    config = SamplerConfig(h=args.h, c=args.c, iterations=args.iters, seed=args.seed)
    if args.solver == "tgmcmc":
        result = optimize(graph, params, config, init)
        estimate, report = result.estimate, result.report
    elif args.solver == "pgd":
        estimate, report = pgd(graph, params, init, args.iters, args.pgd_step or 0.5 * args.h)
        report.seed = args.seed
    else:  # mst
        t0 = time.perf_counter()
        estimate = mst_propagate(graph)
        u = potential(graph, estimate, params)
        report = RunReport(
            solver="mst",
            iterations=0,
            u_trace=np.empty(0),
            best_u=u,
            best_iteration=0,
            final_u=u,
            wall_time_s=time.perf_counter() - t0,
            seed=args.seed,
            backend=kernels.active_backend(),
            config={},
        )
    pose_file, report_file = _out_paths(args.out)
    save_g2o(pose_file, poses=estimate)
    doc = _report_json(
        report,
        {
            "g_c": graph_consistency(graph, estimate),
            "estimate_file": str(pose_file),
            "graph_file": args.graph,
        },
    )
    report_file.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    _emit(doc)
    return 0


def cmd_sample(args: argparse.Namespace) -> int:
    graph, _ = load_g2o(args.graph)
    if graph.m == 0:
        print(f"error: {args.graph} contains no measurement edges", file=sys.stderr)
        return 1
    params = _model_params(args)
    init = _initial_estimate(args.init, graph, args.seed)
    opt_config = SamplerConfig(h=args.h, c=args.c, iterations=args.opt_iters, seed=args.seed)
    opt = optimize(graph, params, opt_config, init)
    sample_config = SamplerConfig(
        h=args.h,
        c=args.c,
        beta=args.beta,
        iterations=args.opt_iters,
        seed=args.seed,
        thin=args.thin,
        reset_momenta=args.reset_momenta,
    )
    result = sample_posterior(graph, params, sample_config, opt.state, args.samples)
    stats = metrics.uncertainty_stats(result.samples_q, result.samples_t)

    mean_file = f"{args.out}.mean.g2o"
    samples_file = f"{args.out}.samples.g2o"
    uncertainty_file = f"{args.out}.uncertainty.json"
    mean_est = Estimate(stats["rotation_mean"], stats["translation_mean"])
    save_g2o(mean_file, poses=mean_est)
    save_samples(samples_file, result.samples_q, result.samples_t)
    doc = {
        "schema_version": 1,
        "command": "sample",
        "nodes": graph.n,
        "n_samples": args.samples,
        "thin": args.thin,
        "beta": args.beta,
        "seed": args.seed,
        "backend": kernels.active_backend(),
        "version": __version__,
        "optimize": _report_json(opt.report),
        "rotation_mean": stats["rotation_mean"].tolist(),
        "rotation_dispersion": stats["rotation_dispersion"].tolist(),
        "translation_mean": stats["translation_mean"].tolist(),
        "translation_cov": stats["translation_cov"].tolist(),
    }
    Path(uncertainty_file).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    _emit(
        {
            "schema_version": 1,
            "command": "sample",
            "mean_file": mean_file,
            "samples_file": samples_file,
            "uncertainty_file": uncertainty_file,
            "n_samples": args.samples,
            "map_u": opt.report.best_u,
            "mean_dispersion": float(np.mean(stats["rotation_dispersion"])),
        }
    )
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    _, est = load_g2o(args.estimate)
    if est is None:
        print(f"error: {args.estimate} contains no vertices", file=sys.stderr)
        return 1
    _, truth = load_g2o(args.truth)
    if truth is None:
        print(f"error: {args.truth} contains no vertices", file=sys.stderr)
        return 1
    graph, _ = load_g2o(args.graph)
    if not (est.n == truth.n == graph.n):
        print(
            f"error: node counts differ (estimate {est.n}, truth {truth.n}, graph {graph.n})",
            file=sys.stderr,
        )
        return 1
    _emit(
        {
            "schema_version": 1,
            "mre_rad": metrics.mean_rotation_error(est, truth),
            "mte": metrics.mean_translation_error(est, truth),
            "g_c": graph_consistency(graph, est),
        }
    )
    return 0


_DEFAULT_GRIDS = {
    "noise": [350.0, 500.0, 700.0, 900.0],
    "completeness": [0.2, 0.4, 0.6, 0.8],
    "outliers": [0.0, 0.05, 0.1, 0.2],
}


def cmd_bench(args: argparse.Namespace) -> int:
    config = SamplerConfig(h=args.h, c=args.c, iterations=args.iters)
    common = dict(
        n=args.nodes,
        completeness=args.completeness,
        lambda_mag=args.lam_mag,
        sigma2=args.sigma2,
        seeds=args.seeds,
        config=config,
    )
    if args.sweep == "pgd":
        grid = args.grid or [args.h * f for f in synth._PGD_STEP_FACTORS]
        rows = synth.run_sweep("pgd", grid, **common)
    else:
        grid = args.grid or _DEFAULT_GRIDS[args.sweep]
        rows = synth.run_sweep(args.sweep, grid, **common)
    synth.write_sweep_csv(args.out, rows)
    failures = sum(1 for r in rows if r["error"])
    _emit(
        {
            "schema_version": 1,
            "command": "bench",
            "sweep": args.sweep,
            "rows": len(rows),
            "failures": failures,
            "out": args.out,
        }
    )
    return 0


# ---------------------------------------------------------------------------
# Parser.
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="posesync",
        description="Pose-graph synchronization: MAP estimates and posterior samples "
        "for absolute 6-DoF poses from relative measurements.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="create a synthetic problem with ground truth")
    p.add_argument("--nodes", type=_nodes_arg, required=True, help="number of poses (>= 2)")
    p.add_argument("--completeness", type=_unit_interval, default=0.5,
                   help="fraction of node pairs measured (default 0.5)")
    p.add_argument("--lambda", dest="lam", type=_lambda_arg, default=None,
                   help="rotation noise concentration magnitude(s); 'none' (default) = exact rotations")
    p.add_argument("--sigma2", type=float, default=0.0,
                   help="translation noise variance (default 0 = exact)")
    p.add_argument("--outliers", type=_unit_interval, default=0.0,
                   help="fraction of corrupted edges (default 0)")
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--scene-scale", type=_positive_float, default=1.0)
    p.add_argument("--out", required=True, metavar="PREFIX",
                   help="writes PREFIX.g2o (measurements) and PREFIX.gt.g2o (ground truth)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="estimate absolute poses from a measurement file")
    p.add_argument("--graph", required=True, help="g2o measurement file")
    p.add_argument("--solver", choices=("tgmcmc", "mst", "pgd"), default="tgmcmc")
    p.add_argument("--iters", type=_nonneg_int, default=DEFAULT_ITERS)
    p.add_argument("--h", type=_positive_float, default=DEFAULT_H, help="integration step size")
    p.add_argument("--c", type=_positive_float, default=DEFAULT_C, help="friction strength")
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--init", choices=("mst", "random", "identity"), default="mst")
    p.add_argument("--lambda", dest="lam", type=_lambda_arg, default=None,
                   help=f"model rotation concentrations (default {DEFAULT_LAMBDA:g})")
    p.add_argument("--sigma2", type=_positive_float, default=DEFAULT_SIGMA2,
                   help=f"model translation variance (default {DEFAULT_SIGMA2:g})")
    p.add_argument("--pgd-step", type=_positive_float, default=None,
                   help="PGD step size (default h/2)")
    p.add_argument("--out", required=True, metavar="PATH",
                   help="writes PATH.g2o (estimate) and PATH.report.json")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sample", help="optimize, then draw tempered posterior samples")
    p.add_argument("--graph", required=True)
    p.add_argument("--opt-iters", type=_nonneg_int, default=DEFAULT_OPT_ITERS,
                   help=f"optimization sweeps before sampling (default {DEFAULT_OPT_ITERS})")
    p.add_argument("--beta", type=_positive_float, default=DEFAULT_BETA,
                   help=f"inverse temperature (default {DEFAULT_BETA:g})")
    p.add_argument("--samples", type=_samples_arg, default=DEFAULT_SAMPLES,
                   help=f"retained samples, at least 2 (default {DEFAULT_SAMPLES})")
    p.add_argument("--thin", type=_positive_int, default=DEFAULT_THIN,
                   help=f"sweeps between retained samples and burn-in length (default {DEFAULT_THIN})")
    p.add_argument("--h", type=_positive_float, default=DEFAULT_H)
    p.add_argument("--c", type=_positive_float, default=DEFAULT_C)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--init", choices=("mst", "random", "identity"), default="mst")
    p.add_argument("--lambda", dest="lam", type=_lambda_arg, default=None)
    p.add_argument("--sigma2", type=_positive_float, default=DEFAULT_SIGMA2)
    p.add_argument("--reset-momenta", action="store_true",
                   help="zero the velocities between the optimize and sample phases")
    p.add_argument("--out", required=True, metavar="PREFIX",
                   help="writes PREFIX.mean.g2o, PREFIX.samples.g2o, PREFIX.uncertainty.json")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("evaluate", help="grade an estimate against ground truth")
    p.add_argument("--estimate", required=True, help="g2o file with estimated vertices")
    p.add_argument("--truth", required=True, help="g2o file with ground-truth vertices")
    p.add_argument("--graph", required=True, help="g2o measurement file (for consistency)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench", help="run a parameter sweep and write a CSV")
    p.add_argument("--sweep", choices=("noise", "completeness", "outliers", "pgd"), required=True)
    p.add_argument("--seeds", type=_nonneg_int, default=10)
    p.add_argument("--grid", type=_grid_arg, default=None, help="comma-separated grid values")
    p.add_argument("--nodes", type=_nodes_arg, default=30)
    p.add_argument("--completeness", type=_unit_interval, default=0.5)
    p.add_argument("--lambda", dest="lam_mag", type=_positive_float, default=DEFAULT_LAMBDA,
                   help="base concentration magnitude")
    p.add_argument("--sigma2", type=_positive_float, default=DEFAULT_SIGMA2)
    p.add_argument("--iters", type=_nonneg_int, default=DEFAULT_ITERS)
    p.add_argument("--h", type=_positive_float, default=DEFAULT_H)
    p.add_argument("--c", type=_positive_float, default=DEFAULT_C)
    p.add_argument("--out", required=True, metavar="CSV")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
