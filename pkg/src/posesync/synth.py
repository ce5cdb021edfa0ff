"""Synthetic pose-graph problems with known ground truth, and parameter
sweeps that grade solvers against that truth.

Randomness is split into six named Philox streams spawned from one seed
(ground-truth rotations, ground-truth translations, edge selection,
rotation noise, translation noise, outliers), so e.g. changing the noise
level re-rolls the noise but leaves the underlying scene and topology
untouched.
"""

from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import bingham, metrics
from .baselines import mst_propagate, pgd
from .graph import Estimate, MeasurementEdge, PoseGraph, graph_consistency
from .model import ModelParams, potential
from .quat import axis_angle, conjugate, frame_matrix, normalize, qmul, rotate_point
from .tgmcmc import SamplerConfig, optimize

__all__ = [
    "SWEEP_FIELDS",
    "generate",
    "run_sweep",
    "sweep_completeness",
    "sweep_noise",
    "sweep_outliers",
    "sweep_pgd",
    "write_sweep_csv",
]


def _streams(seed: int) -> dict[str, np.random.Generator]:
    names = ("gt_rot", "gt_trans", "edges", "rot_noise", "trans_noise", "outliers")
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {name: np.random.Generator(np.random.Philox(s)) for name, s in zip(names, children)}


def generate(
    n: int,
    completeness: float,
    noise_lambda: np.ndarray | None = None,
    noise_sigma2: float = 0.0,
    outlier_ratio: float = 0.0,
    seed: int = 0,
    scene_scale: float = 1.0,
) -> PoseGraph:
    """Random connected pose graph with ground truth attached.

    Ground-truth rotations are uniform on the sphere (node 0 pinned to the
    identity pose), translations Gaussian with ``scene_scale`` spread.  The
    edge set is a random spanning tree plus uniformly chosen extras up to
    ``max(n - 1, round(completeness * n(n-1)/2))`` edges, stored with
    ``i < j`` in lexicographic order.

    Measurements: rotations are exact copies of the true relatives when
    ``noise_lambda`` is None, otherwise Bingham draws centred on them
    (note ``noise_lambda = 0`` means *uniform*, not noiseless); translations
    get isotropic Gaussian noise of variance ``noise_sigma2``.  A fraction
    ``outlier_ratio`` of edges (rounded to a count) is then corrupted by a
    60°–80° rotation about a random axis plus a translation offset of
    uniform length in [0, 1].
    """
    if n < 2:
        raise ValueError("need at least two nodes")
    if not 0.0 <= completeness <= 1.0:
        raise ValueError("completeness must be in [0, 1]")
    if noise_sigma2 < 0.0:
        raise ValueError("noise_sigma2 must be non-negative")
    if not 0.0 <= outlier_ratio <= 1.0:
        raise ValueError("outlier_ratio must be in [0, 1]")
    rngs = _streams(seed)

    q = normalize(rngs["gt_rot"].standard_normal((n, 4)))
    q[0] = (1.0, 0.0, 0.0, 0.0)
    t = scene_scale * rngs["gt_trans"].standard_normal((n, 3))
    t[0] = 0.0
    truth = Estimate(q, t)

    pairs = _edge_pairs(n, completeness, rngs["edges"])
    ei = np.array([p[0] for p in pairs])
    ej = np.array([p[1] for p in pairs])
    m = len(pairs)

    rel_q = qmul(q[ej], conjugate(q[ei]))
    rel_t = t[ej] - rotate_point(rel_q, t[ei])

    if noise_lambda is None:
        meas_q = rel_q.copy()
    else:
        lam = np.asarray(noise_lambda, dtype=float)
        coords = bingham.sample_frame_coords(lam, m, rngs["rot_noise"])
        meas_q = np.einsum("eij,ej->ei", frame_matrix(rel_q), coords)
    if noise_sigma2 > 0.0:
        meas_t = rel_t + math.sqrt(noise_sigma2) * rngs["trans_noise"].standard_normal((m, 3))
    else:
        meas_t = rel_t.copy()

    n_out = int(round(outlier_ratio * m))
    if n_out:
        rng_o = rngs["outliers"]
        hit = np.sort(rng_o.choice(m, size=n_out, replace=False))
        for idx in hit:
            angle = np.deg2rad(rng_o.uniform(60.0, 80.0))
            axis = rng_o.standard_normal(3)
            meas_q[idx] = qmul(axis_angle(axis, angle), meas_q[idx])
            length = rng_o.uniform(0.0, 1.0)
            direction = rng_o.standard_normal(3)
            meas_t[idx] += length * direction / np.linalg.norm(direction)

    edges = [MeasurementEdge(int(ei[k]), int(ej[k]), meas_q[k], meas_t[k]) for k in range(m)]
    return PoseGraph(n, edges, ground_truth=truth)


def _edge_pairs(n: int, completeness: float, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Random spanning tree over a shuffled labelling, plus uniform extras."""
    target = max(n - 1, int(round(completeness * n * (n - 1) / 2)))
    perm = rng.permutation(n)
    tree: set[tuple[int, int]] = set()
    for k in range(1, n):
        a = int(perm[rng.integers(0, k)])
        b = int(perm[k])
        tree.add((min(a, b), max(a, b)))
    extras_needed = target - len(tree)
    if extras_needed > 0:
        pool = [(i, j) for i in range(n) for j in range(i + 1, n) if (i, j) not in tree]
        chosen = rng.choice(len(pool), size=extras_needed, replace=False)
        pairs = tree | {pool[int(c)] for c in chosen}
    else:
        pairs = tree
    return sorted(pairs)


# ---------------------------------------------------------------------------
# Parameter sweeps.
# ---------------------------------------------------------------------------

SWEEP_FIELDS = [
    "sweep",
    "grid_value",
    "seed",
    "solver",
    "mre_rad",
    "mte",
    "g_c",
    "u_final",
    "wall_time_s",
    "error",
]

_PGD_STEP_FACTORS = (0.5, 0.125, 0.03125, 0.0078125, 0.001953125)


def _solve_cell(
    graph: PoseGraph, params: ModelParams, config: SamplerConfig, solver: str, pgd_step: float | None
) -> tuple[Estimate, float]:
    if solver == "tgmcmc":
        result = optimize(graph, params, config, mst_propagate(graph))
        return result.estimate, result.report.best_u
    if solver == "mst":
        est = mst_propagate(graph)
        return est, potential(graph, est, params)
    if solver == "pgd":
        init = mst_propagate(graph)
        steps = [pgd_step] if pgd_step is not None else [config.h * f for f in _PGD_STEP_FACTORS]
        best: tuple[Estimate, float] | None = None
        error: RuntimeError | None = None
        for step in steps:
            try:
                # probing steps are allowed to blow up; silence the overflow
                # chatter and rely on the divergence check inside pgd
                with np.errstate(over="ignore", invalid="ignore"):
                    est, report = pgd(graph, params, init, config.iterations, step)
            except RuntimeError as exc:  # diverged at this step size; try the next
                error = exc
                continue
            if best is None or report.best_u < best[1]:
                best = (est, report.best_u)
        if best is None:
            raise error if error is not None else RuntimeError("no PGD step size succeeded")
        return best
    raise ValueError(f"unknown solver {solver!r}")


def run_sweep(
    sweep: str,
    grid: list[float],
    *,
    n: int = 30,
    completeness: float = 0.5,
    lambda_mag: float = 350.0,
    sigma2: float = 0.01,
    outlier_ratio: float = 0.0,
    seeds: int | list[int] = 10,
    solvers: tuple[str, ...] = ("tgmcmc", "mst", "pgd"),
    config: SamplerConfig | None = None,
) -> list[dict]:
    """Grade solvers over a one-dimensional problem grid.

    ``sweep`` picks the varied axis: ``"noise"`` (rotation concentration
    magnitude; translation noise scales along, completeness fixed),
    ``"completeness"``, ``"outliers"``, or ``"pgd"`` (the grid becomes PGD
    step sizes, with one tempered-chain reference row per seed).  Each
    (grid value, seed, solver) cell yields one row; failures land in the
    row's ``error`` column and the sweep keeps going.  Outside the
    ``"pgd"`` sweep, a PGD cell reports its best run over a fixed grid of
    step sizes so the baseline is represented by its tuned variant.
    """
    if sweep not in ("noise", "completeness", "outliers", "pgd"):
        raise ValueError(f"unknown sweep axis {sweep!r}")
    seed_list = list(range(seeds)) if isinstance(seeds, int) else list(seeds)
    base = config or SamplerConfig()

    def _run_cell(seed: int, value: float, solver: str) -> dict:
        gen_kwargs = dict(
            n=n,
            completeness=completeness,
            noise_lambda=-lambda_mag * np.ones(3),
            noise_sigma2=sigma2,
            outlier_ratio=outlier_ratio,
            seed=seed,
        )
        solve_mag = lambda_mag
        pgd_step: float | None = None
        if sweep == "noise":
            gen_kwargs["noise_lambda"] = -value * np.ones(3)
            solve_mag = value
        elif sweep == "completeness":
            gen_kwargs["completeness"] = value
        elif sweep == "outliers":
            gen_kwargs["outlier_ratio"] = value
        elif sweep == "pgd" and solver == "pgd":
            pgd_step = value
        row = {
            "sweep": sweep,
            "grid_value": value,
            "seed": seed,
            "solver": solver,
            "mre_rad": math.nan,
            "mte": math.nan,
            "g_c": math.nan,
            "u_final": math.nan,
            "wall_time_s": math.nan,
            "error": "",
        }
        try:
            t0 = time.perf_counter()
            graph = generate(**gen_kwargs)
            cfg = SamplerConfig(
                h=base.h, c=base.c, beta=base.beta, iterations=base.iterations,
                seed=seed, thin=base.thin,
            )
            params = ModelParams.isotropic(solve_mag, sigma2)
            est, u_final = _solve_cell(graph, params, cfg, solver, pgd_step)
            row["mre_rad"] = metrics.mean_rotation_error(est, graph.ground_truth)
            row["mte"] = metrics.mean_translation_error(est, graph.ground_truth)
            row["g_c"] = graph_consistency(graph, est)
            row["u_final"] = u_final
            row["wall_time_s"] = time.perf_counter() - t0
        except Exception as exc:  # noqa: BLE001 - sweep rows must survive failures
            row["error"] = f"{type(exc).__name__}: {exc}"
        return row

    cells: list[tuple[int, float, str]] = []
    for seed in seed_list:
        if sweep == "pgd":
            cells.append((seed, float("nan"), "tgmcmc"))
            cells.extend((seed, float(g), "pgd") for g in grid)
        else:
            cells.extend((seed, float(g), solver) for g in grid for solver in solvers)
    # Cells are independent (per-cell RNG streams), so run them on a thread
    # pool; results keep the cell-list order, which makes the output
    # deterministic regardless of scheduling.
    workers = min(len(cells), os.cpu_count() or 1) or 1
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda cell: _run_cell(*cell), cells))


def sweep_noise(grid: list[float] | None = None, **kwargs) -> list[dict]:
    """Vary the rotation-noise concentration magnitude (bigger = cleaner)."""
    return run_sweep("noise", grid or [350.0, 500.0, 700.0, 900.0], **kwargs)


def sweep_completeness(grid: list[float] | None = None, **kwargs) -> list[dict]:
    """Vary the fraction of node pairs that carry a measurement."""
    return run_sweep("completeness", grid or [0.2, 0.4, 0.6, 0.8], **kwargs)


def sweep_outliers(grid: list[float] | None = None, **kwargs) -> list[dict]:
    """Vary the fraction of grossly corrupted measurements."""
    return run_sweep("outliers", grid or [0.0, 0.05, 0.1, 0.2], **kwargs)


def sweep_pgd(grid: list[float] | None = None, *, h: float = 0.004, **kwargs) -> list[dict]:
    """Sweep PGD step sizes against one tempered-chain run per seed."""
    if grid is None:
        grid = [h * f for f in _PGD_STEP_FACTORS]
    return run_sweep("pgd", grid, **kwargs)


def write_sweep_csv(path: str | Path, rows: list[dict]) -> None:
    """Write sweep rows with the canonical column order."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_FIELDS)
        writer.writeheader()
        writer.writerows(rows)
