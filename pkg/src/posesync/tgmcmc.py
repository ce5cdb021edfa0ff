"""Tempered geodesic Monte Carlo over poses: MAP optimization and posterior
sampling with one shared sweep.

State is ``theta = (q_1..q_{n-1} on S^3, t_1..t_{n-1} in R^3)`` plus a
velocity for every coordinate (rotation velocities live in the tangent
space of their quaternion).  One sweep evaluates the potential gradient at
the current state and then, for every free node, applies three updates:

* **B** — exponential friction: velocities shrink by ``exp(-c h)``.
* **O** — kick: velocities absorb ``-h * grad`` plus, at finite inverse
  temperature ``beta``, Gaussian noise scaled by ``sqrt(2 c h / beta)``;
  rotation kicks are projected onto the tangent space.
* **A** — drift: rotations follow the exact great-circle geodesic for time
  ``h`` (velocity transported along); translations move by ``h * v``.

``beta = inf`` turns the noise off, making the sweep a dissipative descent
whose best-visited iterate is the MAP estimate.  Finite ``beta`` yields
samples whose equilibrium distribution is the posterior tempered to that
``beta``.  Node 0 never moves (gauge anchor).

All randomness flows through a counter-based Philox generator seeded from
the run seed, and gradients accumulate in fixed edge order, so runs with
equal configuration are bit-for-bit reproducible per backend.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__, kernels
from .graph import Estimate, PoseGraph
from .model import ModelParams
from .quat import geodesic_flow, normalize, tangent_project

__all__ = [
    "OptimizeResult",
    "RunReport",
    "SampleResult",
    "SamplerConfig",
    "SamplerState",
    "init_state",
    "optimize",
    "sample_posterior",
    "step_a",
    "step_b",
    "step_o",
    "sweep",
]

_CHUNK = 512  # sweeps per kernel call / noise block

_IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


@dataclass
class SamplerConfig:
    """Knobs of the sweep.  ``beta = inf`` (default) optimizes; finite
    ``beta`` samples.  ``thin`` is both the burn-in length and the spacing
    between retained posterior samples."""

    h: float = 0.004
    c: float = 1000.0
    beta: float = math.inf
    iterations: int = 500
    seed: int = 0
    thin: int = 10
    momentum_init: str = "zero"  # "zero" | "gaussian"
    reset_momenta: bool = False
    order: str = "BOA"  # sub-step schedule; only BOA is implemented

    def __post_init__(self) -> None:
        if not 0.0 < self.h:
            raise ValueError("h must be positive")
        if self.c < 0.0:
            raise ValueError("c must be non-negative (0 disables friction)")
        if not self.beta > 0.0:
            raise ValueError("beta must be positive (math.inf disables noise)")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.thin < 1:
            raise ValueError("thin must be at least 1")
        if self.momentum_init not in ("zero", "gaussian"):
            raise ValueError("momentum_init must be 'zero' or 'gaussian'")
        if self.order != "BOA":
            raise ValueError("only the BOA sub-step order is implemented")

    def noise_scale(self) -> float:
        """Per-sweep noise amplitude ``sqrt(2 c h / beta)``; zero at
        ``beta = inf``."""
        if math.isinf(self.beta):
            return 0.0
        return math.sqrt(2.0 * self.c * self.h / self.beta)

    def damping(self) -> float:
        return math.exp(-self.c * self.h)

    def to_dict(self) -> dict:
        return {
            "h": self.h,
            "c": self.c,
            "beta": "inf" if math.isinf(self.beta) else self.beta,
            "iterations": self.iterations,
            "seed": self.seed,
            "thin": self.thin,
            "momentum_init": self.momentum_init,
            "reset_momenta": self.reset_momenta,
            "order": self.order,
        }


@dataclass
class SamplerState:
    """Chain state: poses, velocities, sweep counter, and the stream of
    randomness that drives it.  Rotation rows stay unit-norm and rotation
    velocities tangent to them throughout a run."""

    estimate: Estimate
    vq: np.ndarray
    vt: np.ndarray
    rng: np.random.Generator
    iteration: int = 0


def _stream(seed: int, stream: int) -> np.random.Generator:
    """Independent Philox stream ``stream`` derived from ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream)])))


def init_state(estimate: Estimate, config: SamplerConfig) -> SamplerState:
    """Fresh chain state at ``estimate`` (which must pin node 0 to the
    identity pose).  Velocities start at zero, or as tangent Gaussians with
    variance ``1/beta`` when ``momentum_init='gaussian'``."""
    q = np.ascontiguousarray(normalize(estimate.q), dtype=float)
    t = np.ascontiguousarray(estimate.t, dtype=float).copy()
    if not (np.allclose(q[0], _IDENTITY, atol=1e-12) or np.allclose(q[0], -_IDENTITY, atol=1e-12)) or not np.allclose(
        t[0], 0.0, atol=1e-12
    ):
        raise ValueError("initial estimate must pin node 0 to the identity pose")
    q[0] = _IDENTITY
    t[0] = 0.0
    rng = _stream(config.seed, 0)
    n = q.shape[0]
    vq = np.zeros((n, 4))
    vt = np.zeros((n, 3))
    if config.momentum_init == "gaussian" and not math.isinf(config.beta):
        sd = 1.0 / math.sqrt(config.beta)
        vq[1:] = tangent_project(q[1:], sd * rng.standard_normal((n - 1, 4)))
        vt[1:] = sd * rng.standard_normal((n - 1, 3))
    return SamplerState(Estimate(q, t), vq, vt, rng)


@dataclass
class RunReport:
    """What a run did: the full pre-sweep potential trace, the best iterate
    found, timing, and enough configuration echo to reproduce it."""

    solver: str
    iterations: int
    u_trace: np.ndarray
    best_u: float
    best_iteration: int
    final_u: float
    wall_time_s: float
    seed: int
    backend: str
    config: dict
    rng: str = "philox"
    version: str = __version__
    schema_version: int = 1

    def to_dict(self) -> dict:
        """JSON-ready dict with stable key order; the trace is summarized,
        not dumped."""
        trace = np.asarray(self.u_trace, dtype=float)
        return {
            "schema_version": self.schema_version,
            "solver": self.solver,
            "version": self.version,
            "backend": self.backend,
            "rng": self.rng,
            "seed": self.seed,
            "config": self.config,
            "iterations": self.iterations,
            "u_trace_summary": {
                "length": int(trace.size),
                "initial": float(trace[0]) if trace.size else None,
                "minimum": float(trace.min()) if trace.size else None,
                "final": float(trace[-1]) if trace.size else None,
            },
            "best_u": self.best_u,
            "best_iteration": self.best_iteration,
            "final_u": self.final_u,
            "wall_time_s": self.wall_time_s,
        }


# ---------------------------------------------------------------------------
# Reference single-step operations (the sweep kernels fuse exactly these).
# ---------------------------------------------------------------------------


def step_b(state: SamplerState, config: SamplerConfig) -> None:
    """Friction: damp all free velocities by ``exp(-c h)``."""
    d = config.damping()
    state.vq[1:] *= d
    state.vt[1:] *= d


def step_o(
    state: SamplerState,
    config: SamplerConfig,
    grad_q: np.ndarray,
    grad_t: np.ndarray,
    noise_q: np.ndarray | None = None,
    noise_t: np.ndarray | None = None,
) -> None:
    """Kick: add ``-h * grad`` plus scaled noise to the free velocities.

    Rotation kicks are tangent-projected at the current quaternions.  The
    noise arrays are per-node standard normals (row 0 ignored); at
    ``beta = inf`` they may be omitted.
    """
    h = config.h
    scale = config.noise_scale()
    q = state.estimate.q
    kick = (-h) * grad_q[1:]
    tkick = (-h) * grad_t[1:]
    if scale > 0.0:
        if noise_q is None or noise_t is None:
            raise ValueError("finite beta needs noise draws")
        kick = kick + scale * noise_q[1:]
        tkick = tkick + scale * noise_t[1:]
    state.vq[1:] += tangent_project(q[1:], kick)
    state.vt[1:] += tkick


def step_a(state: SamplerState, config: SamplerConfig) -> None:
    """Drift: geodesic flow for time ``h`` on rotations (with velocity
    transport, then re-normalization hygiene), straight-line motion on
    translations."""
    h = config.h
    q = state.estimate.q
    q_new, v_new = geodesic_flow(q[1:], state.vq[1:], h)
    q_new /= np.linalg.norm(q_new, axis=1, keepdims=True)
    v_new -= np.sum(q_new * v_new, axis=1, keepdims=True) * q_new
    q[1:] = q_new
    state.vq[1:] = v_new
    state.estimate.t[1:] += h * state.vt[1:]


def sweep(
    state: SamplerState,
    graph: PoseGraph,
    params: ModelParams,
    config: SamplerConfig,
    noise_q: np.ndarray | None = None,
    noise_t: np.ndarray | None = None,
) -> float:
    """One full B-O-A sweep over all free nodes, gradient evaluated once at
    the pre-sweep state.  Returns the pre-sweep potential."""
    ei, ej, mq, mt = graph.arrays()
    lam, inv_s2, plam, pframe, inv_ps2 = params.flat_arrays()
    est = state.estimate
    u, gq, gt = kernels.potential_grad(est.q, est.t, ei, ej, mq, mt, lam, inv_s2, plam, pframe, inv_ps2)
    step_b(state, config)
    step_o(state, config, gq, gt, noise_q, noise_t)
    step_a(state, config)
    state.iteration += 1
    return u


# ---------------------------------------------------------------------------
# Drivers.
# ---------------------------------------------------------------------------


class _Best:
    """Tracks the lowest-potential iterate seen."""

    def __init__(self, n: int):
        self.u = math.inf
        self.iteration = -1
        self.q = np.zeros((n, 4))
        self.t = np.zeros((n, 3))


def _run_sweep_block(
    state: SamplerState,
    graph: PoseGraph,
    params: ModelParams,
    config: SamplerConfig,
    n_sweeps: int,
    best: _Best | None,
) -> np.ndarray:
    """Run ``n_sweeps`` sweeps via the backend kernel, chunking noise draws.

    Returns the pre-sweep potential trace (length ``n_sweeps``) and aborts
    with a diagnostic if the potential turns non-finite.
    """
    ei, ej, mq, mt = graph.arrays()
    lam, inv_s2, plam, pframe, inv_ps2 = params.flat_arrays()
    est = state.estimate
    n = est.n
    scale = config.noise_scale()
    damp = config.damping()
    trace = np.empty(n_sweeps)
    empty_q = np.zeros((0, n, 4))
    empty_t = np.zeros((0, n, 3))
    done = 0
    while done < n_sweeps:
        k = min(_CHUNK, n_sweeps - done)
        if scale > 0.0:
            nq = state.rng.standard_normal((k, n, 4))
            nt = state.rng.standard_normal((k, n, 3))
        else:
            nq, nt = empty_q, empty_t
        start_iter = state.iteration
        if best is not None:
            best.u = kernels.run_sweeps(
                est.q, est.t, state.vq, state.vt, ei, ej, mq, mt,
                lam, inv_s2, plam, pframe, inv_ps2,
                config.h, damp, scale, nq, nt,
                trace[done : done + k], best.q, best.t, best.u, True,
            )
        else:
            kernels.run_sweeps(
                est.q, est.t, state.vq, state.vt, ei, ej, mq, mt,
                lam, inv_s2, plam, pframe, inv_ps2,
                config.h, damp, scale, nq, nt,
                trace[done : done + k], est.q, est.t, math.inf, False,
            )
        state.iteration += k
        bad = np.flatnonzero(~np.isfinite(trace[done : done + k]))
        if bad.size:
            raise RuntimeError(
                f"potential became non-finite at sweep {start_iter + int(bad[0])}; "
                "the step size h is likely too large for these concentrations"
            )
        done += k
    return trace


def _current_u(state: SamplerState, graph: PoseGraph, params: ModelParams) -> float:
    ei, ej, mq, mt = graph.arrays()
    lam, inv_s2, plam, pframe, inv_ps2 = params.flat_arrays()
    u, _, _ = kernels.potential_grad(
        state.estimate.q, state.estimate.t, ei, ej, mq, mt, lam, inv_s2, plam, pframe, inv_ps2
    )
    return u


@dataclass
class OptimizeResult:
    """MAP answer plus the report and the live chain state (hand the state
    to :func:`sample_posterior` to continue at finite temperature)."""

    estimate: Estimate
    report: RunReport
    state: SamplerState


def optimize(
    graph: PoseGraph, params: ModelParams, config: SamplerConfig, init: Estimate
) -> OptimizeResult:
    """Run ``config.iterations`` sweeps from ``init`` and return the
    lowest-potential iterate visited (the final state included)."""
    t0 = time.perf_counter()
    state = init_state(init, config)
    best = _Best(state.estimate.n)
    trace = _run_sweep_block(state, graph, params, config, config.iterations, best)
    final_u = _current_u(state, graph, params)
    if not math.isfinite(final_u):
        raise RuntimeError("potential is non-finite at the final state")
    if final_u < best.u:
        best.u = final_u
        best.iteration = state.iteration
        best.q[...] = state.estimate.q
        best.t[...] = state.estimate.t
    else:
        # The kernel kept the best snapshot; its pre-sweep potential sits in
        # the trace bit-for-bit, which pins down the first hit's index.
        hits = np.flatnonzero(trace == best.u)
        best.iteration = int(hits[0]) if hits.size else -1
    wall = time.perf_counter() - t0
    report = RunReport(
        solver="tgmcmc",
        iterations=config.iterations,
        u_trace=trace,
        best_u=best.u,
        best_iteration=best.iteration,
        final_u=final_u,
        wall_time_s=wall,
        seed=config.seed,
        backend=kernels.active_backend(),
        config=config.to_dict(),
    )
    return OptimizeResult(Estimate(best.q.copy(), best.t.copy()), report, state)


@dataclass
class SampleResult:
    """Retained posterior samples (stacked) plus report and final state."""

    samples_q: np.ndarray  # (k, n, 4)
    samples_t: np.ndarray  # (k, n, 3)
    report: RunReport
    state: SamplerState


def sample_posterior(
    graph: PoseGraph,
    params: ModelParams,
    config: SamplerConfig,
    start: Estimate | SamplerState,
    n_samples: int,
) -> SampleResult:
    """Draw ``n_samples`` tempered posterior samples at ``config.beta``.

    The chain burns in for ``config.thin`` sweeps, then retains one sample
    every ``config.thin`` sweeps.  ``start`` may be a plain estimate (a
    fresh chain) or a :class:`SamplerState` from a previous phase, whose
    momenta are kept unless ``config.reset_momenta`` is set.
    """
    if math.isinf(config.beta):
        raise ValueError("sampling needs a finite beta")
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    t0 = time.perf_counter()
    if isinstance(start, SamplerState):
        state = start
        if config.reset_momenta:
            state.vq[:] = 0.0
            state.vt[:] = 0.0
    else:
        state = init_state(start, config)
    n = state.estimate.n
    samples_q = np.empty((n_samples, n, 4))
    samples_t = np.empty((n_samples, n, 3))
    traces = [_run_sweep_block(state, graph, params, config, config.thin, None)]  # burn-in
    for s in range(n_samples):
        traces.append(_run_sweep_block(state, graph, params, config, config.thin, None))
        samples_q[s] = state.estimate.q
        samples_t[s] = state.estimate.t
    trace = np.concatenate(traces) if traces else np.empty(0)
    final_u = _current_u(state, graph, params)
    wall = time.perf_counter() - t0
    best_idx = int(np.argmin(trace)) if trace.size else -1
    report = RunReport(
        solver="tgmcmc-sample",
        iterations=int(trace.size),
        u_trace=trace,
        best_u=float(trace.min()) if trace.size else final_u,
        best_iteration=best_idx,
        final_u=final_u,
        wall_time_s=wall,
        seed=config.seed,
        backend=kernels.active_backend(),
        config={**config.to_dict(), "n_samples": n_samples},
    )
    return SampleResult(samples_q, samples_t, report, state)
