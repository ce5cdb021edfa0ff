"""Reference solvers the geodesic sampler is measured against.

* :func:`mst_propagate` — chain measurements along a breadth-first spanning
  tree; exact on noiseless data, ignores every off-tree edge.
* :func:`pgd` — projected gradient descent: a plain Euclidean gradient step
  followed by quaternion re-normalization (no tangent projection, no
  momentum); returns its best-visited iterate.
"""

from __future__ import annotations

import math
import time

import numpy as np

from . import kernels
from .graph import Estimate, PoseGraph, identity_estimate, spanning_tree
from .model import ModelParams
from .quat import compose
from .tgmcmc import RunReport

__all__ = ["mst_propagate", "pgd"]


def mst_propagate(graph: PoseGraph) -> Estimate:
    """Compose measured relative poses outward from node 0 along the
    breadth-first spanning tree.  Node 0 gets the identity pose; edges are
    inverted on the fly when the tree walks them against their stored
    direction."""
    est = identity_estimate(graph.n)
    for parent, child in spanning_tree(graph):
        rel_q, rel_t = graph.relative(parent, child)
        q, t = compose(rel_q, rel_t, est.q[parent], est.t[parent])
        est.q[child] = q
        est.t[child] = t
    return est


def pgd(
    graph: PoseGraph,
    params: ModelParams,
    init: Estimate,
    iterations: int = 500,
    step_size: float = 0.002,
) -> tuple[Estimate, RunReport]:
    """Projected gradient descent from ``init`` (node 0 stays pinned).

    Each iteration takes an ambient step ``-step_size * grad`` and pulls the
    quaternions back to unit norm by plain rescaling.  The lowest-potential
    iterate (the initial one included) is returned, so the result is never
    worse than the initialization.
    """
    if iterations < 0:
        raise ValueError("iterations must be non-negative")
    if step_size <= 0.0:
        raise ValueError("step_size must be positive")
    t0 = time.perf_counter()
    ei, ej, mq, mt = graph.arrays()
    lam, inv_s2, plam, pframe, inv_ps2 = params.flat_arrays()
    q = np.ascontiguousarray(init.q, dtype=float).copy()
    t = np.ascontiguousarray(init.t, dtype=float).copy()
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    trace = np.empty(iterations)
    best_u = np.inf
    best_iteration = -1
    best_q, best_t = q.copy(), t.copy()
    for k in range(iterations):
        u, gq, gt = kernels.potential_grad(q, t, ei, ej, mq, mt, lam, inv_s2, plam, pframe, inv_ps2)
        trace[k] = u
        if not math.isfinite(u):
            raise RuntimeError(
                f"potential became non-finite at iteration {k}; the step size is likely too large"
            )
        if u < best_u:
            best_u = u
            best_iteration = k
            best_q[...] = q
            best_t[...] = t
        q[1:] -= step_size * gq[1:]
        q[1:] /= np.linalg.norm(q[1:], axis=1, keepdims=True)
        t[1:] -= step_size * gt[1:]
    u_final, _, _ = kernels.potential_grad(q, t, ei, ej, mq, mt, lam, inv_s2, plam, pframe, inv_ps2)
    if not math.isfinite(u_final):
        raise RuntimeError(
            f"potential became non-finite at iteration {iterations}; the step size is likely too large"
        )
    if u_final < best_u:
        best_u = u_final
        best_iteration = iterations
        best_q, best_t = q, t
    report = RunReport(
        solver="pgd",
        iterations=iterations,
        u_trace=trace,
        best_u=float(best_u),
        best_iteration=best_iteration,
        final_u=float(u_final),
        wall_time_s=time.perf_counter() - t0,
        seed=0,
        backend=kernels.active_backend(),
        config={"step_size": step_size, "iterations": iterations},
    )
    return Estimate(best_q.copy(), best_t.copy()), report
