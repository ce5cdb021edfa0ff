"""Tests for the spanning-tree and projected-gradient reference solvers."""

from __future__ import annotations

import numpy as np
import pytest

from posesync import synth
from posesync.baselines import mst_propagate, pgd
from posesync.graph import Estimate, MeasurementEdge, PoseGraph, identity_estimate
from posesync.model import ModelParams, potential
from posesync.quat import normalize, relative_pose

ANISO = np.array([-350.0, -400.0, -450.0])
IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def _sign_aware_q_diff(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-row distance between quaternion arrays, treating q and -q alike."""
    return np.minimum(np.linalg.norm(a - b, axis=-1), np.linalg.norm(a + b, axis=-1))


def _params() -> ModelParams:
    return ModelParams.isotropic(350.0, 0.01)


# ---------------------------------------------------------------------------
# Spanning-tree propagation
# ---------------------------------------------------------------------------


def test_mst_exact_on_noiseless_graph():
    graph = synth.generate(12, 0.7, noise_lambda=None, noise_sigma2=0.0, seed=3)
    est = mst_propagate(graph)
    truth = graph.ground_truth
    assert truth is not None
    assert np.max(_sign_aware_q_diff(est.q, truth.q)) < 1e-12
    assert np.max(np.abs(est.t - truth.t)) < 1e-12


def test_mst_reproduces_every_measurement_on_a_tree():
    rng = np.random.default_rng(7)
    edges = [
        MeasurementEdge(i, i + 1, normalize(rng.standard_normal(4)), rng.standard_normal(3))
        for i in range(4)
    ]
    graph = PoseGraph(5, edges)
    est = mst_propagate(graph)
    np.testing.assert_array_equal(est.q[0], IDENTITY)
    np.testing.assert_array_equal(est.t[0], np.zeros(3))
    for edge in edges:
        q_ij, t_ij = relative_pose(est.q[edge.i], est.t[edge.i], est.q[edge.j], est.t[edge.j])
        assert _sign_aware_q_diff(q_ij, edge.q) < 1e-12
        assert np.max(np.abs(t_ij - edge.t)) < 1e-12


def test_mst_disconnected_graph_raises():
    graph = PoseGraph(4, [MeasurementEdge(0, 1, IDENTITY.copy(), np.zeros(3))])
    with pytest.raises(ValueError):
        mst_propagate(graph)


# ---------------------------------------------------------------------------
# Projected gradient descent
# ---------------------------------------------------------------------------


def test_pgd_descends_and_stays_on_manifold():
    graph = synth.generate(12, 0.6, noise_lambda=ANISO, noise_sigma2=0.01, seed=0)
    params = _params()
    init = mst_propagate(graph)
    est, report = pgd(graph, params, init, iterations=400, step_size=2.5e-5)

    assert report.u_trace.shape == (400,)
    assert report.u_trace[0] == pytest.approx(potential(graph, init, params), rel=1e-12)
    assert report.best_u < 0.5 * report.u_trace[0]  # earned a real improvement
    assert np.max(np.abs(np.linalg.norm(est.q, axis=1) - 1.0)) < 1e-12
    assert potential(graph, est, params) == pytest.approx(report.best_u, rel=1e-12)


def test_pgd_never_worse_than_init():
    params = _params()
    for seed in range(3):
        graph = synth.generate(8, 0.7, noise_lambda=ANISO, noise_sigma2=0.01, seed=seed)
        init = mst_propagate(graph)
        u0 = potential(graph, init, params)
        # deliberately clumsy step size: best-iterate tracking still protects us
        with np.errstate(over="ignore", invalid="ignore"):
            _, report = pgd(graph, params, init, iterations=50, step_size=0.05)
        assert report.best_u <= u0 * (1.0 + 1e-12) + 1e-12


def test_pgd_zero_gradient_returns_init_unchanged():
    graph = PoseGraph(2, [MeasurementEdge(0, 1, IDENTITY.copy(), np.zeros(3))])
    est, report = pgd(graph, _params(), identity_estimate(2), iterations=25, step_size=0.01)
    np.testing.assert_array_equal(est.q, np.stack([IDENTITY, IDENTITY]))
    np.testing.assert_array_equal(est.t, np.zeros((2, 3)))
    assert report.best_u == 0.0
    assert report.best_iteration == 0
    assert report.final_u == 0.0


def test_pgd_report_fields():
    graph = synth.generate(6, 0.8, noise_lambda=ANISO, noise_sigma2=0.01, seed=1)
    init = mst_propagate(graph)
    _, report = pgd(graph, _params(), init, iterations=30, step_size=1e-5)
    assert report.solver == "pgd"
    assert report.iterations == 30
    assert report.config == {"step_size": 1e-5, "iterations": 30}
    assert report.backend in ("numba", "numpy")
    assert report.u_trace.shape == (30,)
    assert report.best_iteration in range(31)


def test_pgd_validation():
    graph = synth.generate(4, 1.0, noise_lambda=ANISO, noise_sigma2=0.01, seed=2)
    init = identity_estimate(graph.n)
    with pytest.raises(ValueError):
        pgd(graph, _params(), init, iterations=-1)
    with pytest.raises(ValueError):
        pgd(graph, _params(), init, step_size=0.0)


def test_pgd_divergence_raises_with_diagnostic():
    graph = synth.generate(10, 0.6, noise_lambda=ANISO, noise_sigma2=0.01, seed=4)
    init = mst_propagate(graph)
    with pytest.raises(RuntimeError, match="iteration"):
        with np.errstate(over="ignore", invalid="ignore"):
            pgd(graph, _params(), init, iterations=200, step_size=1.0)
