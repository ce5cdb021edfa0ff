"""Pose-graph container, validation, spanning tree, and consistency score."""

from __future__ import annotations

import numpy as np
import numpy.testing as npt
import pytest

from posesync import quat, synth
from posesync.graph import (
    Estimate,
    MeasurementEdge,
    PoseGraph,
    graph_consistency,
    identity_estimate,
    spanning_tree,
    validate,
)

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def _edge(i, j, q=None, t=None):
    return MeasurementEdge(i, j, IDENTITY if q is None else q, np.zeros(3) if t is None else t)


def complete_graph(n: int) -> PoseGraph:
    return PoseGraph(n, [_edge(i, j) for i in range(n) for j in range(i + 1, n)])


def test_estimate_validation():
    with pytest.raises(ValueError):
        Estimate(np.zeros((3, 3)), np.zeros((3, 3)))
    with pytest.raises(ValueError):
        Estimate(np.zeros((3, 4)), np.zeros((2, 3)))
    est = identity_estimate(4)
    assert est.n == 4
    npt.assert_array_equal(est.q, np.tile(IDENTITY, (4, 1)))
    npt.assert_array_equal(est.t, np.zeros((4, 3)))


def test_estimate_copies_input():
    q = np.tile(IDENTITY, (2, 1))
    t = np.zeros((2, 3))
    est = Estimate(q, t)
    q[0, 0] = 5.0
    assert est.q[0, 0] == 1.0
    c = est.copy()
    c.q[0, 0] = 9.0
    assert est.q[0, 0] == 1.0


def test_measurement_edge_reshapes():
    e = MeasurementEdge(0, 1, [1, 0, 0, 0], [0, 0, 0])
    assert e.q.shape == (4,) and e.t.shape == (3,)


def test_arrays_canonical_order():
    edges = [_edge(2, 3), _edge(0, 1), _edge(1, 2)]
    g1 = PoseGraph(4, edges)
    g2 = PoseGraph(4, edges[::-1])
    for a, b in zip(g1.arrays(), g2.arrays()):
        npt.assert_array_equal(a, b)
    ei, ej, _, _ = g1.arrays()
    npt.assert_array_equal(ei, [0, 1, 2])
    npt.assert_array_equal(ej, [1, 2, 3])


def test_has_edge_and_adjacency():
    g = PoseGraph(3, [_edge(0, 1), _edge(1, 2)])
    assert g.has_edge(0, 1) and g.has_edge(1, 0)
    assert not g.has_edge(0, 2)
    assert g.adjacency() == [[1], [0, 2], [1]]


def test_relative_auto_inverts():
    rng = np.random.default_rng(0)
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    t = rng.standard_normal(3)
    g = PoseGraph(2, [MeasurementEdge(0, 1, q, t)])
    q01, t01 = g.relative(0, 1)
    npt.assert_array_equal(q01, q)
    npt.assert_array_equal(t01, t)
    q10, t10 = g.relative(1, 0)
    qi, ti = quat.pose_inverse(q, t)
    npt.assert_allclose(q10, qi, atol=1e-15)
    npt.assert_allclose(t10, ti, atol=1e-15)
    with pytest.raises(KeyError):
        g.relative(0, 0)


def test_validate_healthy_tree():
    g = PoseGraph(5, [_edge(0, i) for i in range(1, 5)])
    report = validate(g)
    assert report.ok and report.issues == []


def test_validate_disconnected():
    g = PoseGraph(4, [_edge(0, 1), _edge(2, 3)])
    report = validate(g)
    assert not report.ok
    assert any("disconnected" in s for s in report.issues)


def test_validate_duplicate_pair_both_orientations():
    g = PoseGraph(4, [_edge(2, 3), _edge(3, 2), _edge(0, 1), _edge(1, 2)])
    report = validate(g)
    assert any("duplicate" in s for s in report.issues)


def test_validate_out_of_range_self_loop_nonunit():
    g = PoseGraph(3, [_edge(0, 5), _edge(1, 1), MeasurementEdge(0, 1, [2, 0, 0, 0], [0, 0, 0]), _edge(1, 2)])
    issues = "\n".join(validate(g).issues)
    assert "out of range" in issues
    assert "self-loop" in issues
    assert "unit norm" in issues


def test_validate_too_few_edges():
    g = PoseGraph(5, [_edge(0, 1)])
    assert any("too few" in s for s in validate(g).issues)


def test_spanning_tree_complete_graph():
    assert spanning_tree(complete_graph(4)) == [(0, 1), (0, 2), (0, 3)]


def test_spanning_tree_path_graph():
    g = PoseGraph(4, [_edge(0, 1), _edge(1, 2), _edge(2, 3)])
    assert spanning_tree(g) == [(0, 1), (1, 2), (2, 3)]


def test_spanning_tree_disconnected_raises():
    with pytest.raises(ValueError):
        spanning_tree(PoseGraph(4, [_edge(0, 1), _edge(2, 3)]))


def test_graph_consistency_perfect_and_worst():
    graph = synth.generate(8, 0.6, noise_lambda=None, noise_sigma2=0.0, seed=3)
    # arccos amplifies machine epsilon to ~sqrt(eps) per edge near a perfect
    # match, so "exactly 1" is only reachable to ~1e-8
    assert graph_consistency(graph, graph.ground_truth) == pytest.approx(1.0, abs=1e-7)
    # compose every measurement with a half-turn: every term hits the maximum
    # geodesic distance pi, so the score collapses to 0
    flipped = [
        MeasurementEdge(e.i, e.j, quat.qmul(e.q, np.array([0.0, 1.0, 0.0, 0.0])), e.t)
        for e in graph.edges
    ]
    worst = PoseGraph(graph.n, flipped)
    assert graph_consistency(worst, graph.ground_truth) == pytest.approx(0.0, abs=1e-9)


def test_graph_consistency_antipodal_invariance():
    graph = synth.generate(6, 0.8, noise_lambda=np.array([-200.0] * 3), noise_sigma2=0.01, seed=4)
    est = graph.ground_truth
    base = graph_consistency(graph, est)
    q = est.q.copy()
    q[2] = -q[2]
    assert graph_consistency(graph, Estimate(q, est.t)) == pytest.approx(base, abs=1e-14)
    flipped_edges = [
        MeasurementEdge(e.i, e.j, -e.q if k == 0 else e.q, e.t) for k, e in enumerate(graph.edges)
    ]
    assert graph_consistency(PoseGraph(graph.n, flipped_edges), est) == pytest.approx(base, abs=1e-14)


def test_graph_consistency_empty_raises():
    with pytest.raises(ValueError):
        graph_consistency(PoseGraph(2, []), identity_estimate(2))
