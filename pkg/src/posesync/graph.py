"""Pose-graph containers: absolute pose estimates, relative measurements,
structural validation, and graph-level consistency scoring.

Node 0 is the gauge anchor throughout the package: solvers pin its pose to
the identity and never move it.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import quat

__all__ = [
    "Estimate",
    "GraphReport",
    "MeasurementEdge",
    "PoseGraph",
    "graph_consistency",
    "identity_estimate",
    "spanning_tree",
    "validate",
]


@dataclass
class Estimate:
    """Absolute poses for all nodes: unit quaternions ``q`` of shape (n, 4)
    scalar-first, and translations ``t`` of shape (n, 3)."""

    q: np.ndarray
    t: np.ndarray

    def __post_init__(self) -> None:
        # Value semantics: always take an independent C-contiguous copy so the
        # estimate cannot alias (and be mutated through) caller-owned arrays.
        self.q = np.array(self.q, dtype=float, order="C")
        self.t = np.array(self.t, dtype=float, order="C")
        if self.q.ndim != 2 or self.q.shape[1] != 4:
            raise ValueError(f"q must have shape (n, 4), got {self.q.shape}")
        if self.t.shape != (self.q.shape[0], 3):
            raise ValueError(f"t must have shape ({self.q.shape[0]}, 3), got {self.t.shape}")

    @property
    def n(self) -> int:
        return self.q.shape[0]

    def copy(self) -> "Estimate":
        return Estimate(self.q.copy(), self.t.copy())


def identity_estimate(n: int) -> Estimate:
    """All nodes at the identity pose."""
    q = np.zeros((n, 4))
    q[:, 0] = 1.0
    return Estimate(q, np.zeros((n, 3)))


@dataclass(frozen=True)
class MeasurementEdge:
    """A measured relative pose carrying frame ``i`` to frame ``j``:
    rotation ``q`` (unit quaternion, scalar-first) and translation ``t``."""

    i: int
    j: int
    q: np.ndarray
    t: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float).reshape(4))
        object.__setattr__(self, "t", np.asarray(self.t, dtype=float).reshape(3))


class PoseGraph:
    """A set of ``n`` nodes and relative pose measurements between them.

    Edges are stored exactly as supplied; :meth:`relative` serves either
    direction of a pair by inverting the stored transform on the fly.
    ``ground_truth`` is populated by the synthetic generator and left
    ``None`` for graphs loaded from measurement files.
    """

    def __init__(self, n: int, edges: list[MeasurementEdge], ground_truth: Estimate | None = None):
        if n < 1:
            raise ValueError("graph needs at least one node")
        self.n = int(n)
        self.edges = list(edges)
        self.ground_truth = ground_truth
        self._index: dict[tuple[int, int], int] = {}
        for idx, e in enumerate(self.edges):
            self._index.setdefault((e.i, e.j), idx)

    @property
    def m(self) -> int:
        return len(self.edges)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Edge data as flat arrays ``(ei, ej, meas_q, meas_t)`` for the
        numeric kernels; cached after the first call.

        Edges are emitted in canonical ``(i, j)`` lexicographic order (stable
        for duplicates), so every numeric reduction downstream is independent
        of the order in which the edge list was supplied.
        """
        cached = getattr(self, "_arrays", None)
        if cached is None:
            ei = np.array([e.i for e in self.edges], dtype=np.int64)
            ej = np.array([e.j for e in self.edges], dtype=np.int64)
            mq = (
                np.array([e.q for e in self.edges], dtype=float)
                if self.edges
                else np.zeros((0, 4))
            )
            mt = (
                np.array([e.t for e in self.edges], dtype=float)
                if self.edges
                else np.zeros((0, 3))
            )
            if ei.size:
                order = np.lexsort((ej, ei))
                ei, ej, mq, mt = ei[order], ej[order], mq[order], mt[order]
            cached = self._arrays = (ei, ej, mq, mt)
        return cached

    def has_edge(self, i: int, j: int) -> bool:
        return (i, j) in self._index or (j, i) in self._index

    def relative(self, i: int, j: int) -> tuple[np.ndarray, np.ndarray]:
        """Measured relative pose from node ``i`` to node ``j``.

        If only ``(j, i)`` is stored, returns the exact inverse transform.
        """
        idx = self._index.get((i, j))
        if idx is not None:
            e = self.edges[idx]
            return e.q.copy(), e.t.copy()
        idx = self._index.get((j, i))
        if idx is not None:
            e = self.edges[idx]
            return quat.pose_inverse(e.q, e.t)
        raise KeyError(f"no measurement between nodes {i} and {j}")

    def adjacency(self) -> list[list[int]]:
        """Undirected neighbor lists, each sorted ascending."""
        nbrs: list[set[int]] = [set() for _ in range(self.n)]
        for e in self.edges:
            if 0 <= e.i < self.n and 0 <= e.j < self.n and e.i != e.j:
                nbrs[e.i].add(e.j)
                nbrs[e.j].add(e.i)
        return [sorted(s) for s in nbrs]


@dataclass
class GraphReport:
    """Outcome of :func:`validate`: a list of human-readable issues, empty
    when the graph is structurally sound."""

    issues: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues


def validate(graph: PoseGraph) -> GraphReport:
    """Check structural health of a pose graph without raising.

    Reports out-of-range indices, self-loops, duplicate measurement pairs,
    non-unit measurement rotations, edge-count bounds, and disconnection
    from the anchor node 0.
    """
    issues: list[str] = []
    n, m = graph.n, graph.m
    seen: set[tuple[int, int]] = set()
    indices_ok = True
    for k, e in enumerate(graph.edges):
        if not (0 <= e.i < n and 0 <= e.j < n):
            issues.append(f"edge {k}: endpoint out of range ({e.i}, {e.j}) for {n} nodes")
            indices_ok = False
            continue
        if e.i == e.j:
            issues.append(f"edge {k}: self-loop at node {e.i}")
            continue
        pair = (min(e.i, e.j), max(e.i, e.j))
        if pair in seen:
            issues.append(f"edge {k}: duplicate measurement for pair {pair}")
        seen.add(pair)
        norm = float(np.linalg.norm(e.q))
        if abs(norm - 1.0) > 1e-6:
            issues.append(f"edge {k}: rotation not unit norm (|q| = {norm:.9g})")
    if m < n - 1:
        issues.append(f"too few edges: {m} < n - 1 = {n - 1}")
    max_edges = n * (n - 1) // 2
    if len(seen) > max_edges:
        issues.append(f"too many distinct pairs: {len(seen)} > n(n-1)/2 = {max_edges}")
    if indices_ok:
        reached = _bfs_reachable(graph)
        missing = [i for i in range(n) if i not in reached]
        if missing:
            head = ", ".join(map(str, missing[:8]))
            more = "" if len(missing) <= 8 else f" (+{len(missing) - 8} more)"
            issues.append(f"disconnected from node 0: nodes {head}{more}")
    return GraphReport(issues)


def _bfs_reachable(graph: PoseGraph) -> set[int]:
    adj = graph.adjacency()
    reached = {0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in reached:
                reached.add(v)
                queue.append(v)
    return reached


def spanning_tree(graph: PoseGraph) -> list[tuple[int, int]]:
    """Breadth-first spanning tree rooted at node 0.

    Returns ``(parent, child)`` pairs in discovery order; ties between
    unvisited neighbors break by ascending node index.  Raises if some node
    is unreachable from node 0.
    """
    adj = graph.adjacency()
    tree: list[tuple[int, int]] = []
    visited = {0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in visited:
                visited.add(v)
                tree.append((u, v))
                queue.append(v)
    if len(visited) != graph.n:
        raise ValueError("graph is disconnected: no spanning tree from node 0 covers all nodes")
    return tree


def graph_consistency(graph: PoseGraph, estimate: Estimate) -> float:
    """Agreement between measured rotations and the rotations implied by an
    estimate, scaled to ``[0, 1]``.

    Per edge the discrepancy is the geodesic rotation distance between the
    measurement and ``q_j * conj(q_i)``; the score is
    ``1 - mean(distance) / pi``, so a perfectly consistent estimate scores 1
    and one where every implied rotation is a half-turn off scores 0.
    """
    if graph.m == 0:
        raise ValueError("graph has no edges to score")
    if estimate.n != graph.n:
        raise ValueError(f"estimate has {estimate.n} nodes, graph has {graph.n}")
    ei, ej, mq, _ = graph.arrays()
    implied = quat.qmul(estimate.q[ej], quat.conjugate(estimate.q[ei]))
    dist = quat.geodesic_distance(mq, implied)
    return float(1.0 - np.mean(dist) / np.pi)
