"""Reading and writing pose graphs in the plain-text g2o format.

Wire format (one record per line):

* ``VERTEX_SE3:QUAT id tx ty tz qx qy qz qw``
* ``EDGE_SE3:QUAT i j tx ty tz qx qy qz qw  <21 info entries>``

Quaternions are vector-first on the wire and scalar-first in memory; the
conversion happens only here.  Floats are written with ``repr``'s
shortest-round-trip formatting, so a save→load cycle reproduces every value
bit for bit.  The 21 upper-triangular information-matrix entries on edges
are accepted and discarded on read, and written as the identity.

Lines starting with ``#`` are comments.  Unknown record tags are skipped
with a warning; structurally broken lines raise :class:`G2OParseError`
carrying the line number.
"""

from __future__ import annotations

import warnings
from pathlib import Path

import numpy as np

from .graph import Estimate, MeasurementEdge, PoseGraph

__all__ = ["G2OParseError", "load_g2o", "load_samples", "save_g2o", "save_samples"]

VERTEX_TAG = "VERTEX_SE3:QUAT"
EDGE_TAG = "EDGE_SE3:QUAT"

_IDENTITY_INFO = "1 0 0 0 0 0 1 0 0 0 0 1 0 0 0 1 0 0 1 0 1"


class G2OParseError(ValueError):
    """A malformed g2o line; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def _fmt(x: float) -> str:
    return repr(float(x))


def _wire_from_quat(q: np.ndarray) -> np.ndarray:
    """Scalar-first (w, x, y, z) -> wire order (x, y, z, w)."""
    return np.concatenate([q[1:], q[:1]])


def _quat_from_wire(xyzw: np.ndarray) -> np.ndarray:
    return np.concatenate([xyzw[3:], xyzw[:3]])


def save_g2o(path: str | Path, graph: PoseGraph | None = None, poses: Estimate | None = None) -> None:
    """Write vertices (``poses``) and/or measurement edges (``graph``).

    Either argument may be omitted: estimate files carry only vertices,
    measurement files only edges.
    """
    if graph is None and poses is None:
        raise ValueError("nothing to write: need a graph, poses, or both")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_render(graph, poses))


def _render(graph: PoseGraph | None, poses: Estimate | None) -> str:
    lines: list[str] = []
    if poses is not None:
        for idx in range(poses.n):
            wire = _wire_from_quat(poses.q[idx])
            fields = [VERTEX_TAG, str(idx)]
            fields += [_fmt(v) for v in poses.t[idx]]
            fields += [_fmt(v) for v in wire]
            lines.append(" ".join(fields))
    if graph is not None:
        for e in graph.edges:
            wire = _wire_from_quat(e.q)
            fields = [EDGE_TAG, str(e.i), str(e.j)]
            fields += [_fmt(v) for v in e.t]
            fields += [_fmt(v) for v in wire]
            fields.append(_IDENTITY_INFO)
            lines.append(" ".join(fields))
    return "\n".join(lines) + ("\n" if lines else "")


def load_g2o(path: str | Path) -> tuple[PoseGraph, Estimate | None]:
    """Parse a g2o file into a pose graph and, when vertex lines are
    present, an estimate of the absolute poses.

    The node count is the highest index seen on any vertex or edge plus
    one; vertex-less files (pure measurement sets) are legal.  Vertices
    missing from an otherwise vertex-bearing file default to the identity
    pose.
    """
    text = Path(path).read_text(encoding="utf-8")
    vertices: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    edges: list[MeasurementEdge] = []
    max_id = -1
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        tag = tokens[0]
        if tag == VERTEX_TAG:
            idx, t, q = _parse_vertex(tokens, line_no)
            if idx in vertices:
                raise G2OParseError(line_no, f"duplicate vertex id {idx}")
            vertices[idx] = (q, t)
            max_id = max(max_id, idx)
        elif tag == EDGE_TAG:
            edge = _parse_edge(tokens, line_no)
            edges.append(edge)
            max_id = max(max_id, edge.i, edge.j)
        else:
            warnings.warn(f"line {line_no}: skipping unknown g2o tag {tag!r}", stacklevel=2)
    if max_id < 0:
        raise G2OParseError(0, "file contains no vertices or edges")
    n = max_id + 1
    poses: Estimate | None = None
    if vertices:
        q = np.zeros((n, 4))
        q[:, 0] = 1.0
        t = np.zeros((n, 3))
        for idx, (vq, vt) in vertices.items():
            q[idx] = vq
            t[idx] = vt
        poses = Estimate(q, t)
    return PoseGraph(n, edges), poses


def _parse_floats(tokens: list[str], line_no: int) -> list[float]:
    try:
        return [float(tok) for tok in tokens]
    except ValueError as exc:
        raise G2OParseError(line_no, f"bad numeric field: {exc}") from None


def _parse_vertex(tokens: list[str], line_no: int) -> tuple[int, np.ndarray, np.ndarray]:
    if len(tokens) != 9:
        raise G2OParseError(line_no, f"vertex line needs 9 fields, got {len(tokens)}")
    try:
        idx = int(tokens[1])
    except ValueError:
        raise G2OParseError(line_no, f"bad vertex id {tokens[1]!r}") from None
    if idx < 0:
        raise G2OParseError(line_no, f"negative vertex id {idx}")
    vals = _parse_floats(tokens[2:], line_no)
    t = np.array(vals[:3])
    q = _quat_from_wire(np.array(vals[3:]))
    return idx, t, q


def _parse_edge(tokens: list[str], line_no: int) -> MeasurementEdge:
    if len(tokens) not in (10, 31):
        raise G2OParseError(
            line_no, f"edge line needs 10 fields (or 31 with information matrix), got {len(tokens)}"
        )
    try:
        i, j = int(tokens[1]), int(tokens[2])
    except ValueError:
        raise G2OParseError(line_no, f"bad edge endpoints {tokens[1]!r}, {tokens[2]!r}") from None
    if i < 0 or j < 0:
        raise G2OParseError(line_no, f"negative edge endpoint ({i}, {j})")
    vals = _parse_floats(tokens[3:10], line_no)
    if len(tokens) == 31:
        _parse_floats(tokens[10:], line_no)  # information matrix: validated, discarded
    t = np.array(vals[:3])
    q = _quat_from_wire(np.array(vals[3:7]))
    return MeasurementEdge(i, j, q, t)


def save_samples(path: str | Path, samples_q: np.ndarray, samples_t: np.ndarray) -> None:
    """Write a stack of pose samples, each introduced by a ``# SAMPLE k``
    comment and rendered as its own vertex block."""
    samples_q = np.asarray(samples_q, dtype=float)
    samples_t = np.asarray(samples_t, dtype=float)
    if samples_q.ndim != 3 or samples_q.shape[2] != 4 or samples_t.shape != samples_q.shape[:2] + (3,):
        raise ValueError("expected samples_q (k, n, 4) and samples_t (k, n, 3)")
    chunks = []
    for k in range(samples_q.shape[0]):
        chunks.append(f"# SAMPLE {k}\n")
        chunks.append(_render(None, Estimate(samples_q[k], samples_t[k])))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("".join(chunks))


def load_samples(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`save_samples`: returns ``(samples_q, samples_t)``."""
    text = Path(path).read_text(encoding="utf-8")
    blocks: list[list[str]] = []
    current: list[str] | None = None
    for raw in text.splitlines():
        line = raw.strip()
        if line.startswith("# SAMPLE"):
            current = []
            blocks.append(current)
        elif line and not line.startswith("#"):
            if current is None:
                raise G2OParseError(1, "sample file must start with a '# SAMPLE' marker")
            current.append(raw)
    qs, ts = [], []
    for block in blocks:
        vertices: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        for line_no, raw in enumerate(block, start=1):
            tokens = raw.split()
            idx, t, q = _parse_vertex(tokens, line_no)
            vertices[idx] = (q, t)
        n = max(vertices) + 1
        q = np.zeros((n, 4))
        q[:, 0] = 1.0
        t = np.zeros((n, 3))
        for idx, (vq, vt) in vertices.items():
            q[idx] = vq
            t[idx] = vt
        qs.append(q)
        ts.append(t)
    if not qs:
        raise G2OParseError(0, "no samples found")
    return np.stack(qs), np.stack(ts)
