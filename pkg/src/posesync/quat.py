"""Quaternion algebra, pose composition, and the sphere geometry used by the
solver.

Conventions
-----------
* Quaternions are scalar-first arrays ``(w, x, y, z)`` of shape ``(..., 4)``.
* The Hamilton product is used throughout: ``i*j = k``.
* A unit quaternion ``q`` acts on points by the sandwich ``q p q^-1``, i.e.
  rotations are active and compose left-to-right as matrices do.
* ``q`` and ``-q`` encode the same rotation (double cover); functions that
  compare rotations are antipodally symmetric.

All functions broadcast over leading axes, so they accept a single
quaternion of shape ``(4,)`` or a batch of shape ``(n, 4)`` alike.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "axis_angle",
    "compose",
    "conjugate",
    "frame_matrix",
    "geodesic_distance",
    "geodesic_flow",
    "jac_mu_wrt_qi",
    "jac_mu_wrt_qj",
    "jac_mu_wrt_ti",
    "jac_rel_wrt_qi",
    "jac_rel_wrt_qj",
    "jac_rotate_wrt_q",
    "normalize",
    "pose_inverse",
    "qmul",
    "relative_pose",
    "right_mul_matrix",
    "rotate_point",
    "rotation_matrix",
    "tangent_project",
]


def normalize(q: np.ndarray) -> np.ndarray:
    """Return ``q`` scaled to unit norm.  Raises on (near-)zero input."""
    q = np.asarray(q, dtype=float)
    norm = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(norm < 1e-12):
        raise ValueError("cannot normalize a zero quaternion")
    return q / norm


def qmul(p: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Hamilton product ``p * r``, broadcasting over leading axes."""
    p = np.asarray(p, dtype=float)
    r = np.asarray(r, dtype=float)
    pw, pv = p[..., :1], p[..., 1:]
    rw, rv = r[..., :1], r[..., 1:]
    w = pw * rw - np.sum(pv * rv, axis=-1, keepdims=True)
    v = pw * rv + rw * pv + np.cross(pv, rv)
    return np.concatenate([w, v], axis=-1)


def conjugate(q: np.ndarray) -> np.ndarray:
    """Quaternion conjugate; equals the inverse for unit quaternions."""
    q = np.asarray(q, dtype=float)
    return np.concatenate([q[..., :1], -q[..., 1:]], axis=-1)


def rotate_point(q: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Rotate point(s) ``u`` by unit quaternion(s) ``q`` via the sandwich
    product.

    Uses the homogeneous (degree-2 polynomial) form, so it matches
    :func:`rotation_matrix` exactly, coefficient by coefficient.
    """
    q = np.asarray(q, dtype=float)
    u = np.asarray(u, dtype=float)
    w, v = q[..., :1], q[..., 1:]
    vu = np.sum(v * u, axis=-1, keepdims=True)
    return (w * w - np.sum(v * v, axis=-1, keepdims=True)) * u + 2.0 * vu * v + 2.0 * w * np.cross(v, u)


def rotation_matrix(q: np.ndarray) -> np.ndarray:
    """3x3 rotation matrix of ``q``, homogeneous quadratic form.

    Every entry is a quadratic polynomial in the four components (no
    ``1 - 2(...)`` shortcuts), so the matrix of a non-unit quaternion is
    ``|q|^2`` times the rotation — the form whose derivative the analytic
    Jacobians below assume.
    """
    q = np.asarray(q, dtype=float)
    a, b, c, d = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    row0 = np.stack([a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)], axis=-1)
    row1 = np.stack([2 * (b * c + a * d), a * a - b * b + c * c - d * d, 2 * (c * d - a * b)], axis=-1)
    row2 = np.stack([2 * (b * d - a * c), 2 * (c * d + a * b), a * a - b * b - c * c + d * d], axis=-1)
    return np.stack([row0, row1, row2], axis=-2)


def axis_angle(axis: np.ndarray, angle: float | np.ndarray) -> np.ndarray:
    """Unit quaternion rotating by ``angle`` radians about ``axis``."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis, axis=-1, keepdims=True)
    half = 0.5 * np.asarray(angle, dtype=float)
    w = np.cos(half)[..., None]
    v = axis * np.sin(half)[..., None]
    return np.concatenate([w, v], axis=-1)


def geodesic_distance(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Rotation angle between two unit quaternions: ``2 acos(|<p, q>|)``.

    Antipodally symmetric, in ``[0, pi]``.
    """
    dot = np.abs(np.sum(np.asarray(p, float) * np.asarray(q, float), axis=-1))
    return 2.0 * np.arccos(np.clip(dot, 0.0, 1.0))


# ---------------------------------------------------------------------------
# Rigid poses.  A pose (q, t) maps body coordinates p to world coordinates
# R(q) p + t.  compose(a, b) applies b first, then a.
# ---------------------------------------------------------------------------


def compose(qa: np.ndarray, ta: np.ndarray, qb: np.ndarray, tb: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pose product ``a ∘ b`` (apply ``b``, then ``a``)."""
    return qmul(qa, qb), np.asarray(ta, float) + rotate_point(qa, tb)


def pose_inverse(q: np.ndarray, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inverse pose: ``(q, t)^-1 = (conj(q), -R(conj(q)) t)``."""
    qc = conjugate(q)
    return qc, -rotate_point(qc, np.asarray(t, float))


def relative_pose(
    qi: np.ndarray, ti: np.ndarray, qj: np.ndarray, tj: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Relative pose carrying frame ``i`` to frame ``j``.

    Returns ``(q_ij, t_ij)`` with ``q_ij = q_j * conj(q_i)`` and
    ``t_ij = t_j - R(q_ij) t_i``, so that ``compose((q_ij, t_ij), (q_i, t_i))``
    reproduces ``(q_j, t_j)`` exactly.
    """
    qij = qmul(qj, conjugate(qi))
    tij = np.asarray(tj, float) - rotate_point(qij, ti)
    return qij, tij


# ---------------------------------------------------------------------------
# Orthonormal frame on S^3 and geodesic flow.
# ---------------------------------------------------------------------------


def frame_matrix(q: np.ndarray) -> np.ndarray:
    """Orthonormal 4x4 frame attached to unit quaternion ``q``.

    Column 0 is ``q`` itself; columns 1..3 span the tangent space at ``q``.
    The matrix is orthogonal (``V^T V = I``) for unit ``q``.
    """
    q = np.asarray(q, dtype=float)
    q1, q2, q3, q4 = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    row0 = np.stack([q1, -q2, -q3, q4], axis=-1)
    row1 = np.stack([q2, q1, q4, q3], axis=-1)
    row2 = np.stack([q3, -q4, q1, -q2], axis=-1)
    row3 = np.stack([q4, q3, -q2, -q1], axis=-1)
    return np.stack([row0, row1, row2, row3], axis=-2)


def tangent_project(x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Project ambient vector(s) ``u`` onto the tangent space of S^3 at ``x``:
    ``(I - x x^T) u``.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    return u - np.sum(x * u, axis=-1, keepdims=True) * x


def geodesic_flow(x: np.ndarray, v: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Flow along the great circle through ``x`` with tangent velocity ``v``
    for time ``t``.

    Returns the new position and the parallel-transported velocity.  A zero
    velocity leaves both unchanged.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    alpha = np.linalg.norm(v, axis=-1, keepdims=True)
    safe = np.where(alpha > 0.0, alpha, 1.0)
    ct = np.cos(alpha * t)
    st = np.sin(alpha * t)
    x_new = x * ct + (v / safe) * st
    v_new = v * ct - x * (alpha * st)
    return x_new, v_new


# ---------------------------------------------------------------------------
# Analytic Jacobians of the measurement model.  These are the exact ambient
# (R^4 / R^3) derivatives of the homogeneous forms above; finite differences
# of those forms match them to first order with no projection caveats.
# ---------------------------------------------------------------------------


def right_mul_matrix(s: np.ndarray) -> np.ndarray:
    """4x4 matrix ``M`` with ``M p = p * s`` (right Hamilton multiplication)."""
    s = np.asarray(s, dtype=float)
    s1, s2, s3, s4 = s[..., 0], s[..., 1], s[..., 2], s[..., 3]
    row0 = np.stack([s1, -s2, -s3, -s4], axis=-1)
    row1 = np.stack([s2, s1, s4, -s3], axis=-1)
    row2 = np.stack([s3, -s4, s1, s2], axis=-1)
    row3 = np.stack([s4, s3, -s2, s1], axis=-1)
    return np.stack([row0, row1, row2, row3], axis=-2)


def jac_rel_wrt_qi(qj: np.ndarray) -> np.ndarray:
    """Jacobian of the relative rotation ``r = q_j * conj(q_i)`` with respect
    to ``q_i`` (it depends on ``q_j`` only).

    With ``a = q_j`` the rows are built from sign-flipped permutations of
    ``a``; for ``q_j`` the identity the result is ``diag(1, -1, -1, -1)``
    (the conjugation map itself).
    """
    a = np.asarray(qj, dtype=float)
    a1, a2, a3, a4 = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    row0 = np.stack([a1, a2, a3, a4], axis=-1)
    row1 = np.stack([a2, -a1, a4, -a3], axis=-1)
    row2 = np.stack([a3, -a4, -a1, a2], axis=-1)
    row3 = np.stack([a4, a3, -a2, -a1], axis=-1)
    return np.stack([row0, row1, row2, row3], axis=-2)


def jac_rel_wrt_qj(qi: np.ndarray) -> np.ndarray:
    """Jacobian of ``r = q_j * conj(q_i)`` with respect to ``q_j``: the
    matrix of right multiplication by ``conj(q_i)``.
    """
    return right_mul_matrix(conjugate(qi))


def jac_rotate_wrt_q(r: np.ndarray, u: np.ndarray) -> np.ndarray:
    """3x4 Jacobian of the homogeneous sandwich ``R(r) u`` with respect to the
    four components of ``r``, for fixed point ``u``.
    """
    r = np.asarray(r, dtype=float)
    u = np.asarray(u, dtype=float)
    w = r[..., :1]
    v = r[..., 1:]
    col0 = 2.0 * (w * u + np.cross(v, u))
    vu = np.sum(v * u, axis=-1, keepdims=True)
    eye = np.broadcast_to(np.eye(3), r.shape[:-1] + (3, 3))
    ux = _cross_matrix(u)
    block = 2.0 * (
        v[..., :, None] * u[..., None, :]
        - u[..., :, None] * v[..., None, :]
        + vu[..., None] * eye
        - w[..., None] * ux
    )
    return np.concatenate([col0[..., :, None], block], axis=-1)


def _cross_matrix(u: np.ndarray) -> np.ndarray:
    """Skew-symmetric matrix ``[u]_x`` with ``[u]_x w = u x w``."""
    u = np.asarray(u, dtype=float)
    zeros = np.zeros_like(u[..., 0])
    row0 = np.stack([zeros, -u[..., 2], u[..., 1]], axis=-1)
    row1 = np.stack([u[..., 2], zeros, -u[..., 0]], axis=-1)
    row2 = np.stack([-u[..., 1], u[..., 0], zeros], axis=-1)
    return np.stack([row0, row1, row2], axis=-2)


def jac_mu_wrt_ti(r: np.ndarray) -> np.ndarray:
    """3x3 Jacobian of the predicted relative translation
    ``mu = t_j - R(r) t_i`` with respect to ``t_i``: simply ``-R(r)``.
    """
    return -rotation_matrix(r)


def jac_mu_wrt_qi(qi: np.ndarray, qj: np.ndarray, ti: np.ndarray) -> np.ndarray:
    """3x4 Jacobian of ``mu = t_j - R(q_j conj(q_i)) t_i`` w.r.t. ``q_i``.

    Chains the sandwich derivative through the relative-rotation map; zero
    whenever ``t_i`` is zero.
    """
    r = qmul(qj, conjugate(qi))
    s = jac_rotate_wrt_q(r, ti)
    return -np.matmul(s, jac_rel_wrt_qi(qj))


def jac_mu_wrt_qj(qi: np.ndarray, qj: np.ndarray, ti: np.ndarray) -> np.ndarray:
    """3x4 Jacobian of ``mu = t_j - R(q_j conj(q_i)) t_i`` w.r.t. ``q_j``."""
    r = qmul(qj, conjugate(qi))
    s = jac_rotate_wrt_q(r, ti)
    return -np.matmul(s, jac_rel_wrt_qj(qi))
