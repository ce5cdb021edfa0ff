"""Quaternion algebra, S^3 geometry, and Jacobian tests."""

from __future__ import annotations

import numpy as np
import numpy.testing as npt

from posesync import quat

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def rand_unit(rng: np.random.Generator, shape=()) -> np.ndarray:
    q = rng.standard_normal((*shape, 4))
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def test_qmul_identity_element():
    rng = np.random.default_rng(0)
    r = rand_unit(rng)
    npt.assert_allclose(quat.qmul(IDENTITY, r), r, atol=1e-15)
    npt.assert_allclose(quat.qmul(r, IDENTITY), r, atol=1e-15)


def test_qmul_ij_equals_k():
    i = np.array([0.0, 1.0, 0.0, 0.0])
    j = np.array([0.0, 0.0, 1.0, 0.0])
    k = np.array([0.0, 0.0, 0.0, 1.0])
    npt.assert_allclose(quat.qmul(i, j), k, atol=1e-15)
    npt.assert_allclose(quat.qmul(j, i), -k, atol=1e-15)


def test_qmul_preserves_norm():
    rng = np.random.default_rng(1)
    p = rand_unit(rng, (1000,))
    r = rand_unit(rng, (1000,))
    norms = np.linalg.norm(quat.qmul(p, r), axis=-1)
    npt.assert_allclose(norms, 1.0, atol=1e-12)


def test_qmul_associative():
    rng = np.random.default_rng(2)
    a, b, c = rand_unit(rng, (3,))
    npt.assert_allclose(
        quat.qmul(quat.qmul(a, b), c), quat.qmul(a, quat.qmul(b, c)), atol=1e-14
    )


def test_conjugate_basic():
    npt.assert_allclose(quat.conjugate(IDENTITY), IDENTITY, atol=0)
    rng = np.random.default_rng(3)
    q = rand_unit(rng, (1000,))
    npt.assert_allclose(quat.qmul(q, quat.conjugate(q)), np.tile(IDENTITY, (1000, 1)), atol=1e-14)
    npt.assert_allclose(quat.conjugate(quat.conjugate(q)), q, atol=0)


def test_normalize():
    rng = np.random.default_rng(4)
    q = rng.standard_normal((50, 4)) * 7.0
    npt.assert_allclose(np.linalg.norm(quat.normalize(q), axis=-1), 1.0, atol=1e-14)


def test_rotate_point_identity():
    u = np.array([1.0, 2.0, 3.0])
    npt.assert_allclose(quat.rotate_point(IDENTITY, u), u, atol=0)


def test_rotate_point_preserves_norm_and_matches_matrix():
    rng = np.random.default_rng(5)
    q = rand_unit(rng, (200,))
    u = rng.standard_normal((200, 3))
    ru = quat.rotate_point(q, u)
    npt.assert_allclose(np.linalg.norm(ru, axis=-1), np.linalg.norm(u, axis=-1), rtol=1e-12)
    via_matrix = np.einsum("nij,nj->ni", quat.rotation_matrix(q), u)
    npt.assert_allclose(ru, via_matrix, atol=1e-12)


def test_rotate_point_quarter_turn_about_z():
    q = quat.axis_angle(np.array([0.0, 0.0, 1.0]), np.pi / 2)
    npt.assert_allclose(quat.rotate_point(q, np.array([1.0, 0.0, 0.0])), [0.0, 1.0, 0.0], atol=1e-15)


def test_rotation_homogeneous_scaling():
    # The sandwich form is a pure quadratic in q: scaling q by a scales the
    # rotation output by a^2 (no hidden normalization).
    rng = np.random.default_rng(6)
    q = rand_unit(rng)
    u = rng.standard_normal(3)
    npt.assert_allclose(quat.rotate_point(2.0 * q, u), 4.0 * quat.rotate_point(q, u), rtol=1e-12)


def test_rotation_matrix_identity_and_orthogonality():
    npt.assert_allclose(quat.rotation_matrix(IDENTITY), np.eye(3), atol=0)
    rng = np.random.default_rng(7)
    q = rand_unit(rng, (100,))
    R = quat.rotation_matrix(q)
    prods = np.einsum("nij,nkj->nik", R, R)
    npt.assert_allclose(prods, np.tile(np.eye(3), (100, 1, 1)), atol=1e-12)
    npt.assert_allclose(np.linalg.det(R), 1.0, rtol=1e-12)


def test_axis_angle_half_angle_form():
    axis = np.array([1.0, 0.0, 0.0])
    q = quat.axis_angle(axis, 2.0)
    npt.assert_allclose(q, [np.cos(1.0), np.sin(1.0), 0.0, 0.0], atol=1e-15)


def test_geodesic_distance():
    rng = np.random.default_rng(8)
    q = rand_unit(rng, (100,))
    npt.assert_allclose(quat.geodesic_distance(q, q), 0.0, atol=1e-7)
    npt.assert_allclose(quat.geodesic_distance(q, -q), 0.0, atol=1e-7)
    z90 = quat.axis_angle(np.array([0.0, 0.0, 1.0]), np.pi / 2)
    npt.assert_allclose(quat.geodesic_distance(IDENTITY, z90), np.pi / 2, rtol=1e-12)


def test_compose_and_inverse_roundtrip():
    rng = np.random.default_rng(9)
    qa, qb = rand_unit(rng, (2,))
    ta, tb = rng.standard_normal((2, 3))
    qi, ti = quat.pose_inverse(qa, ta)
    q_id, t_id = quat.compose(qa, ta, qi, ti)
    npt.assert_allclose(np.abs(q_id @ IDENTITY), 1.0, atol=1e-12)
    npt.assert_allclose(t_id, 0.0, atol=1e-12)
    # apply-b-then-a on a point equals sequential application
    u = rng.standard_normal(3)
    qc, tc = quat.compose(qa, ta, qb, tb)
    direct = quat.rotate_point(qa, quat.rotate_point(qb, u) + tb) + ta
    npt.assert_allclose(quat.rotate_point(qc, u) + tc, direct, atol=1e-12)


def test_relative_pose_identity_for_equal_poses():
    rng = np.random.default_rng(10)
    q = rand_unit(rng)
    t = rng.standard_normal(3)
    r, tr = quat.relative_pose(q, t, q, t)
    npt.assert_allclose(np.abs(r @ IDENTITY), 1.0, atol=1e-12)
    npt.assert_allclose(tr, 0.0, atol=1e-12)


def test_relative_pose_compose_roundtrip():
    rng = np.random.default_rng(11)
    qi, qj = rand_unit(rng, (2,))
    ti, tj = rng.standard_normal((2, 3))
    r, tr = quat.relative_pose(qi, ti, qj, tj)
    q_back, t_back = quat.compose(r, tr, qi, ti)
    npt.assert_allclose(np.abs(np.dot(q_back, qj)), 1.0, atol=1e-12)
    npt.assert_allclose(t_back, tj, atol=1e-12)


def test_frame_matrix_properties():
    rng = np.random.default_rng(12)
    q = rand_unit(rng, (500,))
    V = quat.frame_matrix(q)
    npt.assert_allclose(V[..., :, 0], q, atol=0)
    prods = np.einsum("nij,nkj->nik", V, V)
    npt.assert_allclose(prods, np.tile(np.eye(4), (500, 1, 1)), atol=1e-12)


def test_frame_matrix_identity_last_column():
    V = quat.frame_matrix(IDENTITY)
    npt.assert_allclose(V[:, 3], [0.0, 0.0, 0.0, -1.0], atol=0)


def test_tangent_project():
    rng = np.random.default_rng(13)
    x = rand_unit(rng, (200,))
    u = rng.standard_normal((200, 4))
    v = quat.tangent_project(x, u)
    npt.assert_allclose(np.sum(x * v, axis=-1), 0.0, atol=1e-12)
    npt.assert_allclose(quat.tangent_project(x, v), v, atol=1e-12)
    # u parallel to x projects to zero
    npt.assert_allclose(quat.tangent_project(x, 3.0 * x), 0.0, atol=1e-12)


def test_geodesic_flow_zero_time_and_zero_velocity():
    rng = np.random.default_rng(14)
    x = rand_unit(rng, (20,))
    v = quat.tangent_project(x, rng.standard_normal((20, 4)))
    x2, v2 = quat.geodesic_flow(x, v, 0.0)
    npt.assert_allclose(x2, x, atol=0)
    npt.assert_allclose(v2, v, atol=0)
    x3, v3 = quat.geodesic_flow(x, np.zeros_like(v), 0.7)
    npt.assert_allclose(x3, x, atol=0)
    npt.assert_allclose(v3, 0.0, atol=0)


def test_geodesic_flow_invariants():
    rng = np.random.default_rng(15)
    x = rand_unit(rng, (300,))
    v = quat.tangent_project(x, rng.standard_normal((300, 4)))
    x2, v2 = quat.geodesic_flow(x, v, 0.3)
    npt.assert_allclose(np.linalg.norm(x2, axis=-1), 1.0, atol=1e-10)
    npt.assert_allclose(np.sum(x2 * v2, axis=-1), 0.0, atol=1e-9)
    npt.assert_allclose(np.linalg.norm(v2, axis=-1), np.linalg.norm(v, axis=-1), rtol=1e-10)
    # reversibility
    x0, v0 = quat.geodesic_flow(x2, v2, -0.3)
    npt.assert_allclose(x0, x, atol=1e-10)
    npt.assert_allclose(v0, v, atol=1e-9)


def test_geodesic_flow_quarter_circle():
    v = np.array([0.0, np.pi / 2, 0.0, 0.0])
    x2, v2 = quat.geodesic_flow(IDENTITY, v, 1.0)
    npt.assert_allclose(x2, [0.0, 1.0, 0.0, 0.0], atol=1e-15)
    npt.assert_allclose(v2, [-np.pi / 2, 0.0, 0.0, 0.0], atol=1e-15)


def test_geodesic_flow_small_time_taylor():
    rng = np.random.default_rng(16)
    x = rand_unit(rng)
    v = quat.tangent_project(x, rng.standard_normal(4))
    dt = 1e-7
    x2, _ = quat.geodesic_flow(x, v, dt)
    npt.assert_allclose(x2, x + dt * v, atol=1e-12)


def test_right_mul_matrix():
    rng = np.random.default_rng(17)
    p, s = rand_unit(rng, (2,))
    npt.assert_allclose(quat.right_mul_matrix(s) @ p, quat.qmul(p, s), atol=1e-14)


def test_jac_rel_identity_case():
    npt.assert_allclose(quat.jac_rel_wrt_qi(IDENTITY), np.diag([1.0, -1.0, -1.0, -1.0]), atol=0)


def test_jac_rel_finite_difference():
    rng = np.random.default_rng(18)
    for _ in range(100):
        qi, qj = rand_unit(rng, (2,))
        Ji = quat.jac_rel_wrt_qi(qj)
        Jj = quat.jac_rel_wrt_qj(qi)
        step = 1e-6
        for k in range(4):
            d = np.zeros(4)
            d[k] = step
            fd_i = (quat.qmul(qj, quat.conjugate(qi + d)) - quat.qmul(qj, quat.conjugate(qi - d))) / (2 * step)
            fd_j = (quat.qmul(qj + d, quat.conjugate(qi)) - quat.qmul(qj - d, quat.conjugate(qi))) / (2 * step)
            npt.assert_allclose(Ji[:, k], fd_i, atol=1e-6)
            npt.assert_allclose(Jj[:, k], fd_j, atol=1e-6)


def test_jac_rotate_finite_difference():
    rng = np.random.default_rng(19)
    for _ in range(100):
        q = rand_unit(rng)
        u = rng.standard_normal(3)
        J = quat.jac_rotate_wrt_q(q, u)
        step = 1e-6
        for k in range(4):
            d = np.zeros(4)
            d[k] = step
            fd = (quat.rotate_point(q + d, u) - quat.rotate_point(q - d, u)) / (2 * step)
            npt.assert_allclose(J[:, k], fd, rtol=1e-5, atol=1e-6)


def test_jac_mu_wrt_ti_identity_is_negative_eye():
    npt.assert_allclose(quat.jac_mu_wrt_ti(IDENTITY), -np.eye(3), atol=0)


def _mu(qi, ti, qj, tj):
    return quat.relative_pose(qi, ti, qj, tj)[1]


def test_jac_mu_finite_difference():
    rng = np.random.default_rng(20)
    step = 1e-6
    for _ in range(100):
        qi, qj = rand_unit(rng, (2,))
        ti, tj = rng.standard_normal((2, 3))
        Jt = quat.jac_mu_wrt_ti(quat.qmul(qj, quat.conjugate(qi)))
        Jqi = quat.jac_mu_wrt_qi(qi, qj, ti)
        Jqj = quat.jac_mu_wrt_qj(qi, qj, ti)
        for k in range(3):
            d = np.zeros(3)
            d[k] = step
            fd = (_mu(qi, ti + d, qj, tj) - _mu(qi, ti - d, qj, tj)) / (2 * step)
            npt.assert_allclose(Jt[:, k], fd, rtol=1e-6, atol=1e-7)
        for k in range(4):
            d = np.zeros(4)
            d[k] = step
            fd_i = (_mu(qi + d, ti, qj, tj) - _mu(qi - d, ti, qj, tj)) / (2 * step)
            fd_j = (_mu(qi, ti, qj + d, tj) - _mu(qi, ti, qj - d, tj)) / (2 * step)
            npt.assert_allclose(Jqi[:, k], fd_i, rtol=1e-5, atol=1e-6)
            npt.assert_allclose(Jqj[:, k], fd_j, rtol=1e-5, atol=1e-6)
