"""Directional density, its gradients, and the rejection sampler."""

from __future__ import annotations

import numpy as np
import numpy.testing as npt
import pytest

from oracles import bingham_second_moments, fd_directional
from posesync import bingham, quat

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def rand_unit(rng: np.random.Generator, shape=()) -> np.ndarray:
    q = rng.standard_normal((*shape, 4))
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def test_density_zero_at_mode_and_bounded():
    rng = np.random.default_rng(0)
    lam = np.array([-5.0, -20.0, -80.0])
    mode = rand_unit(rng)
    npt.assert_allclose(bingham.log_density_unnorm(lam, mode, mode), 0.0, atol=1e-12)
    x = rand_unit(rng, (500,))
    vals = bingham.log_density_unnorm(lam, mode, x)
    assert np.all(vals <= 1e-12)
    assert np.all(vals >= lam.min() - 1e-12)


def test_density_antipodal_symmetry():
    rng = np.random.default_rng(1)
    lam = np.array([-3.0, -7.0, -11.0])
    mode = rand_unit(rng)
    x = rand_unit(rng, (100,))
    npt.assert_allclose(
        bingham.log_density_unnorm(lam, mode, x),
        bingham.log_density_unnorm(lam, mode, -x),
        atol=0,
    )


def test_density_concentration_shift_identity():
    # Because the frame columns are orthonormal, adding a constant c to every
    # concentration adds exactly c * (1 - (mode·x)^2) to the log-density.
    rng = np.random.default_rng(2)
    lam = np.array([-2.0, -9.0, -31.0])
    c = -4.5
    mode = rand_unit(rng)
    x = rand_unit(rng, (200,))
    lhs = bingham.log_density_unnorm(lam + c, mode, x)
    rhs = bingham.log_density_unnorm(lam, mode, x) + c * (1.0 - (x @ mode) ** 2)
    npt.assert_allclose(lhs, rhs, atol=1e-12)


def test_density_scales_linearly_in_lambda():
    rng = np.random.default_rng(3)
    lam = np.array([-1.0, -2.0, -3.0])
    mode = rand_unit(rng)
    x = rand_unit(rng, (50,))
    npt.assert_allclose(
        bingham.log_density_unnorm(2.0 * lam, mode, x),
        2.0 * bingham.log_density_unnorm(lam, mode, x),
        rtol=1e-14,
    )


def test_grad_x_finite_difference():
    rng = np.random.default_rng(4)
    lam = np.array([-4.0, -10.0, -25.0])
    for _ in range(100):
        mode = rand_unit(rng)
        x = rand_unit(rng)
        g = bingham.grad_x(lam, mode, x)
        for k in range(4):
            d = np.zeros(4)
            d[k] = 1.0
            fd = fd_directional(lambda y: float(bingham.log_density_unnorm(lam, mode, y)), x, d)
            npt.assert_allclose(g[k], fd, rtol=1e-5, atol=1e-6)


def test_grad_mode_finite_difference():
    rng = np.random.default_rng(5)
    lam = np.array([-4.0, -10.0, -25.0])
    for _ in range(100):
        mode = rand_unit(rng)
        x = rand_unit(rng)
        g = bingham.grad_mode(lam, mode, x)
        for k in range(4):
            d = np.zeros(4)
            d[k] = 1.0
            fd = fd_directional(lambda m: float(bingham.log_density_unnorm(lam, m, x)), mode, d)
            npt.assert_allclose(g[k], fd, rtol=1e-5, atol=1e-6)


def test_mode_returns_normalized_mode():
    m = np.array([2.0, 0.0, 0.0, 0.0])
    npt.assert_allclose(bingham.mode(np.array([-1.0, -2.0, -3.0]), m), IDENTITY, atol=0)


def test_sampler_uniform_case():
    rng = np.random.default_rng(6)
    coords = bingham.sample_frame_coords(np.zeros(3), 200_000, rng)
    npt.assert_allclose(np.linalg.norm(coords, axis=-1), 1.0, atol=1e-12)
    moments = np.mean(coords**2, axis=0)
    npt.assert_allclose(moments, 0.25, rtol=0.02)


@pytest.mark.parametrize("lam", [(-2.0, -8.0, -20.0), (-30.0, -30.0, -30.0)])
def test_sampler_moments_match_quadrature(lam):
    rng = np.random.default_rng(7)
    lam = np.array(lam)
    coords = bingham.sample_frame_coords(lam, 200_000, rng)
    moments = np.mean(coords**2, axis=0)
    expected = bingham_second_moments(lam, cells=150)
    npt.assert_allclose(moments, expected, rtol=0.05)


def test_sample_with_mode_matches_identity_frame_quadrature():
    rng = np.random.default_rng(8)
    lam = np.array([-5.0, -15.0, -40.0])
    mode = rand_unit(rng)
    draws = bingham.sample(lam, mode, 150_000, rng)
    npt.assert_allclose(np.linalg.norm(draws, axis=-1), 1.0, atol=1e-12)
    V = quat.frame_matrix(mode)
    frame_coords = draws @ V
    moments = np.mean(frame_coords**2, axis=0)
    expected = bingham_second_moments(lam, cells=150)
    npt.assert_allclose(moments, expected, rtol=0.05)


def test_sampler_deterministic_given_seed():
    lam = np.array([-3.0, -6.0, -9.0])
    a = bingham.sample_frame_coords(lam, 1000, np.random.default_rng(42))
    b = bingham.sample_frame_coords(lam, 1000, np.random.default_rng(42))
    npt.assert_array_equal(a, b)


def test_sampler_budget_exhaustion_raises():
    with pytest.raises(RuntimeError):
        bingham.sample_frame_coords(
            np.array([-10.0, -10.0, -10.0]), 100, np.random.default_rng(0), max_tries=0
        )


def test_lambda_validation():
    with pytest.raises(ValueError):
        bingham.log_density_unnorm(np.array([1.0, -1.0, -1.0]), IDENTITY, IDENTITY)
