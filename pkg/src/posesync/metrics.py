"""Accuracy metrics against ground truth and posterior-sample uncertainty
summaries.

Absolute poses are only identifiable up to one global rigid motion (the
gauge): right-composing every pose with a fixed pose H changes no relative
pose and no potential value.  Error metrics therefore first apply the
unique gauge that maps estimated node 0 onto its ground-truth pose, then
compare node by node.
"""

from __future__ import annotations

import numpy as np

from .graph import Estimate
from .quat import compose, conjugate, geodesic_distance, pose_inverse, qmul, rotate_point

__all__ = [
    "align_gauge",
    "mean_rotation_error",
    "mean_translation_error",
    "uncertainty_stats",
]


def align_gauge(estimate: Estimate, truth: Estimate) -> Estimate:
    """Right-compose every estimated pose with ``H = est_0^{-1} ∘ truth_0``.

    After alignment node 0 matches the ground truth exactly while every
    implied relative pose — and hence the potential — is untouched.
    """
    if estimate.n != truth.n:
        raise ValueError(f"estimate has {estimate.n} nodes, truth has {truth.n}")
    inv_q, inv_t = pose_inverse(estimate.q[0], estimate.t[0])
    h_q, h_t = compose(inv_q, inv_t, truth.q[0], truth.t[0])
    new_q = qmul(estimate.q, h_q)
    new_t = estimate.t + rotate_point(estimate.q, h_t)
    return Estimate(new_q, new_t)


def mean_rotation_error(estimate: Estimate, truth: Estimate) -> float:
    """Mean geodesic rotation distance to ground truth, in radians, after
    gauge alignment."""
    aligned = align_gauge(estimate, truth)
    return float(np.mean(geodesic_distance(aligned.q, truth.q)))


def mean_translation_error(estimate: Estimate, truth: Estimate) -> float:
    """Mean Euclidean translation distance to ground truth after gauge
    alignment."""
    aligned = align_gauge(estimate, truth)
    return float(np.mean(np.linalg.norm(aligned.t - truth.t, axis=1)))


def uncertainty_stats(samples_q: np.ndarray, samples_t: np.ndarray) -> dict:
    """Per-node posterior statistics from stacked samples.

    ``samples_q`` has shape (k, n, 4), ``samples_t`` (k, n, 3), with
    ``k >= 2``.  Rotation means are the dominant eigenvectors of the
    per-node averaged outer products (immune to the q/-q sign ambiguity);
    the rotation dispersion is one minus the top eigenvalue, 0 for
    perfectly concentrated samples and at most 3/4.  Translations get the
    sample mean and the (k-1)-normalised sample covariance.
    """
    samples_q = np.asarray(samples_q, dtype=float)
    samples_t = np.asarray(samples_t, dtype=float)
    if samples_q.ndim != 3 or samples_q.shape[2] != 4:
        raise ValueError(f"samples_q must have shape (k, n, 4), got {samples_q.shape}")
    k, n = samples_q.shape[:2]
    if samples_t.shape != (k, n, 3):
        raise ValueError(f"samples_t must have shape ({k}, {n}, 3), got {samples_t.shape}")
    if k < 2:
        raise ValueError("uncertainty statistics need at least 2 samples")

    scatter = np.einsum("kni,knj->nij", samples_q, samples_q) / k
    eigvals, eigvecs = np.linalg.eigh(scatter)
    rotation_mean = eigvecs[:, :, -1]
    lead = np.argmax(np.abs(rotation_mean), axis=1)
    signs = np.sign(rotation_mean[np.arange(n), lead])
    rotation_mean = rotation_mean * signs[:, None]
    dispersion = np.clip(1.0 - eigvals[:, -1], 0.0, 1.0)

    t_mean = samples_t.mean(axis=0)
    centered = samples_t - t_mean
    t_cov = np.einsum("kni,knj->nij", centered, centered) / (k - 1)
    return {
        "rotation_mean": rotation_mean,
        "rotation_dispersion": dispersion,
        "translation_mean": t_mean,
        "translation_cov": t_cov,
    }
