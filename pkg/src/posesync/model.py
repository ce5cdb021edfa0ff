"""The negative log-posterior ("potential") over absolute poses, and its
exact ambient gradient.

For each stored edge ``(i, j)`` with measured rotation ``x`` and measured
translation ``tau``, writing ``r = q_j * conj(q_i)`` for the implied
relative rotation and ``mu = t_j - R(r) t_i`` for the implied relative
translation, the potential accumulates

* a rotation term ``-sum_k lam_k (v_{k+1}(r) · x)^2``  (Bingham
  measurement likelihood around the implied relative rotation), and
* a translation term ``|tau - mu|^2 / (2 sigma^2)``  (isotropic Gaussian),

plus optional per-node priors: a Bingham prior on each absolute rotation
and an isotropic zero-mean Gaussian prior on each absolute translation.
Both priors default to flat (zero concentrations / infinite variance).

The gradient is the exact derivative of this sum: every edge contributes
to *both* endpoints, including the pull of the translation residual on the
rotations.  Gradient rows of node 0 (the gauge anchor) are zeroed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .graph import Estimate, PoseGraph
from .quat import frame_matrix, normalize

__all__ = ["Gradient", "ModelParams", "gradient", "potential"]


def _identity_quat() -> np.ndarray:
    return np.array([1.0, 0.0, 0.0, 0.0])


@dataclass
class ModelParams:
    """Measurement-model parameters.

    ``data_lambda`` are the three non-positive rotation concentrations
    (more negative = more peaked measurements); ``sigma2`` the translation
    noise variance.  ``prior_lambda``/``prior_mode`` define an optional
    Bingham prior on every absolute rotation (zeros = flat) and
    ``prior_sigma2`` an optional Gaussian prior on every absolute
    translation (infinity = flat).
    """

    data_lambda: np.ndarray
    sigma2: float
    prior_lambda: np.ndarray = field(default_factory=lambda: np.zeros(3))
    prior_mode: np.ndarray = field(default_factory=_identity_quat)
    prior_sigma2: float = math.inf

    def __post_init__(self) -> None:
        self.data_lambda = np.ascontiguousarray(self.data_lambda, dtype=float)
        if self.data_lambda.shape != (3,) or np.any(self.data_lambda > 0.0):
            raise ValueError("data_lambda must be three non-positive concentrations")
        self.sigma2 = float(self.sigma2)
        if not (self.sigma2 > 0.0 and math.isfinite(self.sigma2)):
            raise ValueError("sigma2 must be positive and finite")
        self.prior_lambda = np.ascontiguousarray(self.prior_lambda, dtype=float)
        if self.prior_lambda.shape != (3,) or np.any(self.prior_lambda > 0.0):
            raise ValueError("prior_lambda must be three non-positive concentrations")
        self.prior_mode = normalize(np.asarray(self.prior_mode, dtype=float).reshape(4))
        self.prior_sigma2 = float(self.prior_sigma2)
        if not self.prior_sigma2 > 0.0:
            raise ValueError("prior_sigma2 must be positive (math.inf disables the prior)")

    @classmethod
    def isotropic(cls, magnitude: float = 350.0, sigma2: float = 0.01, **kwargs) -> "ModelParams":
        """Equal concentrations ``(-magnitude,) * 3``."""
        if magnitude < 0.0:
            raise ValueError("magnitude is a non-negative concentration strength")
        return cls(data_lambda=np.full(3, -float(magnitude)), sigma2=sigma2, **kwargs)

    def flat_arrays(self) -> tuple[np.ndarray, float, np.ndarray, np.ndarray, float]:
        """Kernel-ready arrays: ``(lam, 1/sigma2, prior_lam, prior_frame,
        1/prior_sigma2)`` (zero inverse variance encodes a flat prior)."""
        inv_ps2 = 0.0 if math.isinf(self.prior_sigma2) else 1.0 / self.prior_sigma2
        pframe = np.ascontiguousarray(frame_matrix(self.prior_mode))
        return self.data_lambda, 1.0 / self.sigma2, self.prior_lambda, pframe, inv_ps2


@dataclass
class Gradient:
    """Ambient gradient of the potential: ``q`` rows live in R^4, ``t``
    rows in R^3.  Node 0's rows are identically zero (gauge anchor)."""

    q: np.ndarray
    t: np.ndarray


def _check_sizes(graph: PoseGraph, estimate: Estimate) -> None:
    if estimate.n != graph.n:
        raise ValueError(f"estimate has {estimate.n} nodes, graph has {graph.n}")


def potential(graph: PoseGraph, estimate: Estimate, params: ModelParams) -> float:
    """Potential value at an estimate.  Non-negative; exactly zero only for
    a perfectly consistent estimate under flat priors."""
    _check_sizes(graph, estimate)
    ei, ej, mq, mt = graph.arrays()
    lam, inv_s2, plam, pframe, inv_ps2 = params.flat_arrays()
    u, _, _ = kernels.potential_grad(
        estimate.q, estimate.t, ei, ej, mq, mt, lam, inv_s2, plam, pframe, inv_ps2
    )
    return u


def gradient(graph: PoseGraph, estimate: Estimate, params: ModelParams) -> Gradient:
    """Exact ambient gradient of :func:`potential` at an estimate, with the
    anchor node's rows zeroed."""
    _check_sizes(graph, estimate)
    ei, ej, mq, mt = graph.arrays()
    lam, inv_s2, plam, pframe, inv_ps2 = params.flat_arrays()
    _, gq, gt = kernels.potential_grad(
        estimate.q, estimate.t, ei, ej, mq, mt, lam, inv_s2, plam, pframe, inv_ps2
    )
    gq[0] = 0.0
    gt[0] = 0.0
    return Gradient(gq, gt)
