"""Shared fixtures: one cheap end-to-end run so numba JIT compilation (or
cache loading) happens before any runtime-sensitive test starts timing."""

from __future__ import annotations

import numpy as np
import pytest

from posesync import baselines, model, synth, tgmcmc


@pytest.fixture(scope="session", autouse=True)
def warm_backend():
    graph = synth.generate(4, 1.0, noise_lambda=np.array([-300.0] * 3), noise_sigma2=0.01, seed=0)
    params = model.ModelParams.isotropic(300.0, 0.01)
    init = baselines.mst_propagate(graph)
    tgmcmc.optimize(graph, params, tgmcmc.SamplerConfig(iterations=3), init)
    tgmcmc.sample_posterior(
        graph, params, tgmcmc.SamplerConfig(iterations=3, beta=100.0, thin=2), init, 2
    )
