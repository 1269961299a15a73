"""Shared fixtures: seeded generators and small random models."""

import numpy as np
import pytest

from gp_model import fit_fixed
from kernels import KernelSpec


def random_model(rng, n=8, d=2, nu=2.5, theta_range=(0.2, 0.6), sigma2=1.0, beta=None):
    """Fixed-hyperparameter model on uniform points with standard normal outputs."""
    X = rng.random((n, d))
    theta = rng.uniform(*theta_range, size=d)
    y = rng.normal(size=n)
    spec = KernelSpec(theta=tuple(theta), nu=nu, sigma2=sigma2)
    return fit_fixed(X, y, spec, beta)


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def model_factory():
    return random_model
