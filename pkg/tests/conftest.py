import numpy as np
import pytest

from amplasso import ModelParams, three_point


@pytest.fixture(scope="session")
def bench_params() -> ModelParams:
    """The running benchmark configuration: delta=0.64, sigma^2=0.2, eps=0.128."""
    return ModelParams(delta=0.64, sigma2=0.2, prior=three_point(0.128))


@pytest.fixture(scope="session")
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
