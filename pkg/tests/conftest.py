import numpy as np
import pytest

from wardflow import canonical_scenario, synthetic_series


@pytest.fixture(scope="session")
def config():
    return canonical_scenario()


@pytest.fixture(scope="session")
def series(config):
    return synthetic_series(seed=101)


@pytest.fixture()
def rng():
    return np.random.default_rng(42)
