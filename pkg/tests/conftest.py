import numpy as np
import pytest
from hypothesis import settings

from aeromon.config import ExperimentConfig
from aeromon.harness import run_fit

settings.register_profile("suite", deadline=None, max_examples=100)
settings.load_profile("suite")


def small_config(**overrides) -> ExperimentConfig:
    """Reduced-size experiment config for fast integration tests."""
    config = ExperimentConfig()
    config.n_unsafe = 6
    config.fits = 2
    config.test_trajectories = 30
    config.master_seed = 123
    for key, value in overrides.items():
        setattr(config, key, value)
    config.validate()
    return config


@pytest.fixture(scope="session")
def small_fit():
    """One collected bundle with its predictor and all five monitors."""
    config = small_config()
    bundle, predictor, monitors = run_fit(config, 0)
    return config, bundle, predictor, monitors


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
