import numpy as np
import pytest

from psndyn.config import load_profile
from psndyn.scenario import ExperimentConfig, run_experiment, run_sweep

DESK_GRID = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]


@pytest.fixture(scope="session")
def desk():
    return load_profile("desk")


@pytest.fixture(scope="session")
def desk_sweep(desk):
    """Every desk-profile duty with and without perturbation; shared by the acceptance suite."""
    base = desk.experiment.replace(record_events=True)
    return run_sweep(base, DESK_GRID, with_and_without_perturbation=True)


@pytest.fixture(scope="session")
def small_run():
    cfg = ExperimentConfig(duty=0.8, duration=60.0, n_nodes=8, perturb=True, perturb_interval=20.0,
                           perturb_burst=5.0)
    return run_experiment(cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
