"""Shared fixtures: expensive demonstration datasets and fitted models are
built once per session and reused across test modules."""

import numpy as np
import pytest

from koopland.harness import StudyConfig, collect_demonstrations
from koopland.koopman import BasisSpec, fit
from koopland.pilots import PilotConfig


@pytest.fixture(scope="session")
def study_config():
    return StudyConfig(seed=0)


@pytest.fixture(scope="session")
def expert_demos(study_config):
    """10 expert training trials plus 5 held-out trials."""
    train, train_pairs = collect_demonstrations(
        PilotConfig(kind="expert"), 10, study_config.sim, master=0, source=2)
    holdout, _ = collect_demonstrations(
        PilotConfig(kind="expert"), 5, study_config.sim, master=0, source=99)
    return {"train": train, "train_pairs": train_pairs, "holdout": holdout}


@pytest.fixture(scope="session")
def nonlinear_model(expert_demos):
    return fit(expert_demos["train_pairs"], BasisSpec("nonlinear"))


@pytest.fixture(scope="session")
def linear_model(expert_demos):
    return fit(expert_demos["train_pairs"], BasisSpec("linear"))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)
