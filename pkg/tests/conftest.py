"""Shared fixtures for the test suite"""

import os

import numpy as np
import pytest

from mixconf.synth_data import DatasetSpec, SplitSpec, generate, split
from mixconf.tiny_net import Activation, NetConfig, init_state


@pytest.fixture(autouse=True)
def isolated_environment(monkeypatch, tmp_path):
    """Drop MIXCONF_* variables from the host and send default outputs to tmp_path"""
    for key in list(os.environ):
        if key.startswith("MIXCONF_"):
            monkeypatch.delenv(key)
    monkeypatch.setenv("MIXCONF_OUTPUT_DIR", str(tmp_path / "reports"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_state():
    return init_state(NetConfig((2, 8, 8, 3), Activation.TANH, seed=3))


@pytest.fixture
def moons_split():
    dataset = generate(DatasetSpec(n_samples=400, noise_sd=0.1, seed=11))
    return split(dataset, SplitSpec(n_labeled=10, n_validation=0, n_test=100), seed=11)


@pytest.fixture
def write_config(tmp_path):
    """Write a KEY=VALUE experiment file and return its path"""

    def _write(name="experiment.env", **values):
        path = tmp_path / name
        path.write_text("".join(f"{key}={value}\n" for key, value in values.items()))
        return path

    return _write
