"""Shared fixtures. The benchmark Monte Carlo runs are expensive, so they are
session-scoped and reused by every test that needs them."""

import numpy as np
import pytest

from kbstab import export_result, preset_spec, run_experiment


@pytest.fixture(scope="session")
def fig1_result():
    return run_experiment(preset_spec("fig1", workers=1))


@pytest.fixture(scope="session")
def fig1_export(fig1_result, tmp_path_factory):
    out = tmp_path_factory.mktemp("fig1_w1")
    export_result(fig1_result, out)
    return out


@pytest.fixture(scope="session")
def fig2_result():
    return run_experiment(preset_spec("fig2", workers=1))


@pytest.fixture
def rng():
    # fresh generator per test: draws never depend on test ordering
    return np.random.default_rng(20240817)
