"""
Test configuration and fixtures for triplewave tests.
"""
import numpy as np
import pytest
import yaml

from triplewave.geometry.operator import HyperbolicOperator
from triplewave.scenarios.catalog import make_scenario
from triplewave.solver.leapfrog import Grid


@pytest.fixture(autouse=True)
def setup_test_env(tmp_path, monkeypatch):
    """Run every test from a scratch directory so default outputs land there."""
    monkeypatch.chdir(tmp_path)
    yield


@pytest.fixture
def minkowski3():
    return HyperbolicOperator.minkowski(3)


@pytest.fixture
def minkowski4():
    return HyperbolicOperator.minkowski(4)


@pytest.fixture
def fig1_scenario():
    return make_scenario("fig1-2d")


@pytest.fixture
def cylinder_scenario():
    return make_scenario("planes-cylinder")


@pytest.fixture
def small_grid():
    """Square grid on [-2, 2]^2 with h = 1/64."""
    return Grid.uniform([-2.0, -2.0], [2.0, 2.0], [257, 257])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def config_file(tmp_path):
    """Write a YAML config (dict or raw text) and return its path."""
    def _write(content, name="config.yaml"):
        path = tmp_path / name
        text = content if isinstance(content, str) else yaml.safe_dump(content, sort_keys=False)
        path.write_text(text, encoding="utf-8")
        return str(path)
    return _write
