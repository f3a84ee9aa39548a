"""Session-scoped fixtures: the default synthetic county and its storm runs.

The two full-scale Monte Carlo runs are expensive (tens of seconds), so
they execute once per session and every test that needs them shares the
result together with its wall-clock runtime.
"""

from __future__ import annotations

import time

import pytest

from surgeaccess import scenario_io, simulate


@pytest.fixture(scope="session")
def default_fixture_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("fixture-storm1")
    scenario_io.generate_fixture(scenario_io.SyntheticFixtureSpec(), out)
    return out


@pytest.fixture(scope="session")
def default_bundle(default_fixture_dir):
    return scenario_io.load_bundle(default_fixture_dir)


@pytest.fixture(scope="session")
def storm2_bundle(tmp_path_factory):
    out = tmp_path_factory.mktemp("fixture-storm2")
    scenario_io.generate_fixture(scenario_io.SyntheticFixtureSpec(storm="storm-2-like"), out)
    return scenario_io.load_bundle(out)


def _timed_run(bundle):
    start = time.perf_counter()
    result = simulate.run_scenario(
        bundle.config, bundle.graph, bundle.bridges, bundle.supplies, bundle.demands
    )
    return result, time.perf_counter() - start


@pytest.fixture(scope="session")
def storm1_run(default_bundle):
    """(ScenarioResult, elapsed seconds) for the default storm at N=1000."""
    return _timed_run(default_bundle)


@pytest.fixture(scope="session")
def storm2_run(storm2_bundle):
    """(ScenarioResult, elapsed seconds) for the stronger storm at N=1000."""
    return _timed_run(storm2_bundle)
