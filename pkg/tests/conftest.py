import functools
import time

import pytest

from incremental_adaptive import config
from incremental_adaptive.simulate import simulate

SCENARIOS = {
    "default": config.default_scenario,
    "negative_b": lambda: config.default_scenario(plant__b=-1.0),
    "forward": config.forward_scenario,
    "saturated": config.saturated_scenario,
    "robust": config.robust_scenario,
    "robust_strict": lambda: config.robust_scenario(controller__strict_paper_form=True),
    "integral": config.integral_scenario,
}

RUNTIMES = {}


@functools.lru_cache(maxsize=None)
def cached_run(name):
    """Full 100 s run of a named scenario, simulated once per session."""
    start = time.perf_counter()
    traj = simulate(SCENARIOS[name]())
    RUNTIMES[name] = time.perf_counter() - start
    return traj


@pytest.fixture(scope="session")
def run():
    return cached_run
