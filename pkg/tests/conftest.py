from dataclasses import replace
from importlib import resources

import pytest

from subprime_sim.scenario import load_scenario

TRAP_PATH = resources.files("subprime_sim") / "scenarios" / "trap.json"


@pytest.fixture(scope="session")
def trap_path():
    return str(TRAP_PATH)


@pytest.fixture(scope="session")
def trap():
    return load_scenario(TRAP_PATH)


@pytest.fixture
def short_trap(trap):
    return replace(trap, horizon=200, replications=8)
