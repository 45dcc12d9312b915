import time

import numpy as np
import pytest

from vasicek_put.boundary import solve
from vasicek_put.model import MarketModel, OptionContract
from vasicek_put.surface import Grid

PAPER_POINT = (0.0, 0.0478, 82.11)


@pytest.fixture(scope="session")
def model():
    return MarketModel.default()


@pytest.fixture(scope="session")
def contract():
    return OptionContract.default()


@pytest.fixture(scope="session")
def timed_solve(model, contract):
    """Default 50 x 41 grid at eps = 0.01, shared by the whole session."""
    t0 = time.perf_counter()
    surf, diag = solve(model, contract, Grid.default(contract.maturity), eps=0.01)
    return surf, diag, time.perf_counter() - t0


@pytest.fixture(scope="session")
def solved(timed_solve):
    return timed_solve[:2]


@pytest.fixture(scope="session")
def surface(solved):
    return solved[0]


@pytest.fixture(scope="session")
def coarse_surface(model, contract):
    surf, _ = solve(model, contract, Grid.default(contract.maturity, n_t=16, n_r=21), eps=0.01)
    return surf


@pytest.fixture(scope="session")
def surface_file(surface, tmp_path_factory):
    from vasicek_put.io import write_surface

    path = tmp_path_factory.mktemp("surf") / "surface.csv"
    write_surface(path, surface)
    return path


def rng(seed=0):
    return np.random.default_rng(seed)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
