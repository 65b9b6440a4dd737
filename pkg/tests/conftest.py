import numpy as np
import pytest

from rismaxmin.channel import assemble_channel
from rismaxmin.config import bundled_scenario, load_config
from rismaxmin.geometry import (Direction, Scenario, Terminal, WeightedUser, build_grid_layout,
                                wavelength_from_frequency)

ACCEPTANCE_RESULTS = []

TEN_USER_ANGLES = [(0, 0), (20, 0), (20, 120), (20, 240), (40, 40),
                   (40, 160), (40, 280), (60, 80), (60, 200), (60, 320)]


def user(theta, phi, dist, weight=1.0):
    return WeightedUser(Terminal(Direction(theta, phi), dist), weight)


def central_diff(fun, x, h=1e-6):
    """Central differences of a scalar or vector valued function; rows index x."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((np.asarray(fun(x + e)) - np.asarray(fun(x - e))) / (2 * h))
    return np.array(cols)


@pytest.fixture(scope="session")
def prototype_scenario():
    """16x16 at 3.4 GHz, feed 0.984 m on broadside, three receivers weighted 1, 2, 5."""
    wl = wavelength_from_frequency(3.4e9)
    return Scenario(wl, Terminal(Direction(0, 0), 0.984),
                    (user(50, 0, 6.440, 1), user(40, 180, 7.925, 2), user(60, 180, 6.984, 5)),
                    build_grid_layout(16, 16, wl / 2))


@pytest.fixture(scope="session")
def prototype_channel(prototype_scenario):
    return assemble_channel(prototype_scenario)


@pytest.fixture(scope="session")
def ten_user_scenario():
    return load_config(bundled_scenario("tenuser_equal")).scenario


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_channel(rng, n, k):
    return rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num, name, ok, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {num:2d}. {name}: {detail}")
