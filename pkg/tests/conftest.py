import json

import numpy as np
import pytest

import segnash as sn


def open_context(n, observers, source=(0.1, 0.1), target=(0.9, 0.9), obstacles=(), **obs_kw):
    """Small game context built directly from geometry."""
    grid = sn.build_grid((0, 1, 0, 1), n, n)
    obs = [sn.Obstacle.rectangle(*c) for c in obstacles]
    return sn.GameContext(
        grid,
        sn.rasterize(grid, obs),
        obs,
        sn.ObserverSet(tuple(map(tuple, observers)), **obs_kw),
        [sn.Evader(tuple(source), tuple(target))],
    )


def doc(**kw) -> str:
    base = {
        "grid": {"n": 21},
        "observers": {"positions": [[0.5, 0.5]]},
        "evaders": [{"source": [0.1, 0.1], "target": [0.9, 0.9]}],
    }
    base.update(kw)
    return json.dumps(base)


@pytest.fixture(scope="session")
def bundled_ctx():
    cache = {}

    def get(name, n):
        if (name, n) not in cache:
            cache[name, n] = sn.build_context(sn.load_bundled(name), n)
        return cache[name, n]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
