import numpy as np
import pytest

from rmtlab.model import BipartiteGraph, ModelParams, make_params, sample_graph


@pytest.fixture
def k21():
    return BipartiteGraph.from_edges(2, 1, [0, 1], [0, 0])


@pytest.fixture
def small_graph():
    params = make_params(4.0, 8, 1.0)
    return sample_graph(params, seed=3), params


def random_small(n, m, p, seed):
    rng = np.random.default_rng(seed)
    mask = rng.random((n, m)) < p
    u, v = np.nonzero(mask)
    g = BipartiteGraph.from_edges(n, m, u, v)
    return g, ModelParams.from_values(n, m, p=p)


CRITERIA_LINES = []


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
