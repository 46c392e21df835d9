import itertools

import numpy as np
import pytest

from zfising.graph import Graph, build_graph
from zfising.model import IsingModel


def complete_graph(n):
    return build_graph(n, list(itertools.combinations(range(n), 2)))


def cycle_graph(n):
    return build_graph(n, [(i, (i + 1) % n) for i in range(n)])


def grid_graph(rows, cols):
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1))
            if r + 1 < rows:
                edges.append((v, v + cols))
    return build_graph(rows * cols, edges)


def k33():
    return build_graph(6, [(a, b) for a in range(3) for b in range(3, 6)])


def random_model(graph: Graph, rng, scale=0.5) -> IsingModel:
    return IsingModel(graph, rng.normal(0.0, scale, graph.num_edges))


def sign_vectors(n):
    """All ``2**n`` configurations, row ``c`` having spin ``i`` = -1 iff bit ``i`` of ``c``."""
    codes = np.arange(1 << n)
    return 1 - 2 * ((codes[:, None] >> np.arange(n)) & 1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
