import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from jordancover.graph import Graph


@pytest.fixture
def path5() -> Graph:
    """Path graph 0-1-2-3-4."""
    return Graph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)])


@pytest.fixture
def star5() -> Graph:
    """Star: center 0 with leaves 1-4."""
    return Graph.from_edges(5, [(0, 1), (0, 2), (0, 3), (0, 4)])


@pytest.fixture
def two_edges() -> Graph:
    """Two disjoint edges {0,1} and {2,3}."""
    return Graph.from_edges(4, [(0, 1), (2, 3)])


def random_graph(rng: np.random.Generator, n: int, p: float) -> Graph:
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)
             if rng.random() < p]
    return Graph.from_edges(n, edges)
