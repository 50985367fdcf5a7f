"""Shared fixtures and graph helpers for the test suite."""
from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from scipy import sparse

from semisup.graph import SparseGraph

FIXTURES = Path(__file__).parent / "fixtures"

# Pass/fail lines recorded by the acceptance tests; echoed after the run so
# they survive pytest's output capture.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def graph_from_edges(n: int, edges: list[tuple[int, int, float]]) -> SparseGraph:
    """Symmetric graph from undirected (i, j, w) triples."""
    rows, cols, weights = [], [], []
    for i, j, w in edges:
        rows += [i, j]
        cols += [j, i]
        weights += [w, w]
    mat = sparse.csr_matrix((weights, (rows, cols)), shape=(n, n))
    return SparseGraph.from_csr(mat)


def path_graph(n: int) -> SparseGraph:
    """Unit-weight path 0 - 1 - ... - (n-1)."""
    return graph_from_edges(n, [(i, i + 1, 1.0) for i in range(n - 1)])


def random_connected_graph(rng: np.random.Generator, n: int) -> SparseGraph:
    """Random spanning tree plus extra edges; weights in [0.5, 1.5]."""
    edges = {}
    for i in range(1, n):
        j = int(rng.integers(0, i))
        edges[(j, i)] = float(rng.uniform(0.5, 1.5))
    for _ in range(n):
        i, j = sorted(rng.choice(n, size=2, replace=False).tolist())
        edges.setdefault((i, j), float(rng.uniform(0.5, 1.5)))
    return graph_from_edges(n, [(i, j, w) for (i, j), w in edges.items()])


def random_labels(rng: np.random.Generator, n: int, k: int, per_class: int = 1) -> np.ndarray:
    """Partial label vector with at least per_class labeled nodes per class."""
    y = np.full(n, -1, dtype=np.int64)
    order = rng.permutation(n)
    pos = 0
    for c in range(k):
        for _ in range(per_class):
            y[order[pos]] = c
            pos += 1
    extra = rng.integers(0, n // 3 + 1)
    for i in order[pos : pos + extra]:
        y[i] = int(rng.integers(0, k))
    return y


@pytest.fixture(scope="session")
def iris_csv() -> Path:
    return FIXTURES / "iris_like.csv"


@pytest.fixture(scope="session")
def moons_config_path() -> Path:
    return FIXTURES / "two_moons_ls.yaml"
