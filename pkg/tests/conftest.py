from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp

from visorder.hypergraph import Hypergraph
from visorder.matio import SparseMatrix

DATA = Path(__file__).parent / "data"

ARROWHEAD = np.array([[2., 1, 1, 1],
                      [1, 2, 0, 0],
                      [1, 0, 2, 0],
                      [1, 0, 0, 2]])

RANK_EXAMPLE = np.array([[2., 1, 0, 0, 1],
                         [4, 2, 0, 0, 1],
                         [0, 0, 2, 1, 1],
                         [0, 0, 1, 2, 1],
                         [1, 1, 1, 1, 2]])


@pytest.fixture
def data_dir() -> Path:
    return DATA


def grid_laplacian(k: int) -> SparseMatrix:
    t = sp.diags([-1, 4, -1], [-1, 0, 1], (k, k))
    off = sp.diags([-1, -1], [-1, 1], (k, k))
    return SparseMatrix.from_scipy(sp.kron(sp.eye(k), t) + sp.kron(off, sp.eye(k)))


def random_sparse(n: int, density: float, rng: np.random.Generator,
                  diagonal: bool = True, shift: float = 0.0) -> SparseMatrix:
    """Random square matrix; ``diagonal`` keeps it structurally nonsingular."""
    a = sp.random(n, n, density=density, random_state=rng, format="coo",
                  data_rvs=lambda s: rng.uniform(-1, 1, s))
    d = a.toarray()
    if diagonal:
        d[np.arange(n), np.arange(n)] = rng.uniform(1, 2, n) + shift
    return SparseMatrix.from_dense(d)


def random_hypergraph(rng: np.random.Generator, k: int, l: int, max_size: int = 4,
                      allow_empty: bool = True) -> Hypergraph:
    edges = []
    for _ in range(l):
        lo = 0 if allow_empty else 1
        s = int(rng.integers(lo, min(max_size, k) + 1))
        edges.append(sorted(rng.choice(k, size=s, replace=False).tolist()))
    return Hypergraph.build(k, edges, weights=rng.uniform(0.5, 2, k), costs=rng.uniform(0.5, 2, l))


def connected_hypergraph(rng: np.random.Generator, k: int, extra: int = 5,
                         max_size: int = 3) -> Hypergraph:
    """Random spanning tree of pairs plus ``extra`` random hyperedges."""
    edges = [[int(rng.integers(v)), v] for v in range(1, k)]
    for _ in range(extra):
        s = int(rng.integers(2, min(max_size, k) + 1)) if k > 1 else 1
        edges.append(sorted(rng.choice(k, size=s, replace=False).tolist()))
    return Hypergraph.build(k, edges, weights=rng.uniform(0.5, 2, k),
                            costs=rng.uniform(0.5, 2, len(edges)))


# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
