"""Acceptance criteria 1-11, each at its stated tolerance and time budget.

Every test records one PASS/FAIL line, printed in the pytest summary
(and directly when this file is run as a script).
"""

import contextlib
import io
import itertools
import time
from functools import wraps

import numpy as np
import pytest

import conftest
from conftest import (ARROWHEAD, DATA, RANK_EXAMPLE, connected_hypergraph, grid_laplacian,
                      random_hypergraph, random_sparse)
from visorder.cli import RunConfig, cmd_order
from visorder.hypergraph import Hypergraph, dual, from_matrix
from visorder.layout import (DisconnectedError, LayoutParams, build_spatial_tree, energy,
                             gradient_approx, gradient_exact, multilevel_layout,
                             repulsion_gradient_tree)
from visorder.ludecomp import (BlockRanks, SingularBlockError, determinant, fill_in,
                               lu_complete_pivot, lu_restricted, numerical_rank,
                               permitted_mask, permuted_dense, rank_bound_check)
from visorder.matio import SparseMatrix
from visorder.ordering import OrderOptions, bipartite_edges, check_split, recursive_order, Split
from visorder.partition import kmeans_pp


def criterion(number: int, title: str, budget: float | None = None):
    """Time the body, enforce the budget and record a PASS/FAIL line."""

    def deco(fn):
        @wraps(fn)
        def wrapper(*args, **kwargs):
            t0 = time.perf_counter()
            detail, ok = "", False
            try:
                detail = fn(*args, **kwargs) or ""
                elapsed = time.perf_counter() - t0
                if budget is not None and elapsed >= budget:
                    raise AssertionError(f"took {elapsed:.2f}s, budget {budget}s")
                ok = True
            except Exception as exc:
                detail = f"{type(exc).__name__}: {exc}".splitlines()[0]
                raise
            finally:
                elapsed = time.perf_counter() - t0
                line = (f"criterion {number:2d} {'PASS' if ok else 'FAIL'} "
                        f"[{elapsed:6.2f}s] {title}" + (f" -- {detail}" if detail else ""))
                conftest.ACCEPTANCE[number] = line
                print(line)
        return wrapper
    return deco


# 1 ---------------------------------------------------------------------------

L_PRINTED = np.array([[1, 0, 0, 0], [1 / 2, 1, 0, 0], [1 / 2, -1 / 3, 1, 0], [1 / 2, -1 / 3, -1 / 2, 1]])
U_PRINTED = np.array([[2, 1, 1, 1], [0, 3 / 2, -1 / 2, -1 / 2], [0, 0, 4 / 3, -2 / 3], [0, 0, 0, 1]])
L_HUB = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [1 / 2, 1 / 2, 1 / 2, 1]])
U_HUB = np.array([[2, 0, 0, 1], [0, 2, 0, 1], [0, 0, 2, 1], [0, 0, 0, 1 / 2]])


def _rel_err(a, b):
    nz = b != 0
    return max(float(np.max(np.abs(a[nz] - b[nz]) / np.abs(b[nz]))), float(np.abs(a[~nz]).max(initial=0)))


@criterion(1, "printed 4x4 LU factors and fill-in 1.6 / 1.0", budget=1.0)
def test_criterion_01_fill_example():
    f = lu_complete_pivot(ARROWHEAD, mode="none")
    assert _rel_err(f.L, L_PRINTED) <= 1e-15 and _rel_err(f.U, U_PRINTED) <= 1e-15
    hub = [3, 1, 2, 0]
    a = ARROWHEAD[np.ix_(hub, hub)]
    g = lu_complete_pivot(a, mode="none")
    assert _rel_err(g.L, L_HUB) <= 1e-15 and _rel_err(g.U, U_HUB) <= 1e-15
    fa = fill_in(SparseMatrix.from_dense(ARROWHEAD), f)
    fb = fill_in(SparseMatrix.from_dense(a), g)
    assert fa == 1.6 and fb == 1.0
    return f"fill-in {fa} and {fb}"


# 2 ---------------------------------------------------------------------------

@criterion(2, "5x5 rank example: det 3, ranks 1 and 2, tight bound, singular block", budget=1.0)
def test_criterion_02_rank_example():
    det = determinant(RANK_EXAMPLE)
    assert abs(det - 3.0) < 1e-12
    assert numerical_rank(RANK_EXAMPLE[:2, :2]) == 1 and numerical_rank(RANK_EXAMPLE[2:4, 2:4]) == 2
    v = rank_bound_check(BlockRanks.from_matrix(RANK_EXAMPLE, 2, 2), det != 0)
    assert v.status == "holds" and v.tight
    with pytest.raises(SingularBlockError) as exc:
        lu_restricted(RANK_EXAMPLE, [(0, 2, 0, 2), (2, 4, 2, 4), (4, 5, 4, 5)], u=0.0)
    assert exc.value.scope == (0, 2, 0, 2)
    return f"det {det:.12g}, verdict {v.status} tight={v.tight}"


# 3 ---------------------------------------------------------------------------

def _central_differences(g, x, h=1e-4):
    out = np.zeros_like(x)
    for i, k in itertools.product(range(x.shape[0]), range(x.shape[1])):
        xp, xm = x.copy(), x.copy()
        xp[i, k] += h
        xm[i, k] -= h
        out[i, k] = (energy(g, xp) - energy(g, xm)) / (2 * h)
    return out


@criterion(3, "analytic gradient vs central differences on 50 hypergraphs", budget=10.0)
def test_criterion_03_gradient():
    rng = np.random.default_rng(303)
    worst = 0.0
    for t in range(50):
        k = int(rng.integers(2, 21))
        d = (3, 4, 5)[t % 3]
        g = connected_hypergraph(rng, k, extra=int(rng.integers(0, 6)), max_size=4)
        x = rng.normal(size=(k, d))
        fd = _central_differences(g, x)
        err = np.linalg.norm(gradient_exact(g, x) - fd) / np.linalg.norm(fd)
        worst = max(worst, err)
    assert worst < 1e-5
    return f"max relative error {worst:.2e}"


# 4 ---------------------------------------------------------------------------

@criterion(4, "spatial tree: theta=0 exact, theta=0.5 95th pct error < 1%", budget=30.0)
def test_criterion_04_tree():
    rng = np.random.default_rng(404)
    x = rng.random((500, 4))
    w = np.ones(500)
    g = Hypergraph.build(500, [[i, i + 1] for i in range(499)])
    exact = gradient_exact(g, x)
    p0 = LayoutParams(theta=0.0)
    a0 = gradient_approx(g, x, build_spatial_tree(x, w, p0), p0)
    err0 = float(np.abs(a0 - exact).max() / np.abs(exact).max())
    assert err0 <= 1e-12
    # without hyperedges the exact gradient is pure repulsion
    rep_exact = gradient_exact(Hypergraph.build(500, []), x)
    rep_tree = repulsion_gradient_tree(x, w, build_spatial_tree(x, w), 0.5)
    rel = np.linalg.norm(rep_tree - rep_exact, axis=1) / np.linalg.norm(rep_exact, axis=1)
    p95 = float(np.percentile(rel, 95))
    assert p95 < 0.01
    return f"theta=0 scaled error {err0:.1e}, theta=0.5 p95 {p95:.2e}"


# 5 ---------------------------------------------------------------------------

@criterion(5, "K2 equilibrium at sqrt(2); disconnected input rejected")
def test_criterion_05_equilibrium():
    x = multilevel_layout(Hypergraph.build(2, [[0, 1]]), LayoutParams(dim=4))
    sep = float(np.linalg.norm(x[0] - x[1]))
    assert abs(sep - np.sqrt(2)) <= 0.05
    with pytest.raises(DisconnectedError):
        multilevel_layout(Hypergraph.build(4, [[0, 1], [2, 3]]))
    return f"separation {sep:.6f}"


# 6 ---------------------------------------------------------------------------

def _optimum(x: np.ndarray, m: int) -> float:
    """Exact clustering objective over all labelings with no empty cluster."""
    k = len(x)
    labels = np.array(list(itertools.product(range(m), repeat=k - 1)), dtype=np.int64)
    labels = np.hstack([np.zeros((len(labels), 1), np.int64), labels])
    onehot = labels[:, :, None] == np.arange(m)
    counts = onehot.sum(axis=1)
    keep = np.all(counts > 0, axis=1)
    onehot, counts = onehot[keep], counts[keep]
    sums = np.einsum("nkj,kd->njd", onehot.astype(float), x)
    cost = np.sum(x * x) - np.sum(np.einsum("njd,njd->nj", sums, sums) / counts, axis=1)
    return float(cost.min())


@criterion(6, "k-means++ seeding within 8(ln m + 2) OPT on average; Lloyd monotone", budget=60.0)
def test_criterion_06_kmeans():
    rng = np.random.default_rng(606)
    x = np.vstack([rng.normal(c, 0.3, size=(4, 2)) for c in ([0, 0], [3, 0], [0, 3])])
    ratios = []
    for m in (2, 3):
        opt = _optimum(x, m)
        seeds = [kmeans_pp(x, m, iters=5, seed=s, check_monotone=True) for s in range(200)]
        mean = float(np.mean([c.seed_objective for c in seeds]))
        bound = 8 * (np.log(m) + 2) * opt
        assert mean <= bound
        for c in seeds:
            assert all(b <= a * (1 + 1e-12) for a, b in zip(c.history, c.history[1:]))
        ratios.append(f"m={m}: mean/OPT {mean / opt:.2f} (bound {bound / opt:.1f})")
    return "; ".join(ratios)


# 7 ---------------------------------------------------------------------------

def _check_tree(m: SparseMatrix, t, matching: bool):
    n = m.nrows
    assert sorted(t.row_perm.tolist()) == list(range(n))
    assert sorted(t.col_perm.tolist()) == list(range(n))
    edges = bipartite_edges(m)
    mu = t.matching.mu if t.matching is not None else None
    pat = t.permuted(m).pattern()
    splits = 0
    for nd in t.root.walk():
        if nd.kind != "split":
            continue
        splits += 1
        verts = np.array(sorted(nd.part_of))
        local = {v: i for i, v in enumerate(verts.tolist())}
        part = np.array([nd.part_of[v] for v in verts.tolist()], dtype=np.int8)
        inside = np.isin(edges[:, 0], verts) & np.isin(edges[:, 1], verts)
        le = np.array([[local[int(a)], local[int(b)]] for a, b in edges[inside]], dtype=np.int64).reshape(-1, 2)
        q = np.maximum(part[le[:, 0]], part[le[:, 1]]) if len(le) else np.zeros(0, np.int8)
        lmu = None if mu is None else np.array([local[int(mu[v])] for v in verts])
        check_split(le, Split(part, q, None, None), lmu)
        a, b = nd.children[0], nd.children[1]
        assert not pat[a.row_range[0]:a.row_range[1], b.col_range[0]:b.col_range[1]].any()
        assert not pat[b.row_range[0]:b.row_range[1], a.col_range[0]:a.col_range[1]].any()
    if matching:
        assert np.all(np.diag(pat))
    return splits


@criterion(7, "separator invariants on 200 random matrices (n <= 60)")
def test_criterion_07_separators():
    rng = np.random.default_rng(707)
    splits = 0
    for t in range(200):
        n = int(rng.integers(2, 61))
        m = random_sparse(n, float(rng.uniform(0.02, 0.15)), rng)
        matching = t % 4 != 3
        opts = OrderOptions(form=("bbd", "sbd")[t % 2], cut=("schur", "none", "twobit")[t % 3],
                            min_block=int(rng.integers(2, 9)), matching=matching, seed=t)
        splits += _check_tree(m, recursive_order(m, opts), matching)
    assert splits > 200
    return f"{splits} splits checked"


# 8 ---------------------------------------------------------------------------

@criterion(8, "dual involution (500) and column-net/row-net duality (100)")
def test_criterion_08_duality():
    rng = np.random.default_rng(808)
    for _ in range(500):
        k = int(rng.integers(1, 20))
        g = random_hypergraph(rng, k, int(rng.integers(0, 20)))
        assert dual(dual(g)).structurally_equal(g)
    for _ in range(100):
        nr, nc = (int(v) for v in rng.integers(1, 12, 2))
        d = np.where(rng.random((nr, nc)) < 0.3, 1.0, 0.0)
        m = SparseMatrix.from_dense(d)
        assert dual(from_matrix(m, "colnet")).structurally_equal(from_matrix(m, "rownet"))


# 9 ---------------------------------------------------------------------------

@criterion(9, "15x15 grid Laplacian: ordering beats natural and >= 18 of 20 random", budget=60.0)
def test_criterion_09_grid_quality():
    m = grid_laplacian(15)
    a = m.toarray()
    t = recursive_order(m, OrderOptions(form="bbd"))
    ours = fill_in(m, lu_complete_pivot(permuted_dense(m, t), mode="none"))
    natural = fill_in(m, lu_complete_pivot(a, mode="none"))
    rng = np.random.default_rng(909)
    rand = []
    for _ in range(20):
        p = rng.permutation(225)
        rand.append(fill_in(m, lu_complete_pivot(a[np.ix_(p, p)], mode="none")))
    beaten = sum(ours < r for r in rand)
    assert ours < natural and beaten >= 18
    return f"fill {ours:.3f} vs natural {natural:.3f}; beats {beaten}/20 random (min {min(rand):.3f})"


# 10 --------------------------------------------------------------------------

@criterion(10, "restricted LU equals unpivoted LU and fill stays in permitted region")
def test_criterion_10_restricted_consistency():
    rng = np.random.default_rng(1010)
    compared = contained = 0
    for t in range(18):
        n = int(rng.integers(20, 60))
        m = random_sparse(n, 0.06, rng, shift=float(n) if t % 2 == 0 else 0.0)
        opts = OrderOptions(form=("bbd", "sbd")[t % 2], cut=("schur", "none", "twobit")[t % 3],
                            min_block=4, seed=t)
        tree = recursive_order(m, opts)
        a = permuted_dense(m, tree)
        mask = permitted_mask(tree.block_root(), n, n, tree.form)
        for u in (0.0, 0.5):
            try:
                f = lu_restricted(a, tree, u=u)
            except SingularBlockError:
                continue
            assert not np.any((f.L_mask | f.U_mask) & ~mask)
            contained += 1
            if u == 0.0 and not f.log:
                g = lu_complete_pivot(a, mode="none")
                assert np.abs(f.L - g.L).max() <= 1e-12 and np.abs(f.U - g.U).max() <= 1e-12
                compared += 1
    assert compared >= 6 and contained >= 18
    return f"{compared} pivot-free factorizations compared, {contained} fill masks checked"


# 11 --------------------------------------------------------------------------

FIXTURES = ["identity2", "identity4", "k2", "upper2", "arrowhead4", "rank_example5",
            "grid8", "rand40", "disconnected20", "tridiag48"]


def _order_bytes(name: str, prefix) -> bytes:
    cfg = RunConfig("order", DATA / f"{name}.mtx", min_block=4, seed=5, out_prefix=prefix)
    out = io.StringIO()
    assert cmd_order(cfg, out) == 0
    return b"".join(open(f"{prefix}.{ext}", "rb").read() for ext in ("rowperm", "colperm", "tree")) \
        + out.getvalue().encode()


@criterion(11, "cmd_order byte-identical across runs on 10 fixtures")
def test_criterion_11_determinism(tmp_path):
    for name in FIXTURES:
        a = _order_bytes(name, tmp_path / f"{name}_a")
        b = _order_bytes(name, tmp_path / f"{name}_b")
        assert a == b, name
    return f"{len(FIXTURES)} fixtures"


if __name__ == "__main__":
    import inspect
    import sys
    import tempfile
    from pathlib import Path

    failed = 0
    for name, fn in sorted(globals().items()):
        if not name.startswith("test_criterion_"):
            continue
        with contextlib.redirect_stdout(io.StringIO()), tempfile.TemporaryDirectory() as d:
            try:
                fn(*([Path(d)] if inspect.signature(fn).parameters else []))
            except Exception:
                failed += 1
    for n in sorted(conftest.ACCEPTANCE):
        print(conftest.ACCEPTANCE[n])
    sys.exit(1 if failed else 0)
