import numpy as np
import pytest
from scipy.stats import ortho_group

from conftest import connected_hypergraph
from visorder.hypergraph import Hypergraph, from_matrix
from visorder.layout import (CoincidentPointsError, DisconnectedError, LayoutParams,
                             build_spatial_tree, descend, edge_centers, energy, energy_parts,
                             finegrain_points, gradient_approx, gradient_exact,
                             multilevel_layout, repulsion_gradient_tree)
from visorder.matio import SparseMatrix

K2 = Hypergraph.build(2, [[0, 1]])


def two_points():
    return np.array([[0.0, 0, 0, 0], [2.0, 0, 0, 0]])


def finite_difference(g, x, h=1e-4):
    out = np.zeros_like(x)
    for i in range(x.shape[0]):
        for k in range(x.shape[1]):
            xp, xm = x.copy(), x.copy()
            xp[i, k] += h
            xm[i, k] -= h
            out[i, k] = (energy(g, xp) - energy(g, xm)) / (2 * h)
    return out


def test_params_validation():
    p = LayoutParams()
    assert (p.dim, p.gamma, p.delta, p.theta) == (4, 2, 2, 0.5)
    with pytest.raises(ValueError):
        LayoutParams(dim=2)
    with pytest.raises(ValueError):
        LayoutParams(step_decay=1.0)


def test_energy_single_vertex():
    assert energy(Hypergraph.build(1, []), np.zeros((1, 4))) == 0.0


def test_energy_two_points():
    assert energy_parts(K2, two_points()) == (1.0, 0.25)
    assert energy(K2, two_points()) == 1.25


def test_energy_scaling():
    rng = np.random.default_rng(0)
    g = connected_hypergraph(rng, 10)
    x = rng.normal(size=(10, 4))
    rubber, rep = energy_parts(g, x)
    assert np.isclose(energy(g, 2 * x), 4 * rubber + rep / 4, rtol=1e-12)


def test_energy_invariance():
    rng = np.random.default_rng(1)
    g = connected_hypergraph(rng, 12)
    x = rng.normal(size=(12, 4))
    r = ortho_group.rvs(4, random_state=3)
    f = energy(g, x)
    assert abs(energy(g, x @ r.T + rng.normal(size=4)) - f) < 1e-9 * f


def test_energy_rejects_coincident():
    with pytest.raises(CoincidentPointsError):
        energy(K2, np.zeros((2, 4)))


def test_gradient_two_points():
    y = gradient_exact(K2, two_points())
    assert y[0, 0] == pytest.approx(-0.75, abs=1e-15)
    assert np.allclose(y, finite_difference(K2, two_points()), rtol=1e-5, atol=1e-9)


def test_gradient_sums_to_zero():
    rng = np.random.default_rng(2)
    for _ in range(10):
        g = connected_hypergraph(rng, 15)
        y = gradient_exact(g, rng.normal(size=(15, 4)))
        assert np.all(np.abs(y.sum(axis=0)) < 1e-12 * max(1.0, np.abs(y).max()))


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(4)
    for d in (3, 4, 5):
        g = connected_hypergraph(rng, 8, max_size=4)
        x = rng.normal(size=(8, d))
        fd = finite_difference(g, x)
        y = gradient_exact(g, x)
        assert np.linalg.norm(y - fd) < 1e-5 * np.linalg.norm(fd)


def test_edge_centers():
    g = Hypergraph.build(3, [[0, 1, 2], [1]])
    x = np.array([[0.0, 0, 0], [3, 0, 0], [0, 3, 0]])
    assert np.allclose(edge_centers(g, x), [[1, 1, 0], [3, 0, 0]])


def test_tree_single_point():
    t = build_spatial_tree(np.array([[1.0, 2, 3, 4]]), np.array([2.5]))
    assert t.num_nodes == 1 and t.is_leaf(0)
    assert t.weight[0] == 2.5 and np.array_equal(t.center[0], [1, 2, 3, 4])
    assert t.next[0] == -1


def test_tree_invariants():
    rng = np.random.default_rng(5)
    x = rng.random((100, 4))
    w = rng.uniform(0.5, 2, 100)
    t = build_spatial_tree(x, w)
    assert t.weight[0] == pytest.approx(w.sum(), rel=1e-15)
    assert np.allclose(t.center[0], (w[:, None] * x).sum(0) / w.sum(), atol=1e-12)
    leaves = [t.leaf_points[i][t.leaf_points[i] >= 0] for i in range(t.num_nodes) if t.is_leaf(i)]
    assert all(len(l) <= 8 for l in leaves)
    assert sorted(np.concatenate(leaves).tolist()) == list(range(100))
    # threaded traversal visits every node once and ends at the dummy
    seen, cur = [], 0
    while cur >= 0:
        seen.append(cur)
        cur = t.child[cur] if t.child[cur] >= 0 else t.next[cur]
    assert sorted(seen) == list(range(t.num_nodes))


def test_tree_theta_zero_is_exact():
    rng = np.random.default_rng(6)
    g = connected_hypergraph(rng, 60)
    x = rng.random((60, 4))
    p = LayoutParams(theta=0.0)
    t = build_spatial_tree(x, g.weights, p)
    exact = gradient_exact(g, x)
    assert np.abs(gradient_approx(g, x, t, p) - exact).max() <= 1e-12 * np.abs(exact).max()


def test_tree_far_cluster_acts_as_one_charge():
    rng = np.random.default_rng(7)
    a = rng.random((20, 4))
    b = rng.random((20, 4)) + np.array([200.0, 0, 0, 0])
    x = np.vstack([a, b])
    w = np.ones(40)
    t = build_spatial_tree(x, w)
    y = repulsion_gradient_tree(x, w, t, 0.5)
    # far-field on cluster a: subtract the exact in-cluster part
    near = repulsion_gradient_tree(a, w[:20], build_spatial_tree(a, w[:20]), 0.0)
    far = y[:20] - near
    zb = b.mean(axis=0)
    diff = zb - a
    r = np.linalg.norm(diff, axis=1)
    charge = 2 * 20 * r[:, None] ** -4 * diff
    assert np.all(np.linalg.norm(far - charge, axis=1) < 1e-3 * np.linalg.norm(charge, axis=1))


def test_descend_k2():
    x = descend(K2, np.array([[0.0, 0, 0, 0], [0.3, 0.1, 0, 0]]), iters=400)
    assert np.linalg.norm(x[0] - x[1]) == pytest.approx(np.sqrt(2), abs=0.01)


def test_descend_single_vertex_unchanged():
    x0 = np.array([[0.2, 0.3, 0.4, 0.5]])
    assert np.array_equal(descend(Hypergraph.build(1, []), x0), x0)


def test_descend_monotone():
    rng = np.random.default_rng(8)
    g = connected_hypergraph(rng, 50, extra=20)
    x0 = rng.random((50, 4))
    x = descend(g, x0, iters=50)
    assert energy(g, x) <= energy(g, x0)
    assert len(np.unique(x, axis=0)) == 50


def test_disconnected_rejected():
    g = Hypergraph.build(4, [[0, 1], [2, 3]])
    with pytest.raises(DisconnectedError):
        multilevel_layout(g)
    with pytest.raises(DisconnectedError):
        descend(g, np.random.default_rng(0).random((4, 4)))


def test_multilevel_k2():
    x = multilevel_layout(K2)
    assert np.linalg.norm(x[0] - x[1]) == pytest.approx(np.sqrt(2), abs=0.05)


def test_multilevel_path():
    x = multilevel_layout(Hypergraph.build(3, [[0, 1], [1, 2]]))
    assert np.all(np.isfinite(x)) and len(np.unique(x, axis=0)) == 3
    mid = 0.5 * (x[0] + x[2])
    assert np.linalg.norm(x[1] - mid) < np.linalg.norm(x[0] - x[2])


def test_multilevel_deterministic_and_coarsened():
    rng = np.random.default_rng(9)
    g = connected_hypergraph(rng, 150, extra=40)
    p = LayoutParams(coarsest_size=20, descent_iters=30, seed=4)
    a, b = multilevel_layout(g, p), multilevel_layout(g, p)
    assert np.array_equal(a, b)
    assert len(np.unique(a, axis=0)) == 150


def test_tree_path_used_for_large_inputs():
    rng = np.random.default_rng(10)
    g = connected_hypergraph(rng, 80)
    x0 = rng.random((80, 4))
    p = LayoutParams(exact_below=10, descent_iters=20)
    x = descend(g, x0, p)
    assert energy(g, x) < energy(g, x0)


def test_finegrain_points():
    m = SparseMatrix.from_dense([[1.0]])
    assert np.array_equal(finegrain_points(two_points(), m), [[1.0, 0, 0, 0]])
    eye = SparseMatrix.from_dense(np.eye(3))
    xb = np.random.default_rng(0).random((6, 4))
    pts = finegrain_points(xb, eye)
    assert len(pts) == 3 and np.allclose(pts, 0.5 * (xb[:3] + xb[3:]))
    g = from_matrix(eye, "finegrain")
    assert len(pts) == g.num_vertices
