"""Visual representations of hypergraphs by energy minimization.

Vertices repel like charges with potential ``w_i w_j / r**(d-2)`` and every
hyperedge pulls its members toward the hyperedge center with a quadratic
spring.  The repulsion can be evaluated exactly (O(k^2)) or through a
2^d-ary spatial tree that lumps far-away cells into a single charge.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

from .hypergraph import Hypergraph, coarsen, connected_components
from .matio import SparseMatrix

log = logging.getLogger(__name__)


class CoincidentPointsError(ValueError):
    """Two vertices share a position; the energy is undefined there."""


class DisconnectedError(ValueError):
    """The hypergraph is disconnected, so the energy has no minimizer."""


@dataclass(frozen=True)
class LayoutParams:
    dim: int = 4
    theta: float = 0.5
    step_decay: float = 0.9
    descent_iters: int = 200
    coarsest_size: int = 64
    prolong_scale: float = 1.25
    jitter: float = 0.01
    seed: int = 0
    leaf_capacity: int = 8
    # below this vertex count the O(k^2) repulsion is cheaper than the tree
    exact_below: int = 1024
    # stop once the largest per-vertex gradient falls below this
    grad_tol: float = 0.0
    # restart the step size once moves shrink below this fraction of the box
    restart_fraction: float = 1e-3

    def __post_init__(self):
        if self.dim < 3:
            raise ValueError("dim must be at least 3")
        if not 0 < self.step_decay < 1:
            raise ValueError("step_decay must lie in (0, 1)")
        if self.theta < 0:
            raise ValueError("theta must be non-negative")

    @property
    def gamma(self) -> int:
        return 2

    @property
    def delta(self) -> int:
        return self.dim - 2


DEFAULT_PARAMS = LayoutParams()


def _check_points(x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)):
        raise CoincidentPointsError("layout contains non-finite coordinates")
    if len(np.unique(x, axis=0)) != len(x):
        raise CoincidentPointsError("two vertices occupy the same position")


def _edge_arrays(g: Hypergraph):
    if g.has_empty_edges:
        raise ValueError("empty hyperedges have no center; drop them first")
    members, eid = g.flat_edges()
    sizes = np.bincount(eid, minlength=g.num_edges).astype(float)
    return members, eid, sizes


def edge_centers(g: Hypergraph, x: np.ndarray) -> np.ndarray:
    members, eid, sizes = _edge_arrays(g)
    z = np.zeros((g.num_edges, x.shape[1]))
    np.add.at(z, eid, x[members])
    return z / np.maximum(sizes, 1)[:, None]


def _rubber(g: Hypergraph, x: np.ndarray):
    members, eid, sizes = _edge_arrays(g)
    z = np.zeros((g.num_edges, x.shape[1]))
    np.add.at(z, eid, x[members])
    z /= np.maximum(sizes, 1)[:, None]
    diff = x[members] - z[eid]
    c = g.costs[eid]
    energy = 0.5 * float(np.sum(c * np.einsum("ij,ij->i", diff, diff)))
    grad = np.zeros_like(x)
    np.add.at(grad, members, c[:, None] * diff)
    return energy, grad


def _row_blocks(k: int, budget: int = 1 << 21):
    step = max(1, budget // max(k, 1))
    for s in range(0, k, step):
        yield s, min(k, s + step)


def _repulsion_energy(x: np.ndarray, w: np.ndarray, d: int) -> float:
    k = len(x)
    total = 0.0
    for s, t in _row_blocks(k):
        diff = x[s:t, None, :] - x[None, :, :]
        r2 = np.einsum("ijk,ijk->ij", diff, diff)
        rows = np.arange(s, t)
        r2[rows - s, rows] = np.inf
        if np.any(r2 == 0):
            raise CoincidentPointsError("two vertices occupy the same position")
        total += float(np.sum(w[s:t, None] * w[None, :] * r2 ** (-(d - 2) / 2)))
    return 0.5 * total


def _repulsion_gradient(x: np.ndarray, w: np.ndarray, d: int) -> np.ndarray:
    k = len(x)
    grad = np.zeros_like(x)
    for s, t in _row_blocks(k):
        diff = x[None, :, :] - x[s:t, None, :]      # x_i - x_n, n in block
        r2 = np.einsum("ijk,ijk->ij", diff, diff)
        rows = np.arange(s, t)
        r2[rows - s, rows] = np.inf
        if np.any(r2 == 0):
            raise CoincidentPointsError("two vertices occupy the same position")
        coef = (d - 2) * w[s:t, None] * w[None, :] * r2 ** (-d / 2)
        grad[s:t] = np.einsum("ij,ijk->ik", coef, diff)
    return grad


def energy(g: Hypergraph, x: np.ndarray, params: LayoutParams = DEFAULT_PARAMS) -> float:
    """Spring energy of the hyperedges plus exact pairwise repulsion."""
    x = np.asarray(x, dtype=float)
    if len(x) != g.num_vertices:
        raise ValueError("one point per vertex required")
    rubber, _ = _rubber(g, x)
    return rubber + _repulsion_energy(x, g.weights, x.shape[1])


def energy_parts(g: Hypergraph, x: np.ndarray) -> tuple[float, float]:
    """(spring, repulsion) contributions of :func:`energy`."""
    x = np.asarray(x, dtype=float)
    rubber, _ = _rubber(g, x)
    return rubber, _repulsion_energy(x, g.weights, x.shape[1])


def gradient_exact(g: Hypergraph, x: np.ndarray, params: LayoutParams = DEFAULT_PARAMS) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    _, grad = _rubber(g, x)
    return grad + _repulsion_gradient(x, g.weights, x.shape[1])


@dataclass(frozen=True, eq=False)
class SpatialTree:
    """Node arrays of a 2^d-ary cell tree; node 0 is the root.

    ``next`` threads the traversal: it is the next sibling, or the parent's
    ``next`` for last children, and ``-1`` (the dummy) after the root.
    """

    center: np.ndarray
    weight: np.ndarray
    diameter: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    child: np.ndarray
    next: np.ndarray
    leaf_points: np.ndarray  # (nodes, max leaf size), padded with -1

    @property
    def num_nodes(self) -> int:
        return len(self.weight)

    def is_leaf(self, t: int) -> bool:
        return self.child[t] < 0


def build_spatial_tree(x: np.ndarray, weights: np.ndarray,
                       params: LayoutParams = DEFAULT_PARAMS) -> SpatialTree:
    x = np.asarray(x, dtype=float)
    w = np.asarray(weights, dtype=float)
    k, d = x.shape
    if k == 0:
        raise ValueError("cannot build a tree on zero points")
    cap = params.leaf_capacity
    lo0, hi0 = x.min(axis=0), x.max(axis=0)
    min_extent = 1e-12 * max(float(np.linalg.norm(hi0 - lo0)), 1e-300)
    bits = (1 << np.arange(d))

    centers, wts, diams, los, his, childs, leaves = [], [], [], [], [], [], []
    children_of: list[list[int]] = []

    def add(idx, lo, hi):
        t = len(wts)
        ww = w[idx]
        wsum = float(ww.sum())
        centers.append((ww[:, None] * x[idx]).sum(axis=0) / wsum)
        wts.append(wsum)
        diams.append(float(np.linalg.norm(hi - lo)))
        los.append(lo)
        his.append(hi)
        childs.append(-1)
        leaves.append(None)
        children_of.append([])
        return t

    stack = [(add(np.arange(k), lo0, hi0), np.arange(k), lo0, hi0)]
    while stack:
        t, idx, lo, hi = stack.pop()
        if len(idx) <= cap or diams[t] <= min_extent:
            leaves[t] = idx
            continue
        mid = 0.5 * (lo + hi)
        code = ((x[idx] > mid) * bits).sum(axis=1)
        ids = []
        for c in np.unique(code):
            sub = idx[code == c]
            upper = (int(c) & bits) > 0
            clo, chi = np.where(upper, mid, lo), np.where(upper, hi, mid)
            ids.append(add(sub, clo, chi))
            stack.append((ids[-1], sub, clo, chi))
        children_of[t] = ids
        childs[t] = ids[0]

    n = len(wts)
    nxt = np.full(n, -1, dtype=np.int64)
    todo = [(0, -1)]
    while todo:
        t, after = todo.pop()
        nxt[t] = after
        kids = children_of[t]
        for i, a in enumerate(kids):
            todo.append((a, after if i == len(kids) - 1 else kids[i + 1]))

    width = max(len(l) for l in leaves if l is not None)
    leaf_points = np.full((n, width), -1, dtype=np.int64)
    for t, l in enumerate(leaves):
        if l is not None:
            leaf_points[t, :len(l)] = l
    return SpatialTree(np.array(centers), np.array(wts), np.array(diams), np.array(los),
                       np.array(his), np.array(childs, dtype=np.int64), nxt, leaf_points)


def repulsion_gradient_tree(x: np.ndarray, weights: np.ndarray, tree: SpatialTree,
                            theta: float) -> np.ndarray:
    """Tree-approximated repulsion part of the energy gradient.

    All points walk the threaded tree in lock-step.  A cell is far from
    ``x_n`` when ``diameter / distance < theta`` and the cell does not
    contain ``x_n``; far cells act as one charge at their weighted mean.
    """
    x = np.asarray(x, dtype=float)
    w = np.asarray(weights, dtype=float)
    k, d = x.shape
    acc = np.zeros_like(x)
    cur = np.zeros(k, dtype=np.int64)
    idx = np.arange(k)
    while len(idx):
        t = cur[idx]
        xn = x[idx]
        diff = tree.center[t] - xn
        dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        inside = np.all((xn >= tree.lo[t]) & (xn <= tree.hi[t]), axis=1)
        far = (~inside) & (tree.diameter[t] < theta * dist)
        if np.any(far):
            fi = idx[far]
            coef = (d - 2) * tree.weight[t[far]] * w[fi] * dist[far] ** (-d)
            acc[fi] += coef[:, None] * diff[far]
        leaf = (~far) & (tree.child[t] < 0)
        if np.any(leaf):
            li = idx[leaf]
            pts = tree.leaf_points[t[leaf]]                   # (L, width)
            valid = (pts >= 0) & (pts != li[:, None])
            safe = np.where(pts >= 0, pts, 0)
            pd = x[safe] - x[li][:, None, :]
            r2 = np.einsum("ijk,ijk->ij", pd, pd)
            r2 = np.where(valid, r2, 1.0)
            if np.any(r2 == 0):
                raise CoincidentPointsError("two vertices occupy the same position")
            coef = np.where(valid, (d - 2) * w[safe] * w[li][:, None] * r2 ** (-d / 2), 0.0)
            acc[li] += np.einsum("ij,ijk->ik", coef, pd)
        go_child = (~far) & (tree.child[t] >= 0)
        new = np.where(go_child, tree.child[t], tree.next[t])
        cur[idx] = new
        idx = idx[new >= 0]
    return acc


def gradient_approx(g: Hypergraph, x: np.ndarray, tree: SpatialTree,
                    params: LayoutParams = DEFAULT_PARAMS) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    _, grad = _rubber(g, x)
    return grad + repulsion_gradient_tree(x, g.weights, tree, params.theta)


def _gradient(g: Hypergraph, x: np.ndarray, params: LayoutParams) -> np.ndarray:
    if g.num_vertices < params.exact_below:
        return gradient_exact(g, x, params)
    tree = build_spatial_tree(x, g.weights, params)
    return gradient_approx(g, x, tree, params)


def _require_connected(g: Hypergraph) -> None:
    if g.num_vertices == 0:
        raise ValueError("empty hypergraph")
    labels = connected_components(g)
    if np.any(labels != 0):
        raise DisconnectedError(
            f"hypergraph has {len(np.unique(labels))} connected components; "
            "lay out each component separately")


def _distinct(x: np.ndarray) -> bool:
    return bool(np.all(np.isfinite(x))) and len(np.unique(x, axis=0)) == len(x)


def descend(g: Hypergraph, x0: np.ndarray, params: LayoutParams = DEFAULT_PARAMS,
            iters: int | None = None) -> np.ndarray:
    """Guarded steepest descent on the layout energy.

    The step starts at ``0.1 * bbox_diagonal / max_n |y_n|`` and is multiplied
    by ``step_decay`` every iteration.  A step that raises the energy or
    makes two points coincide is retried at half length.  When the moves
    become negligible relative to the bounding box the step is re-derived
    from the current gradients.
    """
    g = g.drop_empty_edges()
    _require_connected(g)
    x = np.array(x0, dtype=float)
    _check_points(x)
    if g.num_vertices < 2:
        return x
    iters = params.descent_iters if iters is None else iters
    f = energy(g, x, params)
    alpha = None
    for _ in range(iters):
        y = _gradient(g, x, params)
        norms = np.sqrt(np.einsum("ij,ij->i", y, y))
        gmax = float(norms.max())
        if not np.isfinite(gmax) or gmax <= params.grad_tol or gmax == 0.0:
            break
        diag = float(np.linalg.norm(x.max(axis=0) - x.min(axis=0)))
        if alpha is None or alpha * gmax < params.restart_fraction * 0.1 * diag:
            alpha = 0.1 * diag / gmax
        for _ in range(60):
            xn = x - alpha * y
            if _distinct(xn):
                fn = energy(g, xn, params)
                if fn <= f:
                    x, f = xn, fn
                    break
            alpha *= 0.5
        else:
            break
        alpha *= params.step_decay
    return x


def _mean_nn_spacing(x: np.ndarray) -> float:
    if len(x) < 2:
        return 1.0
    dist, _ = cKDTree(x).query(x, k=2)
    s = float(np.mean(dist[:, 1]))
    return s if s > 0 else 1.0


def multilevel_layout(g: Hypergraph, params: LayoutParams = DEFAULT_PARAMS) -> np.ndarray:
    """Coarsen, lay out the coarsest level at random, then refine upward."""
    g = g.drop_empty_edges()
    _require_connected(g)
    rng = np.random.default_rng(params.seed)
    levels = [g]
    maps: list[np.ndarray] = []
    while levels[-1].num_vertices > params.coarsest_size:
        coarse, pi = coarsen(levels[-1])
        if coarse.num_vertices >= levels[-1].num_vertices:
            break
        levels.append(coarse)
        maps.append(pi)
    log.debug("layout hierarchy sizes %s", [h.num_vertices for h in levels])

    x = rng.random((levels[-1].num_vertices, params.dim))
    while not _distinct(x):
        x = rng.random(x.shape)
    for j in range(len(levels) - 1, -1, -1):
        x = descend(levels[j], x, params)
        if j > 0:
            pi = maps[j - 1]
            mag = params.jitter * _mean_nn_spacing(x)
            fine = params.prolong_scale * x[pi]
            fine = fine + rng.uniform(-mag, mag, size=fine.shape)
            while not _distinct(fine):
                _, first = np.unique(fine, axis=0, return_index=True)
                dup = np.setdiff1d(np.arange(len(fine)), first)
                fine[dup] += rng.uniform(-mag, mag, size=(len(dup), fine.shape[1]))
            x = fine
    return x


def finegrain_points(x_bip: np.ndarray, m: SparseMatrix) -> np.ndarray:
    """Place every nonzero (i, j) at the midpoint of row i and column j."""
    x_bip = np.asarray(x_bip, dtype=float)
    return 0.5 * (x_bip[m.rows] + x_bip[m.nrows + m.cols])


def with_params(params: LayoutParams, **changes) -> LayoutParams:
    return replace(params, **changes)
