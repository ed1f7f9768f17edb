"""Hypergraphs built from sparse matrices, duals, components and coarsening."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .matio import SparseMatrix

KINDS = ("symmetric", "bipartite", "colnet", "rownet", "finegrain")
_ALIASES = {"column-net": "colnet", "row-net": "rownet"}


class RepresentationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Hypergraph:
    """Weighted hypergraph on vertices ``0..num_vertices-1``.

    ``edges`` is a list (duplicates allowed); each edge is a sorted tuple of
    distinct vertex indices and may be empty.
    """

    num_vertices: int
    edges: tuple[tuple[int, ...], ...]
    weights: np.ndarray
    costs: np.ndarray

    def __post_init__(self):
        if len(self.weights) != self.num_vertices:
            raise ValueError("one weight per vertex required")
        if len(self.costs) != len(self.edges):
            raise ValueError("one cost per hyperedge required")
        if np.any(self.weights <= 0) or np.any(self.costs <= 0):
            raise ValueError("weights and costs must be strictly positive")
        for e in self.edges:
            if any(v < 0 or v >= self.num_vertices for v in e):
                raise ValueError(f"hyperedge {e} out of range")

    @classmethod
    def build(cls, num_vertices: int, edges: Sequence[Sequence[int]], weights=None,
              costs=None) -> "Hypergraph":
        es = tuple(tuple(sorted(set(int(v) for v in e))) for e in edges)
        w = np.ones(num_vertices) if weights is None else np.asarray(weights, dtype=float)
        c = np.ones(len(es)) if costs is None else np.asarray(costs, dtype=float)
        return cls(int(num_vertices), es, w, c)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def incidence(self) -> list[list[int]]:
        """vertex -> indices of hyperedges containing it."""
        inc: list[list[int]] = [[] for _ in range(self.num_vertices)]
        for j, e in enumerate(self.edges):
            for v in e:
                inc[v].append(j)
        return inc

    def flat_edges(self) -> tuple[np.ndarray, np.ndarray]:
        """(members, edge id) arrays over all (vertex, hyperedge) incidences."""
        return self._flat

    @cached_property
    def has_empty_edges(self) -> bool:
        return any(len(e) == 0 for e in self.edges)

    @cached_property
    def _flat(self) -> tuple[np.ndarray, np.ndarray]:
        sizes = np.fromiter((len(e) for e in self.edges), dtype=np.int64, count=len(self.edges))
        members = np.fromiter((v for e in self.edges for v in e), dtype=np.int64,
                              count=int(sizes.sum()))
        return members, np.repeat(np.arange(len(self.edges)), sizes)

    def drop_empty_edges(self) -> "Hypergraph":
        keep = [j for j, e in enumerate(self.edges) if e]
        if len(keep) == len(self.edges):
            return self
        return Hypergraph(self.num_vertices, tuple(self.edges[j] for j in keep),
                          self.weights, self.costs[keep])

    def subgraph(self, vertices: Sequence[int]) -> "Hypergraph":
        """Induced sub-hypergraph on ``vertices`` (relabelled in the given order).

        Hyperedges are restricted to the kept vertices; those that become
        empty are dropped.
        """
        vs = [int(v) for v in vertices]
        new = {v: i for i, v in enumerate(vs)}
        edges, costs = [], []
        for e, c in zip(self.edges, self.costs):
            sub = [new[v] for v in e if v in new]
            if sub:
                edges.append(tuple(sorted(sub)))
                costs.append(c)
        return Hypergraph(len(vs), tuple(edges), self.weights[vs], np.asarray(costs, dtype=float))

    def structurally_equal(self, other: "Hypergraph") -> bool:
        return (self.num_vertices == other.num_vertices
                and self.edges == other.edges
                and np.array_equal(self.weights, other.weights)
                and np.array_equal(self.costs, other.costs))


def from_matrix(m: SparseMatrix, kind: str, value_costs: bool = False) -> Hypergraph:
    """Hypergraph representation of ``m``.

    Vertex orders: symmetric ``0..n-1``; bipartite rows ``r_0..r_{m-1}`` then
    columns; column-net rows; row-net columns; finegrain one vertex per
    nonzero in row-major order.  Finegrain hyperedges list the row nets first,
    then the column nets, so that it is literally the dual of the bipartite
    graph.  ``value_costs`` sets bipartite edge costs to ``|a_ij|``.
    """
    kind = _ALIASES.get(kind, kind)
    rows, cols = m.rows.tolist(), m.cols.tolist()
    nr, nc = m.nrows, m.ncols
    if kind == "symmetric":
        if not m.is_structurally_symmetric():
            raise RepresentationError("symmetric representation needs a structurally symmetric matrix")
        edges = [(i, j) if i <= j else (j, i) for i, j in zip(rows, cols) if i <= j]
        return Hypergraph.build(nr, edges)
    if kind == "bipartite":
        edges = [(i, nr + j) for i, j in zip(rows, cols)]
        costs = None
        if value_costs:
            costs = np.abs(m.vals)
            pos = costs[costs > 0]
            # explicit zeros keep a small positive cost
            costs = np.where(costs > 0, costs, pos.min() if len(pos) else 1.0)
        return Hypergraph.build(nr + nc, edges, costs=costs)
    if kind == "colnet":
        nets: list[list[int]] = [[] for _ in range(nc)]
        for i, j in zip(rows, cols):
            nets[j].append(i)
        return Hypergraph.build(nr, nets)
    if kind == "rownet":
        nets = [[] for _ in range(nr)]
        for i, j in zip(rows, cols):
            nets[i].append(j)
        return Hypergraph.build(nc, nets)
    if kind == "finegrain":
        row_nets: list[list[int]] = [[] for _ in range(nr)]
        col_nets: list[list[int]] = [[] for _ in range(nc)]
        for k, (i, j) in enumerate(zip(rows, cols)):
            row_nets[i].append(k)
            col_nets[j].append(k)
        return Hypergraph.build(m.nnz, row_nets + col_nets)
    raise RepresentationError(f"unknown representation {kind!r}")


def dual(g: Hypergraph) -> Hypergraph:
    """Swap the roles of vertices and hyperedges (and of weights and costs)."""
    edges = tuple(tuple(inc) for inc in g.incidence())
    return Hypergraph(g.num_edges, edges, g.costs.copy(), g.weights.copy())


def connected_components(g: Hypergraph) -> np.ndarray:
    """Label each vertex with the smallest vertex index of its component.

    Pointer-jumping union-find: the roots of all members of a hyperedge are
    attached to the smallest of them, so every root is its tree's minimum.
    """
    p = list(range(g.num_vertices))
    for e in g.edges:
        if not e:
            continue
        for v in e:
            while p[v] != p[p[v]]:
                p[v] = p[p[v]]
        root = min(p[v] for v in e)
        for v in e:
            p[p[v]] = root
    for v in range(g.num_vertices):
        while p[v] != p[p[v]]:
            p[v] = p[p[v]]
    return np.array(p, dtype=np.int64)


def component_lists(labels: np.ndarray) -> list[np.ndarray]:
    """Vertex index arrays per component, ordered by their smallest vertex."""
    out = []
    for lab in np.unique(labels):
        out.append(np.flatnonzero(labels == lab))
    return out


def coarsen(g: Hypergraph) -> tuple[Hypergraph, np.ndarray]:
    """One level of coarsening; returns the coarse hypergraph and ``pi``.

    Vertices with exactly one neighbour are merged into that neighbour first
    (several leaves may join the same hub).  The remaining vertices are
    paired greedily over hyperedges in order of decreasing cost (stable), each
    hyperedge pairing its two lowest-indexed unmatched members.  Coarse
    vertices are numbered by their smallest fine vertex.
    """
    k = g.num_vertices
    nbrs: list[set[int]] = [set() for _ in range(k)]
    for e in g.edges:
        if len(e) > 1:
            for v in e:
                nbrs[v].update(e)
    for v in range(k):
        nbrs[v].discard(v)

    group = np.full(k, -1, dtype=np.int64)
    ngroups = 0
    for v in range(k):
        if len(nbrs[v]) != 1 or group[v] >= 0:
            continue
        (u,) = nbrs[v]
        if len(nbrs[u]) == 1:
            # isolated pair: both ends are leaves
            if group[u] < 0:
                group[u] = group[v] = ngroups
                ngroups += 1
            continue
        if group[u] < 0:
            group[u] = ngroups
            ngroups += 1
        group[v] = group[u]

    for j in np.argsort(-g.costs, kind="stable"):
        free = [v for v in g.edges[j] if group[v] < 0]
        if len(free) >= 2:
            group[free[0]] = group[free[1]] = ngroups
            ngroups += 1
    for v in range(k):
        if group[v] < 0:
            group[v] = ngroups
            ngroups += 1

    # renumber coarse vertices by smallest member
    first = np.full(ngroups, k, dtype=np.int64)
    np.minimum.at(first, group, np.arange(k))
    rank = np.empty(ngroups, dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(ngroups)
    pi = rank[group]

    weights = np.zeros(ngroups)
    np.add.at(weights, pi, g.weights)
    index: dict[tuple[int, ...], int] = {}
    edges: list[tuple[int, ...]] = []
    costs: list[float] = []
    for e, c in zip(g.edges, g.costs):
        ce = tuple(sorted({int(pi[v]) for v in e}))
        if len(ce) < 2:
            continue
        if ce in index:
            costs[index[ce]] += c
        else:
            index[ce] = len(edges)
            edges.append(ce)
            costs.append(float(c))
    return Hypergraph(ngroups, tuple(edges), weights, np.asarray(costs, dtype=float)), pi
