"""Geometric nested-dissection orderings of square sparse matrices.

The bipartite graph of the matrix (rows ``0..n-1``, columns ``n..2n-1``) is
laid out in R^d; every scope is cut in two by 2-means, the cut edges are
turned into a vertex separator next to the separating plane, and the two
halves are ordered recursively.  In BBD form each separator follows the two
halves of its scope; in SBD form it sits between them.
"""

from __future__ import annotations

import copy
import io
import logging
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np

from .hypergraph import Hypergraph, component_lists, connected_components, from_matrix
from .layout import LayoutParams, multilevel_layout
from .matio import SparseMatrix
from .partition import kmeans_pp

log = logging.getLogger(__name__)

FORMS = ("bbd", "sbd")
CUT_STRATEGIES = ("none", "schur", "twobit")


class StructuralSingularityError(ValueError):
    """No perfect row/column matching exists."""

    def __init__(self, deficiency: int, unmatched_rows, unmatched_cols):
        self.deficiency = deficiency
        self.unmatched_rows = list(unmatched_rows)
        self.unmatched_cols = list(unmatched_cols)
        super().__init__(f"matrix is structurally singular (deficiency {deficiency})")


class DegenerateSplitError(ValueError):
    pass


# -- matchings ---------------------------------------------------------------

@dataclass(frozen=True)
class MatchResult:
    row_to_col: np.ndarray  # -1 where unmatched
    col_to_row: np.ndarray

    @property
    def size(self) -> int:
        return int(np.sum(self.row_to_col >= 0))

    @property
    def perfect(self) -> bool:
        return self.size == len(self.row_to_col) == len(self.col_to_row)

    @property
    def unmatched_rows(self) -> np.ndarray:
        return np.flatnonzero(self.row_to_col < 0)

    @property
    def unmatched_cols(self) -> np.ndarray:
        return np.flatnonzero(self.col_to_row < 0)


def hopcroft_karp(adj: Sequence[Sequence[int]], ncols: int,
                  initial: Sequence[int] | None = None) -> MatchResult:
    """Maximum matching of a bipartite graph given as row -> columns lists.

    ``initial`` (row -> column or -1) seeds the matching; it is augmented
    along shortest vertex-disjoint paths phase by phase.
    """
    nrows = len(adj)
    if nrows != ncols:
        raise ValueError(f"bipartite graph is not square ({nrows} rows, {ncols} columns)")
    INF = nrows + 1
    r2c = np.full(nrows, -1, dtype=np.int64)
    c2r = np.full(ncols, -1, dtype=np.int64)
    if initial is not None:
        for r, c in enumerate(initial):
            if c >= 0:
                if c2r[c] >= 0:
                    raise ValueError("initial matching is not injective")
                r2c[r], c2r[c] = c, r
    adj = [list(a) for a in adj]
    dist = [0] * nrows

    def bfs() -> bool:
        q = deque()
        for r in range(nrows):
            if r2c[r] < 0:
                dist[r] = 0
                q.append(r)
            else:
                dist[r] = INF
        found = False
        while q:
            r = q.popleft()
            for c in adj[r]:
                r2 = c2r[c]
                if r2 < 0:
                    found = True
                elif dist[r2] == INF:
                    dist[r2] = dist[r] + 1
                    q.append(r2)
        return found

    def dfs(root: int) -> bool:
        # iterative DFS along the BFS layers; `via` holds the columns between stacked rows
        stack = [root]
        ptr = {root: 0}
        via: list[int] = []
        while stack:
            r = stack[-1]
            k = ptr[r]
            if k >= len(adj[r]):
                dist[r] = INF
                stack.pop()
                if via:
                    via.pop()
                continue
            ptr[r] = k + 1
            c = adj[r][k]
            r2 = c2r[c]
            if r2 < 0:
                via.append(c)
                for pr, pc in zip(stack, via):
                    r2c[pr], c2r[pc] = pc, pr
                return True
            if dist[r2] == dist[r] + 1 and r2 not in ptr:
                via.append(c)
                stack.append(r2)
                ptr[r2] = 0
        return False

    while bfs():
        for r in range(nrows):
            if r2c[r] < 0:
                dfs(r)
    return MatchResult(r2c, c2r)


def _row_adjacency(m: SparseMatrix) -> list[list[int]]:
    adj: list[list[int]] = [[] for _ in range(m.nrows)]
    for i, j in zip(m.rows.tolist(), m.cols.tolist()):
        adj[i].append(j)
    return adj


@dataclass(frozen=True)
class Matching:
    """Perfect row/column matching; ``mu`` acts on bipartite vertex ids."""

    row_to_col: np.ndarray

    @property
    def n(self) -> int:
        return len(self.row_to_col)

    @property
    def col_to_row(self) -> np.ndarray:
        inv = np.empty(self.n, dtype=np.int64)
        inv[self.row_to_col] = np.arange(self.n)
        return inv

    @property
    def mu(self) -> np.ndarray:
        n = self.n
        out = np.empty(2 * n, dtype=np.int64)
        out[:n] = n + self.row_to_col
        out[n:] = self.col_to_row
        return out


def strengthen_diagonal(m: SparseMatrix) -> Matching:
    """Greedy heavy matching by decreasing ``|a_ij|``, completed by Hopcroft-Karp."""
    if m.nrows != m.ncols:
        raise ValueError("matrix must be square")
    n = m.nrows
    order = np.lexsort((m.cols, m.rows, -np.abs(m.vals)))
    init = np.full(n, -1, dtype=np.int64)
    col_used = np.zeros(n, dtype=bool)
    for k in order:
        i, j = int(m.rows[k]), int(m.cols[k])
        if init[i] < 0 and not col_used[j]:
            init[i] = j
            col_used[j] = True
    res = hopcroft_karp(_row_adjacency(m), n, initial=init)
    if not res.perfect:
        raise StructuralSingularityError(n - res.size, res.unmatched_rows, res.unmatched_cols)
    return Matching(res.row_to_col)


# -- one separator split -----------------------------------------------------

@dataclass(frozen=True)
class SeparatorPlane:
    normal: np.ndarray
    offset: float

    def distance(self, x: np.ndarray) -> np.ndarray:
        return np.abs(x @ self.normal - self.offset)


@dataclass(frozen=True)
class Split:
    """Part labels 1, 2, 3 for the vertices and edges of one scope."""

    part: np.ndarray
    edge_part: np.ndarray
    plane: SeparatorPlane
    centers: np.ndarray

    def vertices(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.part == i)

    def edges(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.edge_part == i)


def _edge_array(graph) -> np.ndarray:
    if isinstance(graph, Hypergraph):
        if any(len(e) != 2 for e in graph.edges):
            raise ValueError("split_once expects a graph (hyperedges of size 2)")
        return np.array(graph.edges, dtype=np.int64).reshape(-1, 2)
    return np.asarray(graph, dtype=np.int64).reshape(-1, 2)


def split_once(graph, x: np.ndarray, mu: np.ndarray | None = None,
               seed: int | np.random.Generator | None = 0, kmeans_iters: int = 20) -> Split:
    """Split a graph into two halves and a vertex separator.

    ``graph`` is a Hypergraph with 2-vertex edges or an (E, 2) array of local
    vertex ids.  Cut edges are visited in edge order; the endpoint closer to
    the separating plane (the first one on ties) moves to the separator
    together with its matched partner.
    """
    edges = _edge_array(graph)
    x = np.asarray(x, dtype=float)
    if len(np.unique(x, axis=0)) < 2:
        raise DegenerateSplitError("need at least two distinct points to split")
    cl = kmeans_pp(x, 2, iters=kmeans_iters, seed=seed)
    z1, z2 = cl.centers
    d1 = np.sum((x - z1) ** 2, axis=1)
    d2 = np.sum((x - z2) ** 2, axis=1)
    part = np.where(d1 <= d2, 1, 2).astype(np.int8)
    r = z2 - z1
    plane = SeparatorPlane(r, float(0.5 * (z2 + z1) @ r))
    dist = plane.distance(x)
    v_all, w_all = edges[:, 0], edges[:, 1]
    cand = np.flatnonzero(part[v_all] != part[w_all])
    for e in cand:
        v, w = int(v_all[e]), int(w_all[e])
        pv, pw = part[v], part[w]
        if pv == 3 or pw == 3 or pv == pw:
            continue
        moved = v if dist[v] <= dist[w] else w
        part[moved] = 3
        if mu is not None:
            part[mu[moved]] = 3
    if len(edges):
        edge_part = np.maximum(part[v_all], part[w_all])
    else:
        edge_part = np.zeros(0, dtype=np.int8)
    return Split(part, edge_part, plane, cl.centers)


def check_split(edges: np.ndarray, split: Split, mu: np.ndarray | None = None) -> None:
    """Raise AssertionError unless ``split`` satisfies every separator invariant."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    p, q = split.part, split.edge_part
    assert set(np.unique(p).tolist()) <= {1, 2, 3}
    pv, pw = p[edges[:, 0]], p[edges[:, 1]]
    assert not np.any(((pv == 1) & (pw == 2)) | ((pv == 2) & (pw == 1))), "edge joins V1 and V2"
    assert np.all(~(q == 1) | ((pv == 1) & (pw == 1))), "E1 edge leaves V1"
    assert np.all(~(q == 2) | ((pv == 2) & (pw == 2))), "E2 edge leaves V2"
    assert np.all(~(q == 3) | (pv == 3) | (pw == 3)), "E3 edge misses V3"
    assert len(q) == len(edges) and np.all((q >= 1) & (q <= 3))
    if mu is not None:
        assert np.array_equal(p, p[mu]), "matched pair split across parts"


# -- recursive ordering ------------------------------------------------------

@dataclass(frozen=True)
class OrderOptions:
    form: str = "bbd"
    cut: str = "schur"
    min_block: int = 32
    max_depth: int = 64
    matching: bool = True
    seed: int = 0
    twobit_levels: int = 1
    repr: str = "bipartite"
    kmeans_iters: int = 20
    layout: LayoutParams = field(default_factory=LayoutParams)

    def __post_init__(self):
        if self.form not in FORMS:
            raise ValueError(f"form must be one of {FORMS}")
        if self.cut not in CUT_STRATEGIES:
            raise ValueError(f"cut strategy must be one of {CUT_STRATEGIES}")
        if self.min_block < 1:
            raise ValueError("min_block must be positive")


@dataclass
class OrderNode:
    """One scope of the recursion.

    ``kind`` is ``leaf`` (rows/cols in final order), ``split`` (children are
    the V1 scope, the V2 scope and the separator scope) or ``concat``
    (independent components side by side).
    """

    level: int
    kind: str
    rows: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    cols: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    children: list["OrderNode"] = field(default_factory=list)
    # split only: bipartite vertex id -> part (1, 2, 3) for this scope
    part_of: dict[int, int] | None = None
    row_range: tuple[int, int] = (0, 0)
    col_range: tuple[int, int] = (0, 0)

    @property
    def sep(self) -> "OrderNode":
        return self.children[2]

    def all_rows(self) -> np.ndarray:
        if self.kind == "leaf":
            return self.rows
        return np.concatenate([c.all_rows() for c in self.children] or [np.zeros(0, np.int64)])

    def all_cols(self) -> np.ndarray:
        if self.kind == "leaf":
            return self.cols
        return np.concatenate([c.all_cols() for c in self.children] or [np.zeros(0, np.int64)])

    def sep_size(self) -> tuple[int, int]:
        if self.kind != "split":
            return (0, 0)
        return (len(self.sep.all_rows()), len(self.sep.all_cols()))

    def walk(self) -> Iterator["OrderNode"]:
        yield self
        for c in self.children:
            yield from c.walk()


@dataclass(frozen=True)
class BlockNode:
    """One line of the block-tree report."""

    level: int
    rows: tuple[int, int]
    cols: tuple[int, int]
    sep_rows: int
    sep_cols: int
    children: tuple["BlockNode", ...] = ()


@dataclass
class OrderingTree:
    root: OrderNode
    row_perm: np.ndarray
    col_perm: np.ndarray
    form: str
    nrows: int
    ncols: int
    options: OrderOptions | None = None
    matching: Matching | None = None

    def splits(self) -> list[OrderNode]:
        return [nd for nd in self.root.walk() if nd.kind == "split"]

    def block_root(self) -> BlockNode:
        return _to_block(self.root)

    def report(self) -> str:
        return format_block_tree(self.block_root(), self.form, self.nrows, self.ncols)

    def permuted(self, m: SparseMatrix) -> SparseMatrix:
        return m.permute(self.row_perm, self.col_perm)


def _to_block(nd: OrderNode) -> BlockNode:
    if nd.kind == "leaf":
        kids: tuple[BlockNode, ...] = ()
    elif nd.kind == "split":
        kids = (_to_block(nd.children[0]), _to_block(nd.children[1]))
        if nd.sep.kind != "leaf":
            kids += (_to_block(nd.sep),)
    else:
        kids = tuple(_to_block(c) for c in nd.children)
    sr, sc = nd.sep_size()
    return BlockNode(nd.level, nd.row_range, nd.col_range, sr, sc, kids)


def _assign_ranges(nd: OrderNode, form: str, r0: int, c0: int,
                   rows_out: list, cols_out: list) -> tuple[int, int]:
    if nd.kind == "leaf":
        rows_out.extend(nd.rows.tolist())
        cols_out.extend(nd.cols.tolist())
        r1, c1 = r0 + len(nd.rows), c0 + len(nd.cols)
    else:
        if nd.kind == "split" and form == "sbd":
            seq = [nd.children[0], nd.children[2], nd.children[1]]
        else:
            seq = nd.children
        r1, c1 = r0, c0
        for c in seq:
            r1, c1 = _assign_ranges(c, form, r1, c1, rows_out, cols_out)
    nd.row_range, nd.col_range = (r0, r1), (c0, c1)
    return r1, c1


def _finalize(root: OrderNode, form: str, nrows: int, ncols: int, options, matching) -> OrderingTree:
    rows: list[int] = []
    cols: list[int] = []
    _assign_ranges(root, form, 0, 0, rows, cols)
    rp = np.array(rows, dtype=np.int64)
    cp = np.array(cols, dtype=np.int64)
    assert sorted(rows) == list(range(nrows)) and sorted(cols) == list(range(ncols))
    return OrderingTree(root, rp, cp, form, nrows, ncols, options, matching)


def bipartite_edges(m: SparseMatrix) -> np.ndarray:
    return np.stack([m.rows, m.nrows + m.cols], axis=1).astype(np.int64)


def compute_layout(m: SparseMatrix, kind: str = "bipartite",
                   params: LayoutParams | None = None, min_rows: int = 0) -> np.ndarray:
    """Points for all ``nrows + ncols`` bipartite vertices.

    Each connected component of the chosen representation is laid out on
    its own.  ``symmetric`` places row i and column i at the same point;
    ``colnet``/``rownet`` place the other side at its hyperedge center;
    ``finegrain`` is obtained from the bipartite layout, so it coincides
    with ``bipartite`` here.  Components with at most ``min_rows`` rows are
    never split, so they keep zero coordinates.
    """
    params = params or LayoutParams()
    n, nc = m.nrows, m.ncols
    x = np.zeros((n + nc, params.dim))
    kind = {"column-net": "colnet", "row-net": "rownet"}.get(kind, kind)
    if kind == "finegrain":
        kind = "bipartite"
    g = from_matrix(m, kind)
    comps = component_lists(connected_components(g))
    seeds = np.random.SeedSequence(params.seed).spawn(len(comps))
    pts = np.zeros((g.num_vertices, params.dim))
    for comp, ss in zip(comps, seeds):
        if len(comp) < 2:
            continue
        if kind == "bipartite":
            nrows_in = int(np.sum(comp < n))
        else:
            nrows_in = len(comp)
        if nrows_in <= min_rows:
            continue
        sub = g.subgraph(comp)
        seed = int(ss.generate_state(1)[0])
        pts[comp] = multilevel_layout(sub, replace(params, seed=seed))
    if kind == "bipartite":
        return pts
    if kind == "symmetric":
        x[:n] = pts
        x[n:] = pts
    elif kind == "colnet":
        x[:n] = pts
        for j, e in enumerate(g.edges):
            if e:
                x[n + j] = pts[list(e)].mean(axis=0)
    elif kind == "rownet":
        x[n:] = pts
        for i, e in enumerate(g.edges):
            if e:
                x[i] = pts[list(e)].mean(axis=0)
    return x


class _Recursion:
    def __init__(self, m: SparseMatrix, x: np.ndarray, mu: np.ndarray | None,
                 opts: OrderOptions):
        self.m = m
        self.n = m.nrows
        self.x = x
        self.mu = mu
        self.opts = opts
        self.rng = np.random.default_rng(opts.seed)
        deg = np.zeros(m.nrows + m.ncols, dtype=np.int64)
        np.add.at(deg, m.rows, 1)
        np.add.at(deg, m.nrows + m.cols, 1)
        self.empty = deg == 0

    def leaf(self, verts: np.ndarray, level: int) -> OrderNode:
        n = self.n
        rows = np.sort(verts[verts < n])
        if self.mu is not None:
            cols = self.mu[rows] - n
        else:
            cols = np.sort(verts[verts >= n] - n)
            # structurally empty rows and columns go last in their scope
            cols = cols[np.argsort(self.empty[n + cols], kind="stable")]
        rows = rows[np.argsort(self.empty[rows], kind="stable")]
        return OrderNode(level, "leaf", rows.astype(np.int64), cols.astype(np.int64))

    def order(self, verts: np.ndarray, edges: np.ndarray, level: int) -> OrderNode:
        n = self.n
        nrows = int(np.sum(verts < n))
        if nrows <= self.opts.min_block or level >= self.opts.max_depth or len(edges) == 0:
            return self.leaf(verts, level)
        local = np.full(len(self.x), -1, dtype=np.int64)
        local[verts] = np.arange(len(verts))
        ledges = local[edges]
        lmu = None if self.mu is None else local[self.mu[verts]]
        try:
            split = split_once(ledges, self.x[verts], lmu, self.rng, self.opts.kmeans_iters)
        except DegenerateSplitError:
            return self.leaf(verts, level)
        check_split(ledges, split, lmu)
        p = split.part
        v1, v2, v3 = verts[p == 1], verts[p == 2], verts[p == 3]
        if len(v3) == len(verts) or (len(v1) == 0 and len(v2) == 0) or \
                len(v1) == len(verts) or len(v2) == len(verts):
            return self.leaf(verts, level)
        q = split.edge_part
        e1, e2 = edges[q == 1], edges[q == 2]
        c1 = self.order(v1, e1, level + 1)
        c2 = self.order(v2, e2, level + 1)
        if self.opts.cut == "schur":
            inner = (p[ledges[:, 0]] == 3) & (p[ledges[:, 1]] == 3)
            e3 = edges[inner]
            sep = self.order(v3, e3, level + 1)
        else:
            sep = self.leaf(v3, level + 1)
        part_of = dict(zip(verts.tolist(), p.tolist()))
        return OrderNode(level, "split", children=[c1, c2, sep], part_of=part_of)


def recursive_order(m: SparseMatrix, options: OrderOptions | None = None,
                    layout: np.ndarray | None = None) -> OrderingTree:
    """Recursive BBD/SBD row and column permutations for a square matrix.

    ``layout`` (one point per bipartite vertex) bypasses the energy
    layout.  With ``options.matching`` the rows and columns are linked
    through a strengthened diagonal, which stays on the diagonal.
    """
    opts = options or OrderOptions()
    if m.nrows != m.ncols:
        raise ValueError("matrix must be square")
    n = m.nrows
    matching = strengthen_diagonal(m) if opts.matching else None
    mu = matching.mu if matching is not None else None
    if layout is None:
        layout = compute_layout(m, opts.repr, replace(opts.layout, seed=opts.seed),
                                min_rows=opts.min_block)
    x = np.asarray(layout, dtype=float)
    if x.shape[0] != 2 * n:
        raise ValueError(f"layout must have {2 * n} points, got {x.shape[0]}")
    rec = _Recursion(m, x, mu, opts)
    edges = bipartite_edges(m)
    g = Hypergraph.build(2 * n, edges.tolist())
    labels = connected_components(g)
    comps = component_lists(labels)
    big = [c for c in comps if len(c) > 1]
    isolated = np.concatenate([c for c in comps if len(c) == 1] or [np.zeros(0, np.int64)])
    if len(big) == 1 and len(isolated) == 0:
        root = rec.order(big[0], edges, 0)
    else:
        children = []
        for c in big:
            inside = np.isin(edges[:, 0], c)
            children.append(rec.order(c, edges[inside], 1))
        if len(isolated):
            children.append(rec.leaf(isolated, 1))
        root = OrderNode(0, "concat", children=children)
    tree = _finalize(root, opts.form, n, n, opts, matching)
    if opts.cut == "twobit":
        tree = refine_cut_twobit(tree, opts.twobit_levels, m)
    return tree


def _descent_paths(nd: OrderNode, depth: int) -> dict[int, list[int]]:
    """Part labels of every vertex under ``nd`` along its first ``depth`` splits."""
    out: dict[int, list[int]] = {}
    if depth <= 0 or nd.kind != "split":
        return out
    for v, p in nd.part_of.items():
        out[v] = [p]
    for i in (0, 1):
        for v, path in _descent_paths(nd.children[i], depth - 1).items():
            out[v].extend(path)
    return out


_BIT = {1: 1, 2: 2}


def refine_cut_twobit(tree: OrderingTree, b: int, m: SparseMatrix) -> OrderingTree:
    """Sort every separator by two-bit keys recording which sub-blocks it touches.

    For a separator vertex w and level l (1..b), bit 1 of the l-th pair is
    set when w has a neighbour that fell into the first part of a split l
    levels below the separator's scope, and bit 2 for the second part.
    Separator rows/columns are then stably sorted on the tuple of pairs.
    """
    if b <= 0 or tree.options is None or tree.options.cut != "twobit":
        return tree
    n = tree.nrows
    nbrs: dict[int, list[int]] = {}
    for i, j in zip(m.rows.tolist(), m.cols.tolist()):
        nbrs.setdefault(i, []).append(n + j)
        nbrs.setdefault(n + j, []).append(i)
    paired = tree.matching is not None

    def key(w: int, paths: dict[int, list[int]]) -> list[int]:
        k = [0] * b
        for v in nbrs.get(w, ()):
            path = paths.get(v)
            if not path:
                continue
            for lvl, p in enumerate(path[1:b + 1]):
                k[lvl] |= _BIT.get(p, 0)
        return k

    root = copy.deepcopy(tree.root)
    for nd in root.walk():
        if nd.kind != "split" or nd.sep.kind != "leaf":
            continue
        # path[0] is the part at this split; the next b entries are the sub-splits
        paths = _descent_paths(nd, b + 1)
        sep = nd.sep
        rk = [key(int(r), paths) for r in sep.rows]
        ck = [key(n + int(c), paths) for c in sep.cols]
        if paired:
            comb = [tuple(a | c for a, c in zip(x, y)) for x, y in zip(rk, ck)]
            order = sorted(range(len(comb)), key=lambda i: comb[i])
            sep.rows, sep.cols = sep.rows[order], sep.cols[order]
        else:
            sep.rows = sep.rows[sorted(range(len(rk)), key=lambda i: tuple(rk[i]))]
            sep.cols = sep.cols[sorted(range(len(ck)), key=lambda i: tuple(ck[i]))]
    return _finalize(root, tree.form, tree.nrows, tree.ncols, tree.options, tree.matching)


def separator_keys(tree: OrderingTree, m: SparseMatrix, node: OrderNode, b: int = 1):
    """Two-bit keys of ``node``'s separator rows and columns (for inspection)."""
    n = tree.nrows
    paths = _descent_paths(node, b + 1)
    nbr_rows: dict[int, list[int]] = {}
    for i, j in zip(m.rows.tolist(), m.cols.tolist()):
        nbr_rows.setdefault(i, []).append(n + j)
        nbr_rows.setdefault(n + j, []).append(i)
    out = {}
    for w in list(node.sep.rows) + [n + c for c in node.sep.cols]:
        k = [0] * b
        for v in nbr_rows.get(int(w), ()):
            path = paths.get(v)
            if path:
                for lvl, p in enumerate(path[1:b + 1]):
                    k[lvl] |= _BIT.get(p, 0)
        out[int(w)] = tuple(k)
    return out


# -- block-tree report -------------------------------------------------------

def format_block_tree(root: BlockNode, form: str, nrows: int, ncols: int) -> str:
    """Indented text, one node per line: ``level r0:r1 c0:c1 sep_rows sep_cols``."""
    out = io.StringIO()
    out.write("# visorder block tree\n")
    out.write(f"# form {form}\n")
    out.write(f"# size {nrows} {ncols}\n")

    def emit(nd: BlockNode, depth: int):
        out.write(f"{'  ' * depth}{nd.level} {nd.rows[0]}:{nd.rows[1]} "
                  f"{nd.cols[0]}:{nd.cols[1]} {nd.sep_rows} {nd.sep_cols}\n")
        for c in nd.children:
            emit(c, depth + 1)

    emit(root, 0)
    return out.getvalue()


def parse_block_tree(text: str | bytes) -> tuple[BlockNode, str, int, int]:
    """Inverse of :func:`format_block_tree`; returns (root, form, nrows, ncols)."""
    from .matio import ParseError

    if isinstance(text, bytes):
        text = text.decode()
    form, size = None, None
    stack: list[tuple[int, dict]] = []
    root = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            tok = line[1:].split()
            if tok[:1] == ["form"] and len(tok) == 2:
                form = tok[1]
            elif tok[:1] == ["size"] and len(tok) == 3:
                size = (int(tok[1]), int(tok[2]))
            continue
        indent = len(line) - len(line.lstrip(" "))
        if indent % 2:
            raise ParseError("odd indentation", lineno)
        depth = indent // 2
        tok = line.split()
        try:
            level = int(tok[0])
            r0, r1 = (int(t) for t in tok[1].split(":"))
            c0, c1 = (int(t) for t in tok[2].split(":"))
            sr, sc = int(tok[3]), int(tok[4])
            if len(tok) != 5:
                raise ValueError
        except (ValueError, IndexError):
            raise ParseError(f"bad block line {line.strip()!r}", lineno) from None
        rec = {"level": level, "rows": (r0, r1), "cols": (c0, c1), "sep_rows": sr,
               "sep_cols": sc, "children": []}
        while stack and stack[-1][0] >= depth:
            stack.pop()
        if not stack:
            if root is not None or depth != 0:
                raise ParseError("more than one root node", lineno)
            root = rec
        else:
            if stack[-1][0] != depth - 1:
                raise ParseError("indentation skips a level", lineno)
            stack[-1][1]["children"].append(rec)
        stack.append((depth, rec))
    if root is None or form not in FORMS or size is None:
        raise ParseError("block tree needs a root node and '# form' / '# size' headers")

    def build(r: dict) -> BlockNode:
        return BlockNode(r["level"], r["rows"], r["cols"], r["sep_rows"], r["sep_cols"],
                         tuple(build(c) for c in r["children"]))

    return build(root), form, size[0], size[1]


def pivot_scopes(root: BlockNode, form: str) -> list[tuple[int, int, int, int]]:
    """Diagonal blocks within which pivoting is allowed, in position order.

    These are the leaf blocks and, for every split, its whole separator
    (the Schur complement), regardless of any ordering inside it.
    """
    out: list[tuple[int, int, int, int]] = []

    def visit(nd: BlockNode):
        if not nd.children:
            out.append((*nd.rows, *nd.cols))
            return
        has_sep = nd.sep_rows > 0 or nd.sep_cols > 0
        main = nd.children[:2] if has_sep else nd.children
        if has_sep:
            if form == "bbd":
                sep = (nd.rows[1] - nd.sep_rows, nd.rows[1], nd.cols[1] - nd.sep_cols, nd.cols[1])
            else:
                a = main[0]
                sep = (a.rows[1], a.rows[1] + nd.sep_rows, a.cols[1], a.cols[1] + nd.sep_cols)
        for c in main:
            visit(c)
        if has_sep:
            out.append(sep)

    visit(root)
    out = [s for s in out if s[1] > s[0] or s[3] > s[2]]
    out.sort()
    return out


def split_records(root: BlockNode) -> list[BlockNode]:
    """Every node with a separator or two halves (a split), depth first."""
    out = []

    def visit(nd: BlockNode):
        if nd.children and (nd.sep_rows or nd.sep_cols or len(nd.children) >= 2):
            out.append(nd)
        for c in nd.children:
            visit(c)

    visit(root)
    return out
