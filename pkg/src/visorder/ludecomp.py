"""Dense-canvas LU engines and ordering-quality metrics.

The factorizations work on a dense copy of the matrix next to a boolean
structure mask.  An entry becomes structurally nonzero as soon as an update
touches it, even if the value cancels to zero, so fill is counted the way it
would be read off sparse factor patterns.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .matio import SparseMatrix
from .ordering import BlockNode, OrderingTree, pivot_scopes, split_records

DEFAULT_THRESHOLD = 1e-6


class SingularBlockError(ArithmeticError):
    """No acceptable pivot inside a diagonal block."""

    def __init__(self, scope: tuple[int, int, int, int], step: int):
        self.scope = scope
        self.step = step
        super().__init__(f"diagonal block rows {scope[0]}:{scope[1]} is singular "
                         f"(no pivot at step {step})")


class SolveError(ArithmeticError):
    pass


@dataclass(frozen=True)
class PivotEvent:
    kind: str  # "row_swap", "col_swap" or "zero_pivot"
    step: int
    row: int
    col: int
    value: float


@dataclass
class Factors:
    """``A[row_perm][:, col_perm] == L @ U`` with structure masks for both factors."""

    row_perm: np.ndarray
    col_perm: np.ndarray
    L: np.ndarray
    U: np.ndarray
    L_mask: np.ndarray
    U_mask: np.ndarray
    log: list[PivotEvent] = field(default_factory=list)
    steps: int = 0

    @property
    def n(self) -> int:
        return len(self.row_perm)

    def pivot_counts(self) -> dict[str, int]:
        out = {"row_swap": 0, "col_swap": 0, "zero_pivot": 0}
        for ev in self.log:
            out[ev.kind] += 1
        return out

    def residual(self, a) -> float:
        """max |P A Q - L U|."""
        dense = _dense(a)
        return float(np.abs(dense[np.ix_(self.row_perm, self.col_perm)] - self.L @ self.U).max(initial=0.0))


def _dense(a) -> np.ndarray:
    if isinstance(a, SparseMatrix):
        return a.toarray()
    return np.array(a, dtype=float)


def _structure(a) -> np.ndarray:
    if isinstance(a, SparseMatrix):
        return a.pattern()
    return np.asarray(a) != 0


class _Canvas:
    def __init__(self, a):
        self.a = _dense(a)
        self.s = _structure(a)
        n, m = self.a.shape
        if n != m:
            raise ValueError("LU needs a square matrix")
        self.n = n
        self.rp = np.arange(n)
        self.cp = np.arange(n)
        self.log: list[PivotEvent] = []

    def swap_rows(self, i: int, j: int):
        if i != j:
            self.a[[i, j]] = self.a[[j, i]]
            self.s[[i, j]] = self.s[[j, i]]
            self.rp[[i, j]] = self.rp[[j, i]]

    def swap_cols(self, i: int, j: int):
        if i != j:
            self.a[:, [i, j]] = self.a[:, [j, i]]
            self.s[:, [i, j]] = self.s[:, [j, i]]
            self.cp[[i, j]] = self.cp[[j, i]]

    def eliminate(self, k: int):
        a, s = self.a, self.s
        piv = a[k, k]
        rows = k + 1 + np.flatnonzero(s[k + 1:, k])
        cols = k + 1 + np.flatnonzero(s[k, k + 1:])
        if len(rows) == 0:
            return
        a[rows, k] /= piv
        if len(cols):
            a[np.ix_(rows, cols)] -= np.outer(a[rows, k], a[k, cols])
            s[np.ix_(rows, cols)] = True

    def factors(self, steps: int) -> Factors:
        n, a, s = self.n, self.a, self.s
        lower = np.tril(np.ones((n, n), dtype=bool), -1)
        lower[:, steps:] = False
        L = np.where(lower, a, 0.0)
        np.fill_diagonal(L, 1.0)
        Lm = lower & s
        np.fill_diagonal(Lm, True)
        Um = s & ~lower
        U = np.where(~lower, a, 0.0)
        return Factors(self.rp.copy(), self.cp.copy(), L, U, Lm, Um, list(self.log), steps)


def lu_complete_pivot(a, mode: str = "complete", bound: int | None = None) -> Factors:
    """LU with complete pivoting (``mode="complete"``) or none at all.

    A zero pivot skips that elimination step and is logged.  With ``bound``
    only the first ``bound`` columns are eliminated (pivots searched in the
    leading ``bound x bound`` block); the trailing block of ``U`` then holds
    the remaining Schur complement.
    """
    if mode not in ("complete", "none"):
        raise ValueError("mode must be 'complete' or 'none'")
    cv = _Canvas(a)
    n = cv.n
    stop = n if bound is None else int(bound)
    if not 0 <= stop <= n:
        raise ValueError("bound out of range")
    for k in range(stop):
        if mode == "complete":
            blk = np.abs(cv.a[k:stop, k:stop])
            i, j = np.unravel_index(int(np.argmax(blk)), blk.shape)
            if i:
                cv.log.append(PivotEvent("row_swap", k, int(cv.rp[k + i]), int(cv.cp[k]), float(cv.a[k + i, k + j])))
            if j:
                cv.log.append(PivotEvent("col_swap", k, int(cv.rp[k]), int(cv.cp[k + j]), float(cv.a[k + i, k + j])))
            cv.swap_rows(k, k + i)
            cv.swap_cols(k, k + j)
        if cv.a[k, k] == 0:
            cv.log.append(PivotEvent("zero_pivot", k, int(cv.rp[k]), int(cv.cp[k]), 0.0))
            continue
        cv.eliminate(k)
    return cv.factors(stop)


def _scopes_of(tree) -> list[tuple[int, int, int, int]]:
    if isinstance(tree, OrderingTree):
        return pivot_scopes(tree.block_root(), tree.form)
    if isinstance(tree, tuple) and len(tree) == 2 and isinstance(tree[0], BlockNode):
        return pivot_scopes(tree[0], tree[1])
    return [tuple(s) for s in tree]


def lu_restricted(a_permuted, tree, u: float = DEFAULT_THRESHOLD, pivoting: bool = True) -> Factors:
    """LU that only pivots inside the diagonal blocks of an ordering tree.

    ``tree`` is an OrderingTree, a ``(BlockNode, form)`` pair or a list of
    ``(r0, r1, c0, c1)`` scopes.  Each leaf block and each separator is one
    scope; elimination runs in position order over the whole permuted
    matrix, which yields the same factors as factoring the blocks first and
    adding their contributions to the separators afterwards.

    Threshold pivoting keeps the diagonal when
    ``|a_kk| >= u * max_i |a_ik|`` over the scope's remaining rows, and
    otherwise swaps in the largest row.  ``pivoting=False`` uses the
    diagonal as is.
    """
    cv = _Canvas(a_permuted)
    n = cv.n
    scopes = _scopes_of(tree)
    owner = np.full(n, -1, dtype=np.int64)
    for idx, (r0, r1, c0, c1) in enumerate(scopes):
        if (r0, r1) != (c0, c1):
            raise ValueError(f"pivot scope rows {r0}:{r1} cols {c0}:{c1} is not a diagonal block")
        if np.any(owner[r0:r1] >= 0):
            raise ValueError("pivot scopes overlap")
        owner[r0:r1] = idx
    if np.any(owner < 0):
        raise ValueError("pivot scopes do not cover the matrix")
    for k in range(n):
        scope = scopes[owner[k]]
        end = scope[1]
        if not pivoting:
            if cv.a[k, k] == 0:
                raise SingularBlockError(scope, k)
            cv.eliminate(k)
            continue
        col = np.abs(cv.a[k:end, k])
        cmax = float(col.max())
        if cmax == 0.0:
            # a zero column in a square block means the block is singular
            raise SingularBlockError(scope, k)
        piv = abs(cv.a[k, k])
        if piv == 0.0 or piv < u * cmax:
            i = int(np.argmax(col))
            cv.log.append(PivotEvent("row_swap", k, int(cv.rp[k + i]), int(cv.cp[k]), float(cv.a[k + i, k])))
            cv.swap_rows(k, k + i)
        cv.eliminate(k)
    return cv.factors(n)


def nz_counts(f: Factors, structural: bool = True) -> tuple[int, int]:
    """(nz(L), nz(U)); the unit diagonal of L counts."""
    if structural:
        return int(f.L_mask.sum()), int(f.U_mask.sum())
    return int(np.count_nonzero(f.L)), int(np.count_nonzero(f.U))


def fill_in(a, f: Factors, structural: bool = True) -> float:
    """(nz(L) + nz(U) - n) / nz(A)."""
    nz_a = a.nnz if isinstance(a, SparseMatrix) else int(np.count_nonzero(a))
    nl, nu = nz_counts(f, structural)
    return (nl + nu - f.n) / nz_a


def fill_positions(a_permuted, f: Factors) -> np.ndarray:
    """Boolean mask of fill entries (in factor positions) not present in the input.

    Only meaningful when the factorization did no pivoting.
    """
    return (f.L_mask | f.U_mask) & ~_structure(a_permuted)


def solve(f: Factors, b: np.ndarray) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if f.steps != f.n:
        raise SolveError("factorization is incomplete")
    if np.any(np.diag(f.U) == 0):
        raise SolveError("U has a zero on its diagonal")
    y = sla.solve_triangular(f.L, b[f.row_perm], lower=True, unit_diagonal=True)
    z = sla.solve_triangular(f.U, y, lower=False)
    x = np.empty_like(z)
    x[f.col_perm] = z
    return x


def backward_error(a, x: np.ndarray, b: np.ndarray) -> float:
    """||Ax - b||_inf / (||A||_inf ||x||_inf + ||b||_inf)."""
    dense = _dense(a)
    r = dense @ x - b
    denom = np.abs(dense).sum(axis=1).max(initial=0.0) * np.abs(x).max(initial=0.0) + np.abs(b).max(initial=0.0)
    return float(np.abs(r).max(initial=0.0) / denom) if denom > 0 else 0.0


def solve_and_backward_error(a, f: Factors, b: np.ndarray | None = None) -> tuple[np.ndarray, float]:
    """Solve ``A x = b`` with the factors; ``b`` defaults to ``A @ ones``."""
    dense = _dense(a)
    if b is None:
        b = dense @ np.ones(dense.shape[1])
    x = solve(f, b)
    return x, backward_error(dense, x, b)


# -- block ranks -------------------------------------------------------------

def numerical_rank(m, tol: float = 1e-10) -> int:
    """Rank by Gaussian elimination with complete pivoting.

    Pivots below ``tol`` times the first (largest) pivot count as zero.
    """
    a = np.array(m, dtype=float)
    if a.size == 0:
        return 0
    r, c = a.shape
    first = None
    rank = 0
    for k in range(min(r, c)):
        blk = np.abs(a[k:, k:])
        i, j = np.unravel_index(int(np.argmax(blk)), blk.shape)
        piv = blk[i, j]
        if first is None:
            first = piv
        if piv == 0 or piv <= tol * first:
            break
        a[[k, k + i]] = a[[k + i, k]]
        a[:, [k, k + j]] = a[:, [k + j, k]]
        a[k + 1:, k:] -= np.outer(a[k + 1:, k] / a[k, k], a[k, k:])
        rank += 1
    return rank


def determinant(m) -> float:
    """Determinant from a complete-pivoting LU."""
    f = lu_complete_pivot(np.asarray(m, dtype=float), mode="complete")
    sign = _perm_sign(f.row_perm) * _perm_sign(f.col_perm)
    return float(sign * np.prod(np.diag(f.U)))


def _perm_sign(p: np.ndarray) -> int:
    p = list(p)
    sign = 1
    seen = [False] * len(p)
    for i in range(len(p)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = p[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


@dataclass(frozen=True)
class BlockRanks:
    a: int
    b: int
    c: int
    rank_b: int
    rank_c: int

    @property
    def d(self) -> int:
        return self.a - (self.b + self.c)

    @classmethod
    def from_matrix(cls, a, b: int, c: int, tol: float = 1e-10) -> "BlockRanks":
        """Ranks of the leading ``b x b`` block and the next ``c x c`` block."""
        m = np.asarray(a, dtype=float)
        return cls(m.shape[0], b, c, numerical_rank(m[:b, :b], tol),
                   numerical_rank(m[b:b + c, b:b + c], tol))


@dataclass(frozen=True)
class RankVerdict:
    status: str  # "holds", "violated" or "vacuous"
    tight: bool = False
    lower: int = 0
    value: int = 0
    upper: int = 0


def rank_bound_check(blocks: BlockRanks, det_nonzero: bool) -> RankVerdict:
    """Check ``b + c - d <= rank(B) + rank(C) <= b + c`` for nonsingular A."""
    if blocks.d < 0:
        raise ValueError(f"block sizes inconsistent: d = {blocks.d} < 0")
    if blocks.rank_b > blocks.b or blocks.rank_c > blocks.c or min(blocks.rank_b, blocks.rank_c) < 0:
        raise ValueError("rank exceeds block size")
    lo = blocks.b + blocks.c - blocks.d
    hi = blocks.b + blocks.c
    val = blocks.rank_b + blocks.rank_c
    if not det_nonzero:
        return RankVerdict("vacuous", False, lo, val, hi)
    ok = lo <= val <= hi
    return RankVerdict("holds" if ok else "violated", ok and val == lo, lo, val, hi)


# -- cut sizes ---------------------------------------------------------------

@dataclass(frozen=True)
class CutMetrics:
    max_cut_rows: int
    max_cut_cols: int
    per_split: list[tuple[int, int]]

    @property
    def max_cut(self) -> int:
        return max(self.max_cut_rows, self.max_cut_cols)


def cut_metrics(tree) -> CutMetrics:
    """Separator rows and columns of every split, and their maxima."""
    if isinstance(tree, OrderingTree):
        per = [nd.sep_size() for nd in tree.splits()]
    else:
        per = [(nd.sep_rows, nd.sep_cols) for nd in split_records(tree)]
    return CutMetrics(max((r for r, _ in per), default=0), max((c for _, c in per), default=0), per)


def permitted_mask(root: BlockNode, n_rows: int, n_cols: int, form: str = "bbd") -> np.ndarray:
    """Positions where a recursive BBD/SBD factorization may hold nonzeros.

    Everything except the blocks coupling two different halves (or two
    independent components) of a scope.  Separators are permitted as a whole.
    In SBD form the separator is eliminated before the second half, whose
    Schur complement may then fill completely, so only the first half is
    searched for further forbidden blocks.
    """
    mask = np.ones((n_rows, n_cols), dtype=bool)

    def visit(nd: BlockNode):
        if not nd.children:
            return
        has_sep = nd.sep_rows > 0 or nd.sep_cols > 0
        main = nd.children[:2] if has_sep else nd.children
        for a in main:
            for b in main:
                if a is not b:
                    mask[a.rows[0]:a.rows[1], b.cols[0]:b.cols[1]] = False
        for c in (main[:1] if form == "sbd" and has_sep else main):
            visit(c)

    visit(root)
    return mask


def permuted_dense(m: SparseMatrix, tree: OrderingTree) -> np.ndarray:
    return m.toarray()[np.ix_(tree.row_perm, tree.col_perm)]
