"""Matrix Market, coordinate and permutation file I/O.

Only the ``coordinate`` Matrix Market body is supported, with ``real``,
``integer`` or ``pattern`` fields and ``general`` or ``symmetric``
symmetry.  Indices are 0-based everywhere except inside Matrix Market files.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Iterable, Union

import numpy as np
import scipy.sparse as sp

Text = Union[str, bytes]


class ParseError(ValueError):
    """Malformed input file. ``line`` is the 1-based line number, if known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def _as_str(text: Text) -> str:
    if isinstance(text, bytes):
        return text.decode("utf-8")
    return text


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Sparse matrix in coordinate form with unique (row, col) pairs.

    Entries are kept sorted row-major.  Explicit zeros are kept as
    structural nonzeros.
    """

    nrows: int
    ncols: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    _csr: sp.csr_matrix | None = field(default=None, repr=False, compare=False)

    @classmethod
    def from_entries(cls, nrows: int, ncols: int, rows: Iterable[int], cols: Iterable[int],
                     vals: Iterable[float] | None = None) -> "SparseMatrix":
        """Build a matrix from coordinate triples, summing duplicates."""
        r = np.asarray(list(rows) if not isinstance(rows, np.ndarray) else rows, dtype=np.int64)
        c = np.asarray(list(cols) if not isinstance(cols, np.ndarray) else cols, dtype=np.int64)
        if vals is None:
            v = np.ones(len(r), dtype=float)
        else:
            v = np.asarray(list(vals) if not isinstance(vals, np.ndarray) else vals, dtype=float)
        if not (len(r) == len(c) == len(v)):
            raise ValueError("rows, cols and vals must have equal length")
        if len(r) and (r.min() < 0 or r.max() >= nrows or c.min() < 0 or c.max() >= ncols):
            raise ValueError("entry index out of range")
        key = r * max(ncols, 1) + c
        order = np.argsort(key, kind="stable")
        key, r, c, v = key[order], r[order], c[order], v[order]
        if len(key):
            first = np.concatenate(([True], key[1:] != key[:-1]))
            starts = np.flatnonzero(first)
            v = np.add.reduceat(v, starts)
            r, c = r[starts], c[starts]
        for a in (r, c, v):
            a.setflags(write=False)
        return cls(int(nrows), int(ncols), r, c, v)

    @classmethod
    def from_dense(cls, a) -> "SparseMatrix":
        a = np.asarray(a, dtype=float)
        r, c = np.nonzero(a)
        return cls.from_entries(a.shape[0], a.shape[1], r, c, a[r, c])

    @classmethod
    def from_scipy(cls, m) -> "SparseMatrix":
        coo = sp.coo_matrix(m)
        return cls.from_entries(coo.shape[0], coo.shape[1], coo.row, coo.col, coo.data)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    @property
    def nnz(self) -> int:
        return len(self.vals)

    def csr(self) -> sp.csr_matrix:
        """Compressed row-major index, built on first use.

        Explicit zeros survive because scipy keeps stored zeros unless asked
        to prune them.
        """
        if self._csr is None:
            m = sp.csr_matrix((self.vals, (self.rows, self.cols)), shape=self.shape)
            m.has_canonical_format = True
            object.__setattr__(self, "_csr", m)
        return self._csr

    def toarray(self) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self.rows, self.cols] = self.vals
        return out

    def pattern(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=bool)
        out[self.rows, self.cols] = True
        return out

    def get(self, i: int, j: int) -> float:
        hit = np.flatnonzero((self.rows == i) & (self.cols == j))
        return float(self.vals[hit[0]]) if len(hit) else 0.0

    def permute(self, row_perm, col_perm) -> "SparseMatrix":
        """Return the matrix whose row k is row ``row_perm[k]`` of self (same for columns)."""
        rp = np.asarray(row_perm, dtype=np.int64)
        cp = np.asarray(col_perm, dtype=np.int64)
        row_pos = np.empty(self.nrows, dtype=np.int64)
        row_pos[rp] = np.arange(self.nrows)
        col_pos = np.empty(self.ncols, dtype=np.int64)
        col_pos[cp] = np.arange(self.ncols)
        return SparseMatrix.from_entries(self.nrows, self.ncols, row_pos[self.rows],
                                         col_pos[self.cols], self.vals)

    def is_structurally_symmetric(self) -> bool:
        if self.nrows != self.ncols:
            return False
        fwd = set(zip(self.rows.tolist(), self.cols.tolist()))
        return all((j, i) in fwd for i, j in fwd)

    def same_entries(self, other: "SparseMatrix") -> bool:
        return (self.shape == other.shape
                and np.array_equal(self.rows, other.rows)
                and np.array_equal(self.cols, other.cols)
                and np.array_equal(self.vals, other.vals))


_FIELDS = {"real", "integer", "pattern"}
_SYMMETRIES = {"general", "symmetric"}


def parse_matrix_market(text: Text) -> SparseMatrix:
    """Parse a coordinate Matrix Market file.

    Symmetric storage is expanded, pattern entries get value 1.0 and
    duplicate entries are summed.
    """
    lines = _as_str(text).splitlines()
    if not lines:
        raise ParseError("empty input", 1)
    header = lines[0].strip().split()
    if len(header) != 5 or header[0].lower() != "%%matrixmarket" or header[1].lower() != "matrix":
        raise ParseError("missing '%%MatrixMarket matrix' banner", 1)
    fmt, fld, sym = (h.lower() for h in header[2:])
    if fmt == "array":
        raise ParseError("dense 'array' format is not supported", 1)
    if fmt != "coordinate":
        raise ParseError(f"unknown format {fmt!r}", 1)
    if fld not in _FIELDS:
        raise ParseError(f"unsupported field {fld!r}", 1)
    if sym not in _SYMMETRIES:
        raise ParseError(f"unsupported symmetry {sym!r}", 1)

    lineno = 1
    size = None
    for lineno in range(2, len(lines) + 1):
        s = lines[lineno - 1].strip()
        if s and not s.startswith("%"):
            size = s.split()
            break
    if size is None:
        raise ParseError("missing size line", lineno)
    size_line = lineno
    try:
        if len(size) != 3:
            raise ValueError
        nrows, ncols, nnz = (int(t) for t in size)
    except ValueError:
        raise ParseError("size line must hold three integers", size_line) from None
    if nrows < 0 or ncols < 0 or nnz < 0:
        raise ParseError("negative size", size_line)
    if sym == "symmetric" and nrows != ncols:
        raise ParseError("symmetric matrix must be square", size_line)

    ntok = 2 if fld == "pattern" else 3
    rows, cols, vals = [], [], []
    read = 0
    for lineno in range(size_line + 1, len(lines) + 1):
        s = lines[lineno - 1].strip()
        if not s or s.startswith("%"):
            continue
        tok = s.split()
        if len(tok) != ntok:
            raise ParseError(f"expected {ntok} fields, got {len(tok)}", lineno)
        try:
            i, j = int(tok[0]), int(tok[1])
            v = 1.0 if fld == "pattern" else (float(int(tok[2])) if fld == "integer" else float(tok[2]))
        except ValueError:
            raise ParseError(f"bad entry {s!r}", lineno) from None
        if not (1 <= i <= nrows and 1 <= j <= ncols):
            raise ParseError(f"index ({i}, {j}) out of range", lineno)
        if read == nnz:
            raise ParseError(f"more than {nnz} entries", lineno)
        read += 1
        rows.append(i - 1)
        cols.append(j - 1)
        vals.append(v)
        if sym == "symmetric" and i != j:
            rows.append(j - 1)
            cols.append(i - 1)
            vals.append(v)
    if read != nnz:
        raise ParseError(f"expected {nnz} entries, found {read}", len(lines))
    return SparseMatrix.from_entries(nrows, ncols, rows, cols, vals)


def write_matrix_market(m: SparseMatrix, pattern: bool = False) -> bytes:
    """Write ``m`` as a general coordinate Matrix Market file."""
    out = io.StringIO()
    fld = "pattern" if pattern else "real"
    out.write(f"%%MatrixMarket matrix coordinate {fld} general\n")
    out.write(f"{m.nrows} {m.ncols} {m.nnz}\n")
    for i, j, v in zip(m.rows.tolist(), m.cols.tolist(), m.vals.tolist()):
        if pattern:
            out.write(f"{i + 1} {j + 1}\n")
        else:
            out.write(f"{i + 1} {j + 1} {v!r}\n")
    return out.getvalue().encode()


@dataclass(frozen=True)
class GivenGeometry:
    dim: int
    points: np.ndarray


def parse_coords(text: Text, expected_count: int) -> GivenGeometry:
    """Parse one whitespace-separated point per line; blank lines are skipped."""
    pts: list[list[float]] = []
    dim = None
    for lineno, line in enumerate(_as_str(text).splitlines(), start=1):
        tok = line.split()
        if not tok:
            continue
        try:
            row = [float(t) for t in tok]
        except ValueError:
            raise ParseError(f"non-numeric coordinate in {line.strip()!r}", lineno) from None
        if dim is None:
            dim = len(row)
        elif len(row) != dim:
            raise ParseError(f"expected {dim} coordinates, got {len(row)}", lineno)
        pts.append(row)
    if len(pts) != expected_count:
        raise ParseError(f"expected {expected_count} points, found {len(pts)}")
    arr = np.array(pts, dtype=float).reshape(len(pts), dim or 0)
    return GivenGeometry(dim or 0, arr)


def write_coords(points: np.ndarray) -> bytes:
    return "".join(" ".join(repr(float(x)) for x in p) + "\n" for p in points).encode()


def write_permutation(perm) -> bytes:
    """One line per index: line ``i`` holds ``perm[i]`` (0-based)."""
    p = [int(x) for x in perm]
    if sorted(p) != list(range(len(p))):
        raise ValueError("not a permutation")
    return "".join(f"{x}\n" for x in p).encode()


def read_permutation(text: Text) -> np.ndarray:
    vals = []
    for lineno, line in enumerate(_as_str(text).splitlines(), start=1):
        s = line.strip()
        if not s:
            continue
        try:
            vals.append(int(s))
        except ValueError:
            raise ParseError(f"bad permutation entry {s!r}", lineno) from None
    if sorted(vals) != list(range(len(vals))):
        raise ParseError("entries do not form a permutation of 0..n-1")
    return np.array(vals, dtype=np.int64)
