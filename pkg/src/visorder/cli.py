"""Command-line front end: order, eval, layout and render.

Exit codes (stable):
    0  success
    1  parse or I/O error (unreadable or malformed input)
    2  structural singularity (order with matching) or singular pivot block (eval)
    3  invalid flags or inconsistent inputs (dimension mismatch, bad combination)
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import ludecomp
from .hypergraph import KINDS, RepresentationError
from .layout import LayoutParams
from .matio import (ParseError, SparseMatrix, parse_coords, parse_matrix_market,
                    read_permutation, write_coords, write_permutation)
from .ordering import (CUT_STRATEGIES, FORMS, BlockNode, OrderOptions,
                       StructuralSingularityError, compute_layout, parse_block_tree,
                       pivot_scopes, recursive_order)

EXIT_OK, EXIT_IO, EXIT_SINGULAR, EXIT_USAGE = 0, 1, 2, 3

_REPR_CHOICES = KINDS + ("column-net", "row-net")


class UsageError(Exception):
    """Invalid flag value or inconsistent inputs (exit 3)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    input: Path
    repr: str = "bipartite"
    form: str = "bbd"
    cut: str = "schur"
    min_block: int = 32
    dim: int = 4
    seed: int = 0
    threshold: float = ludecomp.DEFAULT_THRESHOLD
    matching: bool = True
    out_prefix: Path | None = None
    geometry: Path | None = None
    rowperm: Path | None = None
    colperm: Path | None = None
    tree: Path | None = None
    no_pivot_only: bool = False

    @property
    def prefix(self) -> Path:
        if self.out_prefix is not None:
            return self.out_prefix
        return self.input.with_suffix("")

    def validate(self) -> None:
        if self.repr not in _REPR_CHOICES:
            raise UsageError(f"unknown representation {self.repr!r}")
        if self.form not in FORMS:
            raise UsageError(f"unknown form {self.form!r}")
        if self.cut not in CUT_STRATEGIES:
            raise UsageError(f"unknown cut strategy {self.cut!r}")
        if self.min_block < 1:
            raise UsageError("--min-block must be at least 1")
        if self.dim < 3:
            raise UsageError("--dim must be at least 3")
        if not 0.0 <= self.threshold <= 1.0:
            raise UsageError("--threshold must lie in [0, 1]")

    def options(self) -> OrderOptions:
        return OrderOptions(form=self.form, cut=self.cut, min_block=self.min_block,
                            matching=self.matching, seed=self.seed, repr=self.repr,
                            layout=LayoutParams(dim=self.dim, seed=self.seed))


# -- helpers -----------------------------------------------------------------

def _read_bytes(path: Path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror or exc}") from None


def _write(path: Path, data: bytes | str) -> None:
    if isinstance(data, str):
        data = data.encode()
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise ParseError(f"cannot write {path}: {exc.strerror or exc}") from None


def _read_matrix(path: Path) -> SparseMatrix:
    return parse_matrix_market(_read_bytes(path))


def _read_geometry(cfg: RunConfig, m: SparseMatrix) -> np.ndarray:
    """Bipartite points from a coordinate file holding n or 2n points."""
    text = _read_bytes(cfg.geometry)
    count = sum(1 for line in text.decode().splitlines() if line.strip())
    n = m.nrows
    if count == 2 * n:
        return parse_coords(text, 2 * n).points
    if count == n:
        pts = parse_coords(text, n).points
        return np.vstack([pts, pts])
    raise UsageError(f"geometry has {count} points; expected {n} or {2 * n}")


def _fmt(x: float) -> str:
    return f"{x:.6g}"


# -- order -------------------------------------------------------------------

def cmd_order(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    m = _read_matrix(cfg.input)
    if m.nrows != m.ncols:
        raise UsageError(f"matrix is {m.nrows}x{m.ncols}; ordering needs a square matrix")
    if cfg.repr == "symmetric" and not m.is_structurally_symmetric():
        raise UsageError("--repr symmetric needs a structurally symmetric matrix")
    layout = _read_geometry(cfg, m) if cfg.geometry is not None else None
    tree = recursive_order(m, cfg.options(), layout=layout)
    prefix = cfg.prefix
    _write(Path(f"{prefix}.rowperm"), write_permutation(tree.row_perm))
    _write(Path(f"{prefix}.colperm"), write_permutation(tree.col_perm))
    _write(Path(f"{prefix}.tree"), tree.report())
    cuts = ludecomp.cut_metrics(tree)
    print(f"max cut {cuts.max_cut} (rows {cuts.max_cut_rows}, cols {cuts.max_cut_cols}, "
          f"splits {len(cuts.per_split)})", file=out)
    return EXIT_OK


# -- eval --------------------------------------------------------------------

def _pick(explicit: Path | None, cfg: RunConfig, suffix: str) -> Path | None:
    """An explicit path, else the file ``order`` would have written, if present."""
    if explicit is not None:
        return explicit
    path = Path(f"{cfg.prefix}{suffix}")
    return path if path.exists() else None


def _eval_inputs(cfg: RunConfig, m: SparseMatrix):
    n = m.nrows
    rp_path, cp_path = _pick(cfg.rowperm, cfg, ".rowperm"), _pick(cfg.colperm, cfg, ".colperm")
    tree_path = _pick(cfg.tree, cfg, ".tree")
    rp = read_permutation(_read_bytes(rp_path)) if rp_path else np.arange(n)
    cp = read_permutation(_read_bytes(cp_path)) if cp_path else rp.copy()
    if len(rp) != n or len(cp) != n:
        raise UsageError(f"permutation lengths {len(rp)}/{len(cp)} do not match n={n}")
    if tree_path is not None:
        root, form, tr, tc = parse_block_tree(_read_bytes(tree_path))
        if (tr, tc) != (n, n) or root.rows != (0, n) or root.cols != (0, n):
            raise UsageError(f"block tree describes a {tr}x{tc} matrix, input is {n}x{n}")
        scopes = (root, form)
    else:
        scopes = [(0, n, 0, n)]
    return rp, cp, scopes


def cmd_eval(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    m = _read_matrix(cfg.input)
    if m.nrows != m.ncols:
        raise UsageError(f"matrix is {m.nrows}x{m.ncols}; evaluation needs a square matrix")
    rp, cp, scopes = _eval_inputs(cfg, m)
    a = m.toarray()[np.ix_(rp, cp)]
    try:
        plain = ludecomp.lu_restricted(a, scopes, pivoting=False)
    except ludecomp.SingularBlockError as exc:
        print(f"no-pivot: singular block at step {exc.step} "
              f"(rows {exc.scope[0]}:{exc.scope[1]})", file=out)
        if cfg.no_pivot_only:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_SINGULAR
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    else:
        _, berr = ludecomp.solve_and_backward_error(a, plain)
        print(f"no-pivot: fill-in {_fmt(ludecomp.fill_in(m, plain))} pivots 0 "
              f"backward-error {berr:.3e}", file=out)
    if cfg.no_pivot_only:
        return EXIT_OK
    try:
        piv = ludecomp.lu_restricted(a, scopes, u=cfg.threshold, pivoting=True)
    except ludecomp.SingularBlockError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    counts = piv.pivot_counts()
    _, berr = ludecomp.solve_and_backward_error(a, piv)
    print(f"threshold u={_fmt(cfg.threshold)}: fill-in {_fmt(ludecomp.fill_in(m, piv))} "
          f"pivots {len(piv.log)} (row swaps {counts['row_swap']}) "
          f"backward-error {berr:.3e}", file=out)
    return EXIT_OK


# -- layout ------------------------------------------------------------------

def cmd_layout(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    m = _read_matrix(cfg.input)
    if cfg.repr == "symmetric" and not m.is_structurally_symmetric():
        raise UsageError("--repr symmetric needs a structurally symmetric matrix")
    x = compute_layout(m, cfg.repr, LayoutParams(dim=cfg.dim, seed=cfg.seed))
    path = Path(f"{cfg.prefix}.coords")
    _write(path, write_coords(x))
    print(f"wrote {len(x)} points in R^{cfg.dim} to {path}", file=out)
    return EXIT_OK


# -- render ------------------------------------------------------------------

def principal_axes(points: np.ndarray) -> np.ndarray:
    """Projection onto the first two principal axes (sign fixed for determinism)."""
    x = np.asarray(points, dtype=float)
    if x.ndim != 2 or len(x) == 0:
        return np.zeros((0, 2))
    c = x - x.mean(axis=0)
    if x.shape[1] < 2:
        c = np.hstack([c, np.zeros((len(c), 2 - x.shape[1]))])
    _, _, vt = np.linalg.svd(c, full_matrices=False)
    axes = vt[:2]
    for k in range(len(axes)):
        if axes[k][np.argmax(np.abs(axes[k]))] < 0:
            axes[k] = -axes[k]
    proj = c @ axes.T
    if proj.shape[1] < 2:
        proj = np.hstack([proj, np.zeros((len(proj), 2 - proj.shape[1]))])
    return proj


def _svg(width: float, height: float, body: list[str]) -> str:
    head = ('<?xml version="1.0" encoding="UTF-8"?>\n'
            '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
            f'width="{width:.2f}" height="{height:.2f}" viewBox="0 0 {width:.2f} {height:.2f}">\n'
            f'<rect x="0" y="0" width="{width:.2f}" height="{height:.2f}" fill="white"/>\n')
    return head + "".join(line + "\n" for line in body) + "</svg>\n"


def spy_svg(m: SparseMatrix, row_perm=None, col_perm=None, root: BlockNode | None = None,
            form: str = "bbd", size: float = 600.0) -> str:
    """Spy plot: one square per nonzero of the permuted matrix, block outlines on top."""
    nr, nc = m.shape
    rp = np.arange(nr) if row_perm is None else np.asarray(row_perm)
    cp = np.arange(nc) if col_perm is None else np.asarray(col_perm)
    rpos = np.empty(nr, dtype=np.int64)
    rpos[rp] = np.arange(nr)
    cpos = np.empty(nc, dtype=np.int64)
    cpos[cp] = np.arange(nc)
    cell = size / max(nr, nc, 1)
    pad = 10.0
    body = [f'<g fill="black" class="marks">']
    for i, j in sorted(zip(rpos[m.rows].tolist(), cpos[m.cols].tolist())):
        body.append(f'<rect class="nz" x="{pad + j * cell:.2f}" y="{pad + i * cell:.2f}" '
                    f'width="{cell:.2f}" height="{cell:.2f}"/>')
    body.append("</g>")
    if root is not None:
        body.append('<g fill="none" stroke-width="1" class="blocks">')
        for r0, r1, c0, c1 in pivot_scopes(root, form):
            body.append(f'<rect x="{pad + c0 * cell:.2f}" y="{pad + r0 * cell:.2f}" '
                        f'width="{(c1 - c0) * cell:.2f}" height="{(r1 - r0) * cell:.2f}" '
                        'stroke="red"/>')
        body.append("</g>")
    body.append(f'<rect x="{pad:.2f}" y="{pad:.2f}" width="{nc * cell:.2f}" height="{nr * cell:.2f}" '
                'fill="none" stroke="gray"/>')
    return _svg(nc * cell + 2 * pad, nr * cell + 2 * pad, body)


def scatter_svg(points: np.ndarray, nrows: int | None = None, size: float = 600.0) -> str:
    """Layout scatter projected on the first two principal axes.

    Both axes share one scale, so projected distances are proportional to
    the true ones.  With ``nrows`` the first ``nrows`` points (rows) are blue
    and the rest (columns) orange.
    """
    p = principal_axes(points)
    pad = 20.0
    body = ['<g class="points">']
    if len(p):
        lo = p.min(axis=0)
        span = float((p.max(axis=0) - lo).max())
        scale = (size - 2 * pad) / span if span > 0 else 0.0
        for k, (u, v) in enumerate(p):
            color = "#1f77b4" if nrows is None or k < nrows else "#ff7f0e"
            body.append(f'<circle class="pt" cx="{pad + (u - lo[0]) * scale:.4f}" '
                        f'cy="{size - pad - (v - lo[1]) * scale:.4f}" r="3" fill="{color}"/>')
    body.append("</g>")
    return _svg(size, size, body)


def cmd_render(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    m = _read_matrix(cfg.input)
    n = m.nrows
    rp_path, cp_path = _pick(cfg.rowperm, cfg, ".rowperm"), _pick(cfg.colperm, cfg, ".colperm")
    tree_path = _pick(cfg.tree, cfg, ".tree")
    rp = read_permutation(_read_bytes(rp_path)) if rp_path else None
    cp = read_permutation(_read_bytes(cp_path)) if cp_path else rp
    if rp is not None and (len(rp) != m.nrows or len(cp) != m.ncols):
        raise UsageError("permutation length does not match the matrix")
    root, form = None, "bbd"
    if tree_path is not None:
        root, form, tr, tc = parse_block_tree(_read_bytes(tree_path))
        if (tr, tc) != m.shape:
            raise UsageError(f"block tree describes a {tr}x{tc} matrix, input is {n}x{m.ncols}")
    prefix = cfg.prefix
    spy = Path(f"{prefix}.spy.svg")
    _write(spy, spy_svg(m, rp, cp, root, form))
    print(f"wrote {spy}", file=out)
    if cfg.geometry is not None:
        text = _read_bytes(cfg.geometry)
        count = sum(1 for line in text.decode().splitlines() if line.strip())
        pts = parse_coords(text, count).points
        scatter = Path(f"{prefix}.layout.svg")
        _write(scatter, scatter_svg(pts, m.nrows if count == m.nrows + m.ncols else None))
        print(f"wrote {scatter}", file=out)
    return EXIT_OK


# -- entry point -------------------------------------------------------------

_COMMANDS = {"order": cmd_order, "eval": cmd_eval, "layout": cmd_layout, "render": cmd_render}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="visorder", description="Matrix ordering from visual representations.")
    sub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def common(sp, ordering: bool = False):
        sp.add_argument("input", type=Path, help="Matrix Market file")
        sp.add_argument("--out-prefix", type=Path, default=None,
                        help="prefix for output files (default: input path without suffix)")
        sp.add_argument("--seed", type=int, default=0)
        if ordering:
            sp.add_argument("--repr", choices=_REPR_CHOICES, default="bipartite")
            sp.add_argument("--dim", type=int, default=4)

    o = sub.add_parser("order", help="compute row/column permutations and a block tree")
    common(o, ordering=True)
    o.add_argument("--form", choices=FORMS, default="bbd")
    o.add_argument("--cut", choices=CUT_STRATEGIES, default="schur")
    o.add_argument("--min-block", type=int, default=32)
    o.add_argument("--no-matching", action="store_true")
    o.add_argument("--geometry", type=Path, default=None,
                   help="coordinates for n or 2n vertices; skips the layout")

    e = sub.add_parser("eval", help="factor the permuted matrix and report fill and stability")
    common(e)
    e.add_argument("--rowperm", type=Path)
    e.add_argument("--colperm", type=Path)
    e.add_argument("--tree", type=Path)
    e.add_argument("--threshold", type=float, default=ludecomp.DEFAULT_THRESHOLD)
    e.add_argument("--no-pivot", action="store_true", help="only the run without pivoting")

    lay = sub.add_parser("layout", help="write layout coordinates for the bipartite vertices")
    common(lay, ordering=True)

    r = sub.add_parser("render", help="write SVG spy plot and layout scatter")
    common(r)
    r.add_argument("--rowperm", type=Path)
    r.add_argument("--colperm", type=Path)
    r.add_argument("--tree", type=Path)
    r.add_argument("--geometry", type=Path, default=None)
    return p


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    get = lambda k, d=None: getattr(ns, k, d)  # noqa: E731
    return RunConfig(
        subcommand=ns.subcommand, input=ns.input, repr=get("repr", "bipartite"),
        form=get("form", "bbd"), cut=get("cut", "schur"), min_block=get("min_block", 32),
        dim=get("dim", 4), seed=ns.seed, threshold=get("threshold", ludecomp.DEFAULT_THRESHOLD),
        matching=not get("no_matching", False), out_prefix=ns.out_prefix,
        geometry=get("geometry"), rowperm=get("rowperm"), colperm=get("colperm"),
        tree=get("tree"), no_pivot_only=get("no_pivot", False))


def run(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    try:
        cfg.validate()
        return _COMMANDS[cfg.subcommand](cfg, out)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except StructuralSingularityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except RepresentationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main(argv: list[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    return run(config_from_args(ns))


if __name__ == "__main__":
    sys.exit(main())
