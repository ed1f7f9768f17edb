"""Sparse matrix orderings derived from force-directed hypergraph layouts."""

from .hypergraph import Hypergraph, connected_components, coarsen, dual, from_matrix
from .layout import LayoutParams, multilevel_layout
from .ludecomp import fill_in, lu_complete_pivot, lu_restricted
from .matio import SparseMatrix, parse_matrix_market, write_matrix_market
from .ordering import OrderOptions, OrderingTree, recursive_order, strengthen_diagonal
from .partition import kmeans_pp

__version__ = "0.1.0"

__all__ = [
    "Hypergraph", "LayoutParams", "OrderOptions", "OrderingTree", "SparseMatrix",
    "coarsen", "connected_components", "dual", "fill_in", "from_matrix", "kmeans_pp",
    "lu_complete_pivot", "lu_restricted", "multilevel_layout", "parse_matrix_market",
    "recursive_order", "strengthen_diagonal", "write_matrix_market",
]
