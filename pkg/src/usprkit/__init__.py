"""Unrooted SPR distance with subtree and chain reduction."""

from .tree import (
    SprMove,
    Tree,
    TreeError,
    apply_spr,
    enumerate_trees,
    induced_subtree,
    random_tree,
    spr_moves,
    spr_neighbors,
)
from .newick import NewickError, parse_newick, read_trees, write_newick
from .forest import LabeledForest, is_agreement_forest, maf_exact, tbr_distance
from .reduction import ReducedPair, chain_reduce, find_common_chains, find_common_subtrees, kernelize, \
    subtree_reduce
from .distance import BudgetExceeded, CapExceeded, DistanceResult, max_distance_bound, uspr_exact, \
    uspr_oracle
from .saf import SocketForest, permits_path, permits_tree, saf_from_af, underlying_forest
from .rewrite import TreePath, chain_preserving_rewrite, classify_chain_case

__version__ = "0.1.0"
