"""Kernelization and exact solving for Hybridization Number on multiple nonbinary trees."""

__version__ = "0.1.0"

from .kernel import (KernelResult, ReductionTrace, kernelize_degree, kernelize_trees,
                     lift_solution, move_chain_to_side)
from .networks import (Generator, Network, binarize, cleanup, displayed_trees, displays,
                       reticulation_number, underlying_generator)
from .newick import LabelSet, ParseError, parse_network, parse_tree, serialize_network, serialize_tree
from .oracle import brute_force_r
from .solver import (ArrowIndex, build_arrow_index, enumerate_generators,
                     enumerate_partial_networks, extend_partial_network, solve_xp)
from .trees import (Chain, Instance, Tree, find_common_pendant_subtree, is_chainable,
                    is_refinement, max_common_chain, max_q_star_chain, verify_chain)

__all__ = [
    "ArrowIndex", "Chain", "Generator", "Instance", "KernelResult", "LabelSet", "Network",
    "ParseError", "ReductionTrace", "Tree", "binarize", "brute_force_r", "build_arrow_index",
    "cleanup", "displayed_trees", "displays", "enumerate_generators",
    "enumerate_partial_networks", "extend_partial_network", "find_common_pendant_subtree",
    "is_chainable", "is_refinement", "kernelize_degree", "kernelize_trees", "lift_solution",
    "max_common_chain", "max_q_star_chain", "move_chain_to_side", "parse_network", "parse_tree",
    "reticulation_number", "serialize_network", "serialize_tree", "solve_xp",
    "underlying_generator", "verify_chain",
]
