"""Uniform spanning trees on cylinders C_n x P_m: Wilson sampling, trunk and
branch structure, the left/right slash of sink trees, exact small-graph
oracles, and a small Abelian sandpile engine."""

from .graph import CylinderGraph, GraphError, QuotientGraph, build, contract
from .rng import RngStream
from .sampler import SpanningTree, WalkCapError, loop_erase, walk_until_hit, wilson, wilson_extend

__all__ = [
    "CylinderGraph",
    "GraphError",
    "QuotientGraph",
    "RngStream",
    "SpanningTree",
    "WalkCapError",
    "build",
    "contract",
    "loop_erase",
    "walk_until_hit",
    "wilson",
    "wilson_extend",
]

__version__ = "0.1.0"
