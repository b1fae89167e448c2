"""Compressed FM-index for network-constrained trajectories.

The labeled index replaces every BWT symbol by its rank among the observed
successors of its context, which shrinks the alphabet to the maximum
out-degree of the road network and keeps backward search cost independent
of the number of road segments.
"""

from .datagen import WalkConfig, gen_grid_network, gen_poisson_digraph, gen_walks
from .errors import (
    ConfigurationError,
    ConsistencyError,
    IndexFormatError,
    InputFormatError,
    InvalidQueryError,
    TrajfmError,
)
from .index import (
    BaselineFmIndex,
    SntIndex,
    SuffixRange,
    build_baseline,
    build_index,
    load_index,
)
from .instrument import counting
from .labeling import LabelStrategy
from .text import build_bwt, build_trajectory_string, h0, hk, read_trajectories

__version__ = "0.1.0"

__all__ = [
    "BaselineFmIndex",
    "ConfigurationError",
    "ConsistencyError",
    "IndexFormatError",
    "InputFormatError",
    "InvalidQueryError",
    "LabelStrategy",
    "SntIndex",
    "SuffixRange",
    "TrajfmError",
    "WalkConfig",
    "build_baseline",
    "build_bwt",
    "build_index",
    "build_trajectory_string",
    "counting",
    "gen_grid_network",
    "gen_poisson_digraph",
    "gen_walks",
    "h0",
    "hk",
    "load_index",
    "read_trajectories",
]
