"""Hoppe trees: sampling, path-length statistics, exact moments and limit laws."""

from .errors import FixpointError, ParameterError
from .exact import expected_T, expected_U, expected_W, limit_moments_u
from .kernels import JumpKernel, parse_kernel
from .pointset import PointRealization, barycenter, realize
from .rng import DEFAULT_SEED
from .tree import HoppeTree, TreeStats, compute_stats, generate_tree

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_SEED", "FixpointError", "HoppeTree", "JumpKernel", "ParameterError",
    "PointRealization", "TreeStats", "barycenter", "compute_stats", "expected_T",
    "expected_U", "expected_W", "generate_tree", "limit_moments_u", "parse_kernel",
    "realize",
]
