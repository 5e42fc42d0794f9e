"""Random recursive point sets on Hoppe trees.

Each non-root vertex ``k`` sits at ``X_k = X_parent + Y_k`` with iid jumps
``Y_k``; ``X_0 = 0``.  For a covariant kernel this is the same law as
summing the jumps along the root path of ``k``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from . import exact
from .errors import ParameterError
from .kernels import JumpKernel
from .rng import replicate_rng
from .running import RunningStats
from .tree import HoppeTree, TreeStats, batch_stats, compute_stats, parents_from_uniforms


@dataclass(frozen=True, eq=False)
class PointRealization:
    tree: HoppeTree
    points: np.ndarray
    kernel: JumpKernel

    @property
    def n(self) -> int:
        return self.tree.n

    def to_csv(self) -> str:
        stats = compute_stats(self.tree)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["vertex", "parent", "depth", "x"])
        for k in range(self.n):
            parent = "" if k == 0 else int(self.tree.parent[k])
            writer.writerow([k, parent, int(stats.depths[k]), repr(float(self.points[k]))])
        return buf.getvalue()


def realize(tree: HoppeTree, kernel: JumpKernel, rng: np.random.Generator) -> PointRealization:
    jumps = kernel.sample(rng, tree.n - 1)
    x = np.zeros(tree.n)
    parent = tree.parent
    for k in range(1, tree.n):
        x[k] = x[parent[k]] + jumps[k - 1]
    return PointRealization(tree, x, kernel)


def barycenter(realization: PointRealization) -> float:
    return float(np.mean(realization.points))


def conditional_variance(stats: TreeStats, sigma2: float) -> float:
    """Variance of the barycenter given the tree: ``sigma2 * U_n / n^2``."""
    if not sigma2 > 0:
        raise ParameterError(f"sigma2 must be positive, got {sigma2}")
    return sigma2 * stats.u / stats.n**2


def barycenter_resamples(tree: HoppeTree, kernel: JumpKernel, count: int,
                         rng: np.random.Generator) -> np.ndarray:
    """``count`` barycenters on a fixed tree, each with fresh jumps.

    Vertex ``k``'s jump is carried by every vertex of its subtree, so
    ``n S_n = sum_k size_k Y_k``.
    """
    n = tree.n
    if n == 1:
        return np.zeros(count)
    sizes = compute_stats(tree).subtree_sizes[1:].astype(float)
    jumps = kernel.sample(rng, (count, n - 1))
    return jumps @ sizes / n


@dataclass(frozen=True)
class PairCovariance:
    j: int
    k: int
    estimate: float
    stderr: float
    lca_estimate: float
    lca_stderr: float
    exact: float
    replicates: int

    @property
    def z(self) -> float:
        """Monte Carlo covariance against ``E[D_jk] sigma^2`` from the closed recursion."""
        if self.stderr == 0:
            return 0.0 if self.estimate == self.exact else math.inf
        return (self.estimate - self.exact) / self.stderr

    @property
    def z_lca(self) -> float:
        """Covariance against the LCA-depth average measured on the same trees."""
        se = math.hypot(self.stderr, self.lca_stderr)
        if se == 0:
            return 0.0 if self.estimate == self.lca_estimate else math.inf
        return (self.estimate - self.lca_estimate) / se


def _batch_lca_depth(parents: np.ndarray, depth: np.ndarray, i: int, j: int) -> np.ndarray:
    """Row-wise :func:`lca_depth` of vertices ``i`` and ``j`` in a parent matrix."""
    rows = np.arange(parents.shape[0])
    a = np.full(rows.size, i)
    b = np.full(rows.size, j)
    while True:
        da, db = depth[rows, a], depth[rows, b]
        moving = a != b
        if not moving.any():
            return da
        # lift the deeper end; at equal depth lift both
        a = np.where(moving & (da >= db), parents[rows, a], a)
        b = np.where(moving & (db >= da), parents[rows, b], b)


def empirical_pair_covariance(j: int, k: int, n: int, theta: float, kernel: JumpKernel,
                              replicates: int, seed: int) -> PairCovariance:
    """Monte Carlo ``Cov(X_j, X_k)`` over fresh trees and jumps.

    Replicate ``i`` draws its tree and then its jumps from the stream
    ``(seed, i)``.  The kernel must be centered: the estimate is the mean of
    ``X_j X_k``.
    """
    if not kernel.centered:
        raise ParameterError("pair covariance requires a centered kernel")
    if not (0 <= j < n and 0 <= k < n):
        raise ParameterError(f"vertices ({j}, {k}) out of range for n={n}")
    if replicates < 2:
        raise ParameterError("need at least 2 replicates")
    prods = np.empty(replicates)
    depths = np.empty(replicates)
    step = max(1, min(8192, 1_000_000 // n))
    for lo in range(0, replicates, step):
        hi = min(lo + step, replicates)
        u = np.empty((hi - lo, n - 1))
        y = np.empty((hi - lo, n - 1))
        for row, i in enumerate(range(lo, hi)):
            # same draw order as generate_tree followed by realize
            rng = replicate_rng(seed, i)
            u[row] = rng.random(n - 1)
            y[row] = kernel.sample(rng, n - 1)
        parents = parents_from_uniforms(u, theta)
        x = np.zeros((hi - lo, n))
        rows = np.arange(hi - lo)
        for v in range(1, n):
            x[:, v] = x[rows, parents[:, v]] + y[:, v - 1]
        prods[lo:hi] = x[:, j] * x[:, k]
        depths[lo:hi] = _batch_lca_depth(parents, batch_stats(parents).depths, j, k)
    prod = RunningStats().update(prods)
    lca = RunningStats().update(depths)
    s2 = kernel.variance
    return PairCovariance(
        j=j, k=k,
        estimate=prod.mean,
        stderr=prod.stderr,
        lca_estimate=lca.mean * s2,
        lca_stderr=lca.stderr * s2,
        exact=exact.expected_lca_depth(j, k, theta) * s2,
        replicates=replicates,
    )

