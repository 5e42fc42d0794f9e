"""Hoppe trees in parent-array form and their path-length statistics.

Vertex ``k`` of an ``n``-vertex tree is attached to ``parent[k] < k``; the
root 0 carries weight ``theta`` and every other vertex weight 1.  Statistics
are exact integers:

    T_n   total path length, sum of depths
    W_n   Wiener index, sum of distances over unordered pairs
    2R_n  twice the sum over unordered pairs of the LCA depth
    U_n   T_n + 2R_n = n T_n - W_n
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .errors import ParameterError

ROOT_SENTINEL = -1
BRUTEFORCE_MAX_N = 10_000
ENUMERATE_MAX_N = 9
# path tree has W_n = (n^3 - n) / 6; int64 holds it up to here
BATCH_MAX_N = 2_000_000


def _check_theta(theta: float) -> float:
    theta = float(theta)
    if not theta > 0 or math.isinf(theta):
        raise ParameterError(f"theta must be a positive finite number, got {theta!r}")
    return theta


@dataclass(frozen=True, eq=False)
class HoppeTree:
    theta: float
    parent: np.ndarray

    def __post_init__(self):
        _check_theta(self.theta)
        parent = np.asarray(self.parent, dtype=np.int64).copy()
        if parent.ndim != 1 or parent.size == 0:
            raise ParameterError("parent must be a non-empty 1-d array")
        parent[0] = ROOT_SENTINEL
        k = np.arange(parent.size)
        if np.any(parent[1:] < 0) or np.any(parent[1:] >= k[1:]):
            raise ParameterError("parent[k] must lie in {0, ..., k-1} for k >= 1")
        parent.setflags(write=False)
        object.__setattr__(self, "parent", parent)
        object.__setattr__(self, "theta", float(self.theta))

    @property
    def n(self) -> int:
        return int(self.parent.size)

    def __eq__(self, other):
        if not isinstance(other, HoppeTree):
            return NotImplemented
        return self.theta == other.theta and np.array_equal(self.parent, other.parent)

    def __hash__(self):
        return hash((self.theta, self.parent.tobytes()))

    def __repr__(self):
        return f"HoppeTree(n={self.n}, theta={self.theta!r}, parent={self.parent[1:].tolist()})"


@dataclass(frozen=True, eq=False)
class TreeStats:
    n: int
    depths: np.ndarray
    subtree_sizes: np.ndarray
    total_length: int
    wiener: int
    lca_sum: int
    u: int

    @property
    def r(self) -> int:
        return self.lca_sum // 2

    def as_dict(self) -> dict:
        return {"n": self.n, "T": self.total_length, "W": self.wiener,
                "R2": self.lca_sum, "U": self.u}


# ---------------------------------------------------------------- sampling


def _attach(u, k, theta):
    """Map uniforms ``u`` to parents of vertex ``k`` (array-valued ``k`` allowed)."""
    r = u * (theta + k - 1)
    nonroot = np.minimum(np.floor(r - theta).astype(np.int64) + 1, k - 1)
    return np.where(r < theta, 0, nonroot)


def sample_parent(k: int, theta: float, rng: np.random.Generator) -> int:
    """Parent of vertex ``k`` when vertices ``0..k-1`` are present.

    The root is chosen with probability ``theta / (theta + k - 1)`` and
    every other vertex with probability ``1 / (theta + k - 1)``.
    """
    theta = _check_theta(theta)
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    return int(_attach(rng.random(), k, theta))


def parents_from_uniforms(u: np.ndarray, theta: float) -> np.ndarray:
    """Parent arrays from uniforms of shape ``(..., n-1)``; column 0 is the sentinel."""
    u = np.asarray(u, dtype=float)
    k = np.arange(1, u.shape[-1] + 1)
    out = np.empty(u.shape[:-1] + (u.shape[-1] + 1,), dtype=np.int64)
    out[..., 0] = ROOT_SENTINEL
    out[..., 1:] = _attach(u, k, theta)
    return out


def generate_tree(n: int, theta: float, rng: np.random.Generator) -> HoppeTree:
    """Grow a Hoppe(theta) tree on ``n`` vertices.

    Draws one uniform per non-root vertex in ascending order, so the result
    coincides with ``n - 1`` successive :func:`sample_parent` calls.
    """
    theta = _check_theta(theta)
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    return HoppeTree(theta, parents_from_uniforms(rng.random(n - 1), theta))


# -------------------------------------------------------------- statistics


def compute_stats(tree: HoppeTree) -> TreeStats:
    """Depths, subtree sizes, T, W, 2R and U of one tree in O(n).

    Uses Python integers throughout, so the values are exact for any n.
    """
    n = tree.n
    parent = tree.parent.tolist()
    depth = [0] * n
    for k in range(1, n):
        depth[k] = depth[parent[k]] + 1
    size = [1] * n
    for k in range(n - 1, 0, -1):
        size[parent[k]] += size[k]
    total = sum(depth)
    wiener = sum(s * (n - s) for s in size[1:])
    return TreeStats(
        n=n,
        depths=np.array(depth, dtype=np.int64),
        subtree_sizes=np.array(size, dtype=np.int64),
        total_length=total,
        wiener=wiener,
        lca_sum=(n - 1) * total - wiener,
        u=n * total - wiener,
    )


class BatchStats(NamedTuple):
    total_length: np.ndarray
    wiener: np.ndarray
    lca_sum: np.ndarray
    u: np.ndarray
    depths: np.ndarray
    subtree_sizes: np.ndarray


def batch_stats(parents: np.ndarray, sizes=None) -> BatchStats:
    """Statistics for a stack of trees given as rows of a parent matrix.

    ``sizes`` optionally restricts row ``b`` to its first ``sizes[b]``
    vertices.  Any prefix of a Hoppe tree is itself a Hoppe tree, so this
    lets trees of different sizes share one matrix.  Depth and subtree-size
    matrices are returned with shape ``(B, n)``; entries beyond a row's size
    are zero.
    """
    parents = np.atleast_2d(np.asarray(parents, dtype=np.int64))
    b, n = parents.shape
    if n > BATCH_MAX_N:
        raise ParameterError(f"n={n} exceeds the int64-safe cap {BATCH_MAX_N}")
    m = np.full(b, n, dtype=np.int64) if sizes is None else np.asarray(sizes, dtype=np.int64)
    if m.shape != (b,) or np.any(m < 1) or np.any(m > n):
        raise ParameterError("sizes must hold one value in 1..n per row")
    # vertex-major layout keeps each step's row contiguous
    par = np.ascontiguousarray(parents.T)
    offs = np.arange(b)
    depth = np.zeros((n, b), dtype=np.int64)
    flat = depth.reshape(-1)
    for k in range(1, n):
        depth[k] = flat[par[k] * b + offs] + 1
    valid = np.arange(n)[:, None] < m[None, :]
    depth *= valid
    size = valid.astype(np.int64)
    flat = size.reshape(-1)
    for k in range(n - 1, 0, -1):
        flat[par[k] * b + offs] += size[k]
    total = depth.sum(axis=0)
    wiener = (size[1:] * (m[None, :] - size[1:])).sum(axis=0)
    return BatchStats(
        total_length=total,
        wiener=wiener,
        lca_sum=(m - 1) * total - wiener,
        u=m * total - wiener,
        depths=depth.T,
        subtree_sizes=size.T,
    )


# ------------------------------------------------------------------ oracles


def _depths(tree: HoppeTree) -> list[int]:
    parent = tree.parent.tolist()
    depth = [0] * tree.n
    for k in range(1, tree.n):
        depth[k] = depth[parent[k]] + 1
    return depth


def lca_depth(tree: HoppeTree, i: int, j: int, depths=None) -> int:
    """Depth of the last common vertex on the root paths to ``i`` and ``j``."""
    n = tree.n
    if not (0 <= i < n and 0 <= j < n):
        raise ParameterError(f"vertices ({i}, {j}) out of range for n={n}")
    if depths is None:
        depths = _depths(tree)
    parent = tree.parent
    while depths[i] > depths[j]:
        i = int(parent[i])
    while depths[j] > depths[i]:
        j = int(parent[j])
    while i != j:
        i, j = int(parent[i]), int(parent[j])
    return int(depths[i])


def path_matrix(tree: HoppeTree) -> np.ndarray:
    """0/1 matrix with ``A[i, m] = 1`` iff ``m`` lies on the path from the root to ``i``."""
    n = tree.n
    a = np.zeros((n, n), dtype=np.float64)
    a[0, 0] = 1.0
    parent = tree.parent
    for k in range(1, n):
        a[k] = a[parent[k]]
        a[k, k] = 1.0
    return a


def pair_lca_depths(tree: HoppeTree) -> np.ndarray:
    """All LCA depths at once: shared path vertices minus the root."""
    if tree.n > BRUTEFORCE_MAX_N:
        raise ParameterError(f"quadratic oracle refused for n={tree.n} > {BRUTEFORCE_MAX_N}")
    a = path_matrix(tree)
    return np.rint(a @ a.T).astype(np.int64) - 1


def wiener_bruteforce(tree: HoppeTree) -> int:
    """Sum over all pairs ``i < j`` of ``D_i + D_j - 2 D_ij`` (quadratic)."""
    d_pair = pair_lca_depths(tree)
    depth = np.diag(d_pair)
    dist = depth[:, None] + depth[None, :] - 2 * d_pair
    return int(np.triu(dist, 1).sum())


def enumerate_trees(n: int, theta: float) -> Iterator[tuple[HoppeTree, float]]:
    """Every tree on ``n`` vertices together with its Hoppe(theta) probability."""
    theta = _check_theta(theta)
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if n > ENUMERATE_MAX_N:
        raise ParameterError(f"enumeration refused for n={n} > {ENUMERATE_MAX_N}")
    denom = [theta + k - 1 for k in range(1, n)]
    for choice in itertools.product(*(range(k) for k in range(1, n))):
        prob = 1.0
        for p, d in zip(choice, denom):
            prob *= (theta if p == 0 else 1.0) / d
        yield HoppeTree(theta, np.array((ROOT_SENTINEL,) + choice)), prob


def split_first_branch(tree: HoppeTree) -> tuple[HoppeTree, HoppeTree]:
    """Cut the edge 0-1: the subtree rooted at 1 and the rest, both relabeled.

    Relabeling keeps the original vertex order, so both parts are again
    recursive trees.  The branch is returned with ``theta = 1``: every
    vertex in it carries weight 1.
    """
    if tree.n < 2:
        raise ParameterError("the tree has no vertex 1")
    parent = tree.parent.tolist()
    in_branch = [False] * tree.n
    in_branch[1] = True
    for k in range(2, tree.n):
        in_branch[k] = in_branch[parent[k]]
    branch = [k for k in range(tree.n) if in_branch[k]]
    rest = [k for k in range(tree.n) if not in_branch[k]]

    def relabel(keep):
        index = {v: i for i, v in enumerate(keep)}
        return np.array([ROOT_SENTINEL] + [index[parent[v]] for v in keep[1:]])

    return HoppeTree(1.0, relabel(branch)), HoppeTree(tree.theta, relabel(rest))


# ------------------------------------------------------------ serialization


def dumps(tree: HoppeTree) -> str:
    """Two-line text form: ``"n theta"`` then the parents of ``1..n-1``."""
    parents = " ".join(str(p) for p in tree.parent[1:].tolist())
    return f"{tree.n} {tree.theta!r}\n{parents}\n"


def loads(text: str) -> HoppeTree:
    lines = [ln.strip() for ln in text.splitlines() if not ln.lstrip().startswith("#")]
    if not lines or not lines[0]:
        raise ParameterError("empty tree description")
    head = lines[0].split()
    if len(head) != 2:
        raise ParameterError(f"malformed header {lines[0]!r}")
    n, theta = int(head[0]), float(head[1])
    parents = [int(p) for p in lines[1].split()] if len(lines) > 1 else []
    if len(parents) != n - 1:
        raise ParameterError(f"expected {n - 1} parents, got {len(parents)}")
    return HoppeTree(theta, np.array([ROOT_SENTINEL] + parents))
