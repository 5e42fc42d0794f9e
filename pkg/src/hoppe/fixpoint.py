"""Limit laws of U_n / n^2 and of the standardized (W_n, T_n) by pool iteration.

A pool is a large sample that stands in for a distribution.  One
generation pushes every slot through the random affine map once, drawing
the map's inputs with replacement from the previous pool (or from a frozen
pool for the inhomogeneous Hoppe maps).  Iterating converges geometrically
because the maps contract in L2; :func:`contraction_check` certifies that.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import exact
from .errors import FixpointError, ParameterError
from .rng import derive_seed, replicate_rng, stream
from .running import RunningStats
from .tree import batch_stats, parents_from_uniforms

KINDS = ("U", "U_prime", "WT", "WT_prime")
DEFAULT_POOL_SIZE = 100_000
DEFAULT_GENERATIONS = 40
# a frozen pool must have been iterated at least this often before use
MIN_FROZEN_GENERATIONS = 20


# ----------------------------------------------------------- scalar helpers


def esig(v):
    """``v log v + (1-v) log(1-v)`` with the limits 0 at both endpoints."""
    arr = np.asarray(v, dtype=float)
    if np.any((arr < 0) | (arr > 1)) or np.any(np.isnan(arr)):
        raise ParameterError("esig is defined on [0, 1]")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(arr > 0, arr * np.log(np.where(arr > 0, arr, 1.0)), 0.0)
        w = 1.0 - arr
        out = out + np.where(w > 0, w * np.log(np.where(w > 0, w, 1.0)), 0.0)
    return float(out) if out.ndim == 0 else out


def beta_1_theta_quantile(u, theta: float):
    """Inverse CDF of Beta(1, theta): ``1 - (1-u)^(1/theta)``."""
    return -np.expm1(np.log1p(-np.asarray(u, dtype=float)) / theta)


def sample_beta_1_theta(theta: float, rng: np.random.Generator, size=None):
    if not theta > 0:
        raise ParameterError(f"theta must be positive, got {theta}")
    v = beta_1_theta_quantile(rng.random(size), theta)
    return float(v) if size is None else v


def adaptive_trapezoid(f, a: float, b: float, tol: float = 1e-12,
                       min_nodes: int = 10_001, max_depth: int = 60) -> float:
    """Integrate a vectorized ``f`` over ``[a, b]``.

    Starts from ``min_nodes`` equispaced nodes and bisects every panel whose
    trapezoid value moves by more than its share of ``tol`` when halved.
    ``f`` must return finite values at the endpoints (pass the limits for
    removable singularities).
    """
    x = np.linspace(a, b, min_nodes)
    left, right = x[:-1], x[1:]
    fl, fr = f(left), f(right)
    total = 0.0
    width_all = b - a
    for _ in range(max_depth):
        mid = 0.5 * (left + right)
        fm = f(mid)
        h = right - left
        coarse = 0.5 * h * (fl + fr)
        fine = 0.25 * h * (fl + 2.0 * fm + fr)
        done = np.abs(fine - coarse) <= 3.0 * tol * h / width_all
        total += math.fsum(fine[done])
        keep = ~done
        if not keep.any():
            return total
        left, mid, right = left[keep], mid[keep], right[keep]
        fl, fm, fr = fl[keep], fm[keep], fr[keep]
        left = np.concatenate([left, mid])
        right = np.concatenate([mid, right])
        fl, fr = np.concatenate([fl, fm]), np.concatenate([fm, fr])
    return total + math.fsum(0.5 * (right - left) * (fl + fr))


def beta_expectation(g, theta: float, **kw) -> float:
    """E g(V) for V ~ Beta(1, theta); needs theta >= 1 for a bounded density."""
    if theta < 1:
        raise ParameterError("density is unbounded at 1 for theta < 1; fold it into g instead")
    return adaptive_trapezoid(lambda v: g(v) * theta * (1.0 - v) ** (theta - 1.0), 0.0, 1.0, **kw)


# ------------------------------------------------------------ inhomogeneities


def rrt_inhomogeneity(v: np.ndarray) -> np.ndarray:
    """``(3V(1-V) + Esig(V), V + Esig(V))`` stacked as columns."""
    e = esig(v)
    return np.stack([3.0 * v * (1.0 - v) + e, v + e], axis=-1)


def hoppe_inhomogeneity(v: np.ndarray, theta: float) -> np.ndarray:
    e = esig(v)
    shift = (exact.digamma(theta + 1.0) - exact.digamma(2.0)) * v
    coef = (theta + 5.0) / (theta + 1.0) - (2.0 * theta + 4.0) / (theta + 1.0) * v
    return np.stack([coef * v + e + shift, v + e + shift], axis=-1)


def _apply_a(v, wt):
    """A*(V) = [[(1-V)^2, V(1-V)], [0, 1-V]] applied row-wise."""
    w, t = wt[:, 0], wt[:, 1]
    q = 1.0 - v
    return np.stack([q * q * w + v * q * t, q * t], axis=-1)


def _apply_b(v, wt):
    """B*(V) = [[V^2, V(1-V)], [0, V]] applied row-wise."""
    w, t = wt[:, 0], wt[:, 1]
    return np.stack([v * v * w + v * (1.0 - v) * t, v * t], axis=-1)


# ------------------------------------------------------------------- pools


@dataclass
class FixpointPool:
    kind: str
    theta: float
    samples: np.ndarray
    generation: int = 0
    history: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown pool kind {self.kind!r}")
        if not self.theta > 0:
            raise ParameterError("theta must be positive")
        if self.kind in ("U", "WT") and self.theta != 1.0:
            raise ParameterError(f"{self.kind} pools describe the random recursive tree (theta = 1)")
        expected_ndim = 1 if self.kind in ("U", "U_prime") else 2
        if self.samples.ndim != expected_ndim:
            raise ParameterError(f"{self.kind} pool needs {expected_ndim}-d samples")

    @property
    def size(self) -> int:
        return int(self.samples.shape[0])

    def moments(self) -> dict:
        """Means and raw second moments, with standard errors from the pool spread."""
        cols = self.samples[:, None] if self.samples.ndim == 1 else self.samples
        names = ("U",) if self.samples.ndim == 1 else ("W", "T")
        out = {}
        for name, col in zip(names, cols.T):
            first = RunningStats().update(col)
            second = RunningStats().update(col * col)
            out[name] = {
                "mean": first.mean, "mean_se": first.stderr,
                "second": second.mean, "second_se": second.stderr,
                "variance": first.variance,
            }
        return out

    def report(self) -> dict:
        return {"kind": self.kind, "theta": self.theta, "size": self.size,
                "generation": self.generation, "moments": self.moments()}

    def to_json(self) -> str:
        return json.dumps(self.report())

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        if self.samples.ndim == 1:
            writer.writerow([self.kind])
            writer.writerows([repr(float(x))] for x in self.samples)
        else:
            writer.writerow(["W", "T"])
            writer.writerows([repr(float(w)), repr(float(t))] for w, t in self.samples)
        return buf.getvalue()


def new_pool(kind: str, theta: float = 1.0, size: int = DEFAULT_POOL_SIZE) -> FixpointPool:
    """Start pool: the known mean for scalar kinds, zeros for the centered 2-d kinds."""
    if size < 1:
        raise ParameterError("pool size must be positive")
    if kind == "U":
        samples = np.ones(size)
    elif kind == "U_prime":
        samples = np.full(size, 2.0 / (1.0 + theta))
    elif kind in ("WT", "WT_prime"):
        samples = np.zeros((size, 2))
    else:
        raise ParameterError(f"unknown pool kind {kind!r}")
    return FixpointPool(kind, float(theta), samples)


def _require(pool: FixpointPool, kind: str) -> None:
    if pool.kind != kind:
        raise ParameterError(f"expected a {kind} pool, got {pool.kind}")


def _require_frozen(pool, kind: str) -> None:
    if pool is None:
        raise FixpointError(f"a converged {kind} pool is required")
    _require(pool, kind)
    if pool.generation < MIN_FROZEN_GENERATIONS:
        raise FixpointError(
            f"{kind} pool has only {pool.generation} generations; "
            f"iterate it at least {MIN_FROZEN_GENERATIONS} times first"
        )


def _advance(pool: FixpointPool, samples: np.ndarray) -> FixpointPool:
    return FixpointPool(pool.kind, pool.theta, samples, pool.generation + 1, pool.history)


def _draw(rng, size, count):
    return rng.integers(0, size, count)


def iterate_u(pool: FixpointPool, steps: int, rng: np.random.Generator) -> FixpointPool:
    """``U <- V^2 U* + (1-V)^2 U + V^2`` with V uniform and U, U* from the pool."""
    _require(pool, "U")
    for _ in range(steps):
        s = pool.samples
        n = s.size
        v = rng.random(n)
        u_star = s[_draw(rng, s.size, n)]
        u = s[_draw(rng, s.size, n)]
        pool = _advance(pool, v * v * u_star + (1.0 - v) ** 2 * u + v * v)
    return pool


def iterate_u_prime(pool: FixpointPool, u_pool: FixpointPool, steps: int,
                    rng: np.random.Generator) -> FixpointPool:
    """``U' <- (1-V)^2 U' + V^2 U + V^2`` with V ~ Beta(1, theta) and U frozen."""
    _require(pool, "U_prime")
    _require_frozen(u_pool, "U")
    frozen = u_pool.samples
    for _ in range(steps):
        s = pool.samples
        n = s.size
        v = sample_beta_1_theta(pool.theta, rng, n)
        up = s[_draw(rng, s.size, n)]
        u = frozen[_draw(rng, frozen.size, n)]
        pool = _advance(pool, (1.0 - v) ** 2 * up + v * v * u + v * v)
    return pool


def iterate_wt(pool: FixpointPool, steps: int, rng: np.random.Generator) -> FixpointPool:
    """Random recursive tree map ``A*(V) X* + B*(V) X + b*(V)``, V uniform."""
    _require(pool, "WT")
    for _ in range(steps):
        s = pool.samples
        n = s.shape[0]
        v = rng.random(n)
        star = s[_draw(rng, n, n)]
        other = s[_draw(rng, n, n)]
        pool = _advance(pool, _apply_a(v, star) + _apply_b(v, other) + rrt_inhomogeneity(v))
    return pool


def iterate_wt_prime(pool: FixpointPool, wt_pool: FixpointPool, steps: int,
                     rng: np.random.Generator) -> FixpointPool:
    """Hoppe map ``A*(V) X' + B*(V) X + b*(V; theta)`` with X from a frozen WT pool."""
    _require(pool, "WT_prime")
    _require_frozen(wt_pool, "WT")
    frozen = wt_pool.samples
    theta = pool.theta
    for _ in range(steps):
        s = pool.samples
        n = s.shape[0]
        v = sample_beta_1_theta(theta, rng, n)
        prev = s[_draw(rng, n, n)]
        rrt = frozen[_draw(rng, frozen.shape[0], n)]
        pool = _advance(pool, _apply_a(v, prev) + _apply_b(v, rrt) + hoppe_inhomogeneity(v, theta))
    return pool


def project_u(pool: FixpointPool) -> FixpointPool:
    """Map a (W, T) pool to ``T - W + E U'``, the limit of U_n / n^2."""
    if pool.kind not in ("WT", "WT_prime"):
        raise ParameterError("projection needs a 2-d pool")
    offset = 2.0 / (1.0 + pool.theta)
    kind = "U" if pool.kind == "WT" else "U_prime"
    values = pool.samples[:, 1] - pool.samples[:, 0] + offset
    return FixpointPool(kind, pool.theta, values, pool.generation)


def solve(kind: str, theta: float = 1.0, size: int = DEFAULT_POOL_SIZE,
          generations: int = DEFAULT_GENERATIONS, seed: int = 0,
          track: bool = False) -> FixpointPool:
    """Build a converged pool, including the frozen pool the Hoppe maps need.

    Each generation of each pool draws from its own stream keyed by
    ``(seed, pool label, generation)``.
    """
    labels = {"U": 0, "U_prime": 1, "WT": 2, "WT_prime": 3}

    def run(k, th, step, frozen=None):
        pool = new_pool(k, th, size)
        for g in range(generations):
            rng = stream(seed, labels[k], g)
            pool = step(pool, frozen, rng)
            if track:
                pool.history.append(pool.moments())
        return pool

    if kind == "U":
        return run("U", 1.0, lambda p, _, r: iterate_u(p, 1, r))
    if kind == "WT":
        return run("WT", 1.0, lambda p, _, r: iterate_wt(p, 1, r))
    if kind == "U_prime":
        base = solve("U", 1.0, size, generations, seed)
        return run("U_prime", theta, lambda p, f, r: iterate_u_prime(p, f, 1, r), base)
    if kind == "WT_prime":
        base = solve("WT", 1.0, size, generations, seed)
        return run("WT_prime", theta, lambda p, f, r: iterate_wt_prime(p, f, 1, r), base)
    raise ParameterError(f"unknown pool kind {kind!r}")


def replicated_moments(kind: str, theta: float = 1.0, size: int = DEFAULT_POOL_SIZE,
                       generations: int = DEFAULT_GENERATIONS, seed: int = 0,
                       replicates: int = 20) -> dict:
    """Pool moments with standard errors from independent replicate pools.

    The within-pool standard error understates the spread of a pool mean:
    resampling with replacement correlates slots across generations.
    Replicate ``r`` is solved from ``derive_seed(seed, r)`` (its own frozen
    pool included); the estimate is the average over replicates and the
    standard error comes from their scatter.
    """
    if replicates < 2:
        raise ParameterError("need at least 2 replicate pools")
    per = {}
    for r in range(replicates):
        pool = solve(kind, theta, size, generations, derive_seed(seed, r))
        for name, m in pool.moments().items():
            per.setdefault(name, {"mean": [], "second": []})
            per[name]["mean"].append(m["mean"])
            per[name]["second"].append(m["second"])
    out = {}
    for name, cols in per.items():
        first = RunningStats().update(cols["mean"])
        second = RunningStats().update(cols["second"])
        out[name] = {"mean": first.mean, "mean_se": first.stderr,
                     "second": second.mean, "second_se": second.stderr,
                     "variance": second.mean - first.mean ** 2}
    return {"kind": kind, "theta": float(theta), "size": size, "generations": generations,
            "replicates": replicates, "seed": seed, "moments": out}


# --------------------------------------------------------------- contraction


def contraction_eigenvalue(v):
    """Largest eigenvalue of ``A*(V)^T A*(V)``."""
    v = np.asarray(v, dtype=float)
    q = 1.0 - v
    return q * q * (1.0 + v * v - v * (1.0 - np.sqrt(q * q + 1.0)))


def contraction_bound(theta: float) -> float:
    t = float(theta)
    return t / (2.0 + t) * (1.0 + 1.0 / (3.0 + t) + 2.0 / ((4.0 + t) * (3.0 + t)))


@dataclass(frozen=True)
class ContractionCertificate:
    theta: float
    expected_lambda: float
    bound: float
    slack: float = 1e-6

    @property
    def contracts(self) -> bool:
        return self.expected_lambda <= self.bound + self.slack and self.bound < 1.0


def contraction_check(theta: float, min_nodes: int = 10_001) -> ContractionCertificate:
    """E[lambda(V)] for V ~ Beta(1, theta) by quadrature, next to its closed-form bound."""
    if not theta > 0:
        raise ParameterError(f"theta must be positive, got {theta}")
    t = float(theta)

    def integrand(v):
        q = 1.0 - v
        # lambda(v) carries (1-v)^2; merging it with the density keeps theta < 1 finite
        return t * q ** (t + 1.0) * (1.0 + v * v - v * (1.0 - np.sqrt(q * q + 1.0)))

    value = adaptive_trapezoid(integrand, 0.0, 1.0, tol=1e-9, min_nodes=min_nodes)
    return ContractionCertificate(theta=t, expected_lambda=value, bound=contraction_bound(t))


# ------------------------------------------------------ branch decomposition


@dataclass(frozen=True)
class DecompositionReport:
    n: int
    theta: float
    replicates: int
    seed: int
    cross_term: bool
    whole: dict
    split: dict
    z_first: float
    z_second: float
    exact_mean: float

    @property
    def ok(self) -> bool:
        return abs(self.z_first) < 3.0 and abs(self.z_second) < 3.0

    def as_dict(self) -> dict:
        out = dict(self.__dict__)
        out["ok"] = self.ok
        return out


def _z(a: RunningStats, b: RunningStats) -> float:
    se = math.hypot(a.stderr, b.stderr)
    if se == 0:
        return 0.0 if a.mean == b.mean else math.inf
    return (a.mean - b.mean) / se


def subtree_decomposition_check(n: int, theta: float, replicates: int, seed: int,
                                cross_term: bool = False, chunk: int = 4096) -> DecompositionReport:
    """Compare U'_n of whole Hoppe trees with the law of its first-branch split.

    Right-hand side per replicate: K from its exact law, U_K from an
    independent recursive tree on K vertices, U'_{n-K} from an independent
    Hoppe tree, plus ``K^2``.  With ``cross_term=True`` the extra summand
    ``2K(n-K)`` is added as well.  First and second moments of both sides
    are compared by two-sample z-scores.
    """
    if n < 2:
        raise ParameterError("decomposition needs n >= 2")
    if replicates < 2:
        raise ParameterError("need at least 2 replicates")
    cdf = exact.k_cdf(n, theta)
    whole1, whole2 = RunningStats(), RunningStats()
    split1, split2 = RunningStats(), RunningStats()
    for start in range(0, replicates, chunk):
        stop = min(start + chunk, replicates)
        b = stop - start
        u_whole = np.empty((b, n - 1))
        u_branch = np.empty((b, n - 1))
        u_rest = np.empty((b, n - 1))
        k = np.empty(b, dtype=np.int64)
        for row, i in enumerate(range(start, stop)):
            rng = replicate_rng(seed, i)
            u_whole[row] = rng.random(n - 1)
            k[row] = exact.k_sample(n, theta, rng, cdf=cdf)
            u_branch[row] = rng.random(n - 1)
            u_rest[row] = rng.random(n - 1)
        lhs = batch_stats(parents_from_uniforms(u_whole, theta)).u.astype(float)
        branch = batch_stats(parents_from_uniforms(u_branch, 1.0), sizes=k).u
        rest = batch_stats(parents_from_uniforms(u_rest, theta), sizes=n - k).u
        rhs = branch + rest + k * k
        if cross_term:
            rhs = rhs + 2 * k * (n - k)
        rhs = rhs.astype(float)
        whole1.update(lhs)
        whole2.update(lhs * lhs)
        split1.update(rhs)
        split2.update(rhs * rhs)

    def summary(first, second):
        return {"mean": first.mean, "mean_se": first.stderr,
                "second": second.mean, "second_se": second.stderr}

    return DecompositionReport(
        n=n, theta=float(theta), replicates=replicates, seed=seed, cross_term=cross_term,
        whole=summary(whole1, whole2), split=summary(split1, split2),
        z_first=_z(whole1, split1), z_second=_z(whole2, split2),
        exact_mean=exact.expected_U(n, theta),
    )
