"""Monte Carlo experiments against the closed forms.

Replicate ``i`` of an experiment with master seed ``s`` draws everything
from the stream ``(s, i)``: first ``n - 1`` uniforms for the tree, then the
``n - 1`` jumps if a kernel is involved.  Replicates are processed in
fixed-size chunks whose accumulators are merged in chunk order, so a report
is bit-identical for any number of worker threads.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import ndtr

from . import exact
from .errors import ParameterError
from .kernels import JumpKernel, normal
from .pointset import barycenter_resamples
from .rng import replicate_rng, stream
from .running import RunningStats
from .tree import batch_stats, generate_tree, compute_stats, parents_from_uniforms

# cells (replicates x vertices) handled per chunk
CHUNK_CELLS = 1_000_000
MAX_CHUNK = 8192


@dataclass
class ExperimentReport:
    name: str
    estimate: float
    stderr: float
    target: Optional[float]
    z: Optional[float]
    replicates: int
    seed: int
    wall_time: float
    n: Optional[int] = None
    theta: Optional[float] = None

    def passes(self, z_max: float = 3.0, rel: float = 0.0) -> bool:
        """``|estimate - target| <= rel * |target| + z_max * stderr``."""
        if self.target is None:
            return True
        return abs(self.estimate - self.target) <= rel * abs(self.target) + z_max * self.stderr

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _z(estimate, stderr, target):
    if target is None:
        return None
    if stderr == 0:
        return 0.0 if estimate == target else math.copysign(math.inf, estimate - target)
    return (estimate - target) / stderr


# -------------------------------------------------------------- statistics


@dataclass(frozen=True)
class Statistic:
    values: Callable
    target: Callable
    needs_kernel: bool = False
    centered_only: bool = False


def _s_target(n, theta, kernel):
    return kernel.mean_shift * exact.expected_T(n, theta) / n


STATISTICS = {
    "T": Statistic(lambda c, n: c["T"], lambda n, th, k: exact.expected_T(n, th)),
    "W": Statistic(lambda c, n: c["W"], lambda n, th, k: exact.expected_W(n, th)),
    "U": Statistic(lambda c, n: c["U"], lambda n, th, k: exact.expected_U(n, th)),
    "R2": Statistic(lambda c, n: c["R2"], lambda n, th, k: 2.0 * exact.expected_R(n, th)),
    "U/n2": Statistic(lambda c, n: c["U"] / float(n) ** 2,
                      lambda n, th, k: exact.expected_U(n, th) / float(n) ** 2),
    "depth": Statistic(lambda c, n: c["depth"],
                       lambda n, th, k: exact.expected_lca_depth(n - 1, n - 1, th)),
    "S": Statistic(lambda c, n: c["S"], _s_target, needs_kernel=True),
    "S2": Statistic(lambda c, n: c["S"] ** 2,
                    lambda n, th, k: k.variance * exact.expected_U(n, th) / float(n) ** 2,
                    needs_kernel=True, centered_only=True),
}
ALIASES = {"U/n²": "U/n2", "U/n^2": "U/n2", "S_n variance": "S2", "S^2": "S2",
           "2R": "R2", "S_n": "S"}


def resolve_statistic(name: str) -> str:
    key = ALIASES.get(name, name)
    if key not in STATISTICS:
        raise ParameterError(f"unknown statistic {name!r}; known: {sorted(STATISTICS)}")
    return key


def simulate_chunk(n: int, theta: float, seed: int, start: int, stop: int,
                   kernel: Optional[JumpKernel] = None) -> dict:
    """Raw per-replicate statistics for replicates ``start..stop-1``."""
    b = stop - start
    u = np.empty((b, n - 1))
    y = np.empty((b, n - 1)) if kernel is not None else None
    for row, i in enumerate(range(start, stop)):
        rng = replicate_rng(seed, i)
        u[row] = rng.random(n - 1)
        if kernel is not None:
            y[row] = kernel.sample(rng, n - 1)
    st = batch_stats(parents_from_uniforms(u, theta))
    out = {
        "T": st.total_length.astype(float),
        "W": st.wiener.astype(float),
        "U": st.u.astype(float),
        "R2": st.lca_sum.astype(float),
        "depth": st.depths[:, -1].astype(float),
    }
    if kernel is not None:
        out["S"] = (y * st.subtree_sizes[:, 1:]).sum(axis=1) / n
    return out


def _chunks(n: int, replicates: int):
    size = max(1, min(MAX_CHUNK, CHUNK_CELLS // max(n, 1)))
    return [(s, min(s + size, replicates)) for s in range(0, replicates, size)]


def run_replicates(n: int, theta: float, replicates: int, seed: int, keys,
                   kernel: Optional[JumpKernel] = None, threads: int = 1) -> dict:
    """Stream replicates and accumulate the named statistics."""
    keys = [resolve_statistic(k) for k in keys]

    def work(span):
        raw = simulate_chunk(n, theta, seed, span[0], span[1], kernel)
        return [RunningStats().update(STATISTICS[k].values(raw, n)) for k in keys]

    acc = [RunningStats() for _ in keys]
    spans = _chunks(n, replicates)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = pool.map(work, spans)
            for part in results:
                acc = [a.merge(p) for a, p in zip(acc, part)]
    else:
        for span in spans:
            acc = [a.merge(p) for a, p in zip(acc, work(span))]
    return dict(zip(keys, acc))


def estimate_many(statistics, n: int, theta: float, replicates: int, seed: int,
                  kernel: Optional[JumpKernel] = None, threads: int = 1) -> list[ExperimentReport]:
    """One report per statistic, all computed from the same replicates."""
    if replicates < 2:
        raise ParameterError("need at least 2 replicates")
    if n < 1:
        raise ParameterError("n must be >= 1")
    if not theta > 0:
        raise ParameterError("theta must be positive")
    keys = [resolve_statistic(s) for s in statistics]
    for key in keys:
        stat = STATISTICS[key]
        if stat.needs_kernel and kernel is None:
            raise ParameterError(f"statistic {key!r} needs a jump kernel")
        if stat.centered_only and not kernel.centered:
            raise ParameterError(f"statistic {key!r} needs a centered kernel")
    t0 = time.perf_counter()
    acc = run_replicates(n, theta, replicates, seed, keys, kernel, threads)
    wall = time.perf_counter() - t0
    reports = []
    for name, key in zip(statistics, keys):
        st = acc[key]
        target = STATISTICS[key].target(n, theta, kernel)
        reports.append(ExperimentReport(
            name=name, estimate=st.mean, stderr=st.stderr, target=target,
            z=_z(st.mean, st.stderr, target), replicates=replicates, seed=seed,
            wall_time=wall, n=n, theta=theta,
        ))
    return reports


def estimate(statistic: str, n: int, theta: float, replicates: int, seed: int,
             kernel: Optional[JumpKernel] = None, threads: int = 1) -> ExperimentReport:
    return estimate_many([statistic], n, theta, replicates, seed, kernel, threads)[0]


# ------------------------------------------------------- Kolmogorov-Smirnov


@dataclass(frozen=True)
class KSResult:
    statistic: float
    critical: float
    alpha: float
    count: int

    @property
    def passed(self) -> bool:
        return self.statistic <= self.critical


def kolmogorov_critical(count: int, alpha: float = 0.01) -> float:
    """Asymptotic one-sample critical value ``sqrt(-log(alpha/2) / 2) / sqrt(count)``."""
    return math.sqrt(-0.5 * math.log(alpha / 2.0)) / math.sqrt(count)


def ks_normal(samples, variance: float, alpha: float = 0.01) -> KSResult:
    """One-sample KS test of ``samples`` against N(0, variance)."""
    if not variance > 0:
        raise ParameterError(f"variance must be positive, got {variance}")
    x = np.sort(np.asarray(samples, dtype=float))
    m = x.size
    if m < 100:
        raise ParameterError(f"KS test needs at least 100 samples, got {m}")
    cdf = ndtr(x / math.sqrt(variance))
    i = np.arange(1, m + 1)
    d = max(float(np.max(i / m - cdf)), float(np.max(cdf - (i - 1) / m)))
    return KSResult(statistic=d, critical=kolmogorov_critical(m, alpha), alpha=alpha, count=m)


def conditional_normality(trees: int, n: int, theta: float, resamples: int, seed: int,
                          sigma2: float = 1.0, alpha: float = 0.01) -> list[KSResult]:
    """KS test of barycenter resamples on each of ``trees`` fixture trees.

    Fixture tree ``i`` comes from stream ``(seed, i, 0)`` and its jump
    resamples from ``(seed, i, 1)``.
    """
    kernel = normal(sigma2)
    out = []
    for i in range(trees):
        tree = generate_tree(n, theta, stream(seed, i, 0))
        target = sigma2 * compute_stats(tree).u / n**2
        s = barycenter_resamples(tree, kernel, resamples, stream(seed, i, 1))
        out.append(ks_normal(s, target, alpha))
    return out


# ---------------------------------------------------- mixing variance law


def mixed_normal_variance_report(n: int, theta: float, sigma2: float = 1.0,
                                 replicates: int = 10_000, seed: int = 0,
                                 threads: int = 1) -> tuple[ExperimentReport, ExperimentReport]:
    """Mean and variance of the conditional barycenter variance ``sigma2 U'_n / n^2``.

    Targets are the limit-law values ``sigma2 * 2/(1+theta)`` and
    ``sigma2^2 * (28 theta + 4) / (3 (1+theta)^2 (2+theta)(3+theta))``.
    """
    if not sigma2 > 0:
        raise ParameterError("sigma2 must be positive")
    t0 = time.perf_counter()
    st = run_replicates(n, theta, replicates, seed, ["U/n2"], threads=threads)["U/n2"]
    wall = time.perf_counter() - t0
    lim = exact.limit_moments_u(theta)
    mean_t = sigma2 * lim.u_mean
    var_t = sigma2**2 * lim.u_variance
    mean_est, mean_se = sigma2 * st.mean, sigma2 * st.stderr
    var_est, var_se = sigma2**2 * st.variance, sigma2**2 * st.variance_stderr
    common = dict(replicates=replicates, seed=seed, wall_time=wall, n=n, theta=theta)
    return (
        ExperimentReport("mixing variance mean", mean_est, mean_se, mean_t,
                         _z(mean_est, mean_se, mean_t), **common),
        ExperimentReport("mixing variance variance", var_est, var_se, var_t,
                         _z(var_est, var_se, var_t), **common),
    )
