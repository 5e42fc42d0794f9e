"""The verification suite: every cross-check of simulation against theory.

Each check returns a :class:`CheckResult`.  ``quick=True`` shrinks sample
sizes but keeps every tolerance.  Check ``k`` draws from seed
``derive_seed(seed, k)``.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

from . import exact, fixpoint, mc, tree as tr
from .kernels import normal
from .pointset import empirical_pair_covariance
from .rng import DEFAULT_SEED, derive_seed, stream


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0
    limit: Optional[float] = None

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        timing = f"{self.seconds:.2f}s" + (f" (limit {self.limit:g}s)" if self.limit else "")
        return f"[{flag}] {self.number:2d} {self.name}  {timing}"

    def to_json(self) -> str:
        return json.dumps(asdict(self), default=float, sort_keys=True)


@dataclass
class Settings:
    seed: int = DEFAULT_SEED
    theta: Optional[float] = None
    quick: bool = False
    threads: int = 1
    pool_size: Optional[int] = None
    generations: int = fixpoint.DEFAULT_GENERATIONS

    def grid(self, default):
        return list(default) if self.theta is None else [float(self.theta)]

    def pick(self, full, quick):
        return quick if self.quick else full


def check_enumeration(s: Settings) -> dict:
    n_max = s.pick(8, 6)
    worst = 0.0
    for theta in s.grid([0.5, 1.0, 2.0, 5.0]):
        for n in range(1, n_max + 1):
            terms = {"T": [], "W": [], "U": []}
            for tree, prob in tr.enumerate_trees(n, theta):
                st = tr.compute_stats(tree)
                terms["T"].append(prob * st.total_length)
                terms["W"].append(prob * st.wiener)
                terms["U"].append(prob * st.u)
            worst = max(
                worst,
                abs(math.fsum(terms["T"]) - exact.expected_T(n, theta)),
                abs(math.fsum(terms["W"]) - exact.expected_W(n, theta)),
                abs(math.fsum(terms["U"]) - exact.expected_U(n, theta)),
            )
    return {"passed": worst <= 1e-10, "max_abs_error": worst, "n_max": n_max}


def check_wiener_oracle(s: Settings) -> dict:
    count = s.pick(1000, 200)
    rng = stream(derive_seed(s.seed, 2))
    thetas = [0.25, 1.0, 4.0]
    mismatches = 0
    for i in range(count):
        n = int(rng.integers(1, 201))
        tree = tr.generate_tree(n, thetas[i % 3], rng)
        if tr.compute_stats(tree).wiener != tr.wiener_bruteforce(tree):
            mismatches += 1
    return {"passed": mismatches == 0, "trees": count, "mismatches": mismatches}


def check_identities(s: Settings) -> dict:
    count = s.pick(10_000, 2_000)
    rng = stream(derive_seed(s.seed, 3))
    thetas = s.grid([0.25, 0.5, 1.0, 2.0, 4.0])
    bad = 0
    for i in range(count):
        n = int(rng.integers(1, 301))
        st = tr.compute_stats(tr.generate_tree(n, thetas[i % len(thetas)], rng))
        if st.u != n * st.total_length - st.wiener:
            bad += 1
        elif st.lca_sum != (n - 1) * st.total_length - st.wiener or st.lca_sum < 0:
            bad += 1
    return {"passed": bad == 0, "trees": count, "violations": bad}


def check_mc_means(s: Settings) -> dict:
    reps = s.pick(100_000, 20_000)
    seed = derive_seed(s.seed, 4)
    out, ok = {}, True
    for theta in s.grid([0.5, 1.0, 4.0]):
        for r in mc.estimate_many(["T", "U", "W"], 100, theta, reps, seed, threads=s.threads):
            out[f"{r.name}@{theta:g}"] = r.z
            ok &= abs(r.z) < 3.0
    return {"passed": ok, "z": out, "replicates": reps}


def _pool_size(s: Settings) -> int:
    return s.pool_size or s.pick(100_000, 20_000)


def _moment_z(m: dict, mean: float, second: float) -> tuple[float, float]:
    return (m["mean"] - mean) / m["mean_se"], (m["second"] - second) / m["second_se"]


def check_u_pool(s: Settings) -> dict:
    rep = fixpoint.replicated_moments("U", 1.0, _pool_size(s), s.generations,
                                      derive_seed(s.seed, 5), replicates=s.pick(20, 10))
    z1, z2 = _moment_z(rep["moments"]["U"], 1.0, 11.0 / 9.0)
    return {"passed": abs(z1) < 3 and abs(z2) < 3, "z_mean": z1, "z_second": z2,
            "pool_size": rep["size"], "generations": rep["generations"],
            "replicates": rep["replicates"]}


def check_u_prime_pool(s: Settings) -> dict:
    out, ok = {}, True
    for theta in s.grid([0.5, 2.0, 4.0]):
        rep = fixpoint.replicated_moments("U_prime", theta, _pool_size(s), s.generations,
                                          derive_seed(s.seed, 6), replicates=s.pick(20, 10))
        lim = exact.limit_moments_u(theta)
        z1, z2 = _moment_z(rep["moments"]["U"], lim.u_mean, lim.u_second)
        out[f"{theta:g}"] = {"z_mean": z1, "z_second": z2}
        ok &= abs(z1) < 3 and abs(z2) < 3
    return {"passed": ok, "z": out, "pool_size": _pool_size(s)}


def check_mixing_variance(s: Settings) -> dict:
    n = s.pick(10_000, 2_000)
    reps = s.pick(10_000, 2_000)
    out, ok = {}, True
    for theta in s.grid([1.0, 4.0]):
        mean_r, var_r = mc.mixed_normal_variance_report(
            n, theta, 1.0, reps, derive_seed(s.seed, 7), threads=s.threads)
        good = mean_r.passes(3.0, rel=0.05) and var_r.passes(3.0, rel=0.10)
        out[f"{theta:g}"] = {
            "mean": mean_r.estimate, "mean_target": mean_r.target, "mean_se": mean_r.stderr,
            "variance": var_r.estimate, "variance_target": var_r.target, "variance_se": var_r.stderr,
        }
        ok &= good
    return {"passed": ok, "n": n, "replicates": reps, "results": out}


def check_decomposition(s: Settings) -> dict:
    """Passes on the ``K^2`` identity; the printed ``+ 2K(n-K)`` variant is reported only."""
    reps = s.pick(100_000, 20_000)
    out, ok = {}, True
    for theta in s.grid([1.0, 3.0]):
        seed = derive_seed(s.seed, 8)
        rep = fixpoint.subtree_decomposition_check(50, theta, reps, seed)
        printed = fixpoint.subtree_decomposition_check(50, theta, reps, seed, cross_term=True)
        out[f"{theta:g}"] = {"z_first": rep.z_first, "z_second": rep.z_second,
                             "printed_z_first": printed.z_first,
                             "printed_z_second": printed.z_second}
        ok &= rep.ok
    return {"passed": ok, "z": out, "replicates": reps, "identity": "U_K + U'_(n-K) + K^2"}


def check_contraction(s: Settings) -> dict:
    out, ok = {}, True
    for theta in s.grid([0.1, 0.5, 1.0, 2.0, 10.0, 100.0]):
        cert = fixpoint.contraction_check(theta)
        out[f"{theta:g}"] = {"expected_lambda": cert.expected_lambda, "bound": cert.bound}
        ok &= cert.contracts
    at_one = fixpoint.contraction_bound(1.0)
    ok &= abs(at_one - 0.45) <= 1e-12
    return {"passed": ok, "certificates": out, "bound_at_1": at_one}


def check_conditional_normality(s: Settings) -> dict:
    trees = s.pick(100, 20)
    resamples = s.pick(10_000, 2_000)
    theta = s.theta if s.theta is not None else 1.0
    results = mc.conditional_normality(trees, 200, theta, resamples, derive_seed(s.seed, 10))
    passes = sum(r.passed for r in results)
    return {"passed": passes >= math.ceil(0.95 * trees), "trees": trees, "passes": passes,
            "resamples": resamples}


def check_covariance(s: Settings) -> dict:
    reps = s.pick(100_000, 20_000)
    theta = s.theta if s.theta is not None else 1.0
    cov = empirical_pair_covariance(1, 2, 3, theta, normal(1.0), reps, derive_seed(s.seed, 11))
    return {"passed": abs(cov.z) < 3.0, "estimate": cov.estimate, "target": cov.exact,
            "stderr": cov.stderr, "z": cov.z}


CHECKS: list[tuple[int, str, Callable[[Settings], dict], float]] = [
    (1, "exact enumeration vs closed forms", check_enumeration, 10),
    (2, "O(n) Wiener index vs quadratic oracle", check_wiener_oracle, 5),
    (3, "U = nT - W and 2R = (n-1)T - W", check_identities, 5),
    (4, "Monte Carlo E T, E U, E W at n=100", check_mc_means, 60),
    (5, "U pool moments 1 and 11/9", check_u_pool, 120),
    (6, "U' pool moments", check_u_prime_pool, 180),
    (7, "mixing variance at large n", check_mixing_variance, 600),
    (8, "first-branch decomposition of U'_n", check_decomposition, 60),
    (9, "contraction certificate", check_contraction, 1),
    (10, "conditional normality of the barycenter", check_conditional_normality, 120),
    (11, "Cov(X_1, X_2) = sigma^2 / 2", check_covariance, 10),
]


def run_check(number: int, settings: Settings) -> CheckResult:
    for num, name, fn, limit in CHECKS:
        if num == number:
            t0 = time.perf_counter()
            detail = fn(settings)
            seconds = time.perf_counter() - t0
            passed = bool(detail.pop("passed"))
            return CheckResult(num, name, passed, detail, seconds, limit)
    raise KeyError(number)


def run_all(settings: Settings, only=None, echo: Optional[Callable[[CheckResult], None]] = None):
    results = []
    for num, *_ in CHECKS:
        if only and num not in only:
            continue
        res = run_check(num, settings)
        if echo:
            echo(res)
        results.append(res)
    return results

