"""Acceptance criteria 1-11 at full scale.

Each test records a ``PASS``/``FAIL`` line (shown in the terminal summary
and printed) and then asserts the criterion, runtime limit included.
Criterion 8 is run exactly as stated and is expected to fail: the printed
decomposition carries a ``2K(n-K)`` summand that the tree does not have.
The identity the tree does satisfy is checked right after it.
"""

import math
import time

import pytest

from conftest import ACCEPTANCE_LINES
from hoppe import exact, fixpoint, mc, tree as tr
from hoppe.kernels import normal
from hoppe.pointset import empirical_pair_covariance
from hoppe.rng import derive_seed, stream

SEED = 20240611


def record(key, title, passed, seconds, limit, detail):
    line = f"criterion {key:>3}: {'PASS' if passed else 'FAIL'}  {title}  [{seconds:.1f}s / {limit:g}s]  {detail}"
    text = str(key)
    digits = text.rstrip("abcdefghijklmnopqrstuvwxyz")
    ACCEPTANCE_LINES[(int(digits), text[len(digits):])] = line
    print(line)
    return passed and seconds < limit


def test_criterion_01_enumeration():
    t0 = time.perf_counter()
    worst = 0.0
    for theta in (0.5, 1.0, 2.0, 5.0):
        for n in range(1, 9):
            acc = {"T": [], "W": [], "U": []}
            for tree, p in tr.enumerate_trees(n, theta):
                s = tr.compute_stats(tree)
                acc["T"].append(p * s.total_length)
                acc["W"].append(p * s.wiener)
                acc["U"].append(p * s.u)
            worst = max(worst,
                        abs(math.fsum(acc["T"]) - exact.expected_T(n, theta)),
                        abs(math.fsum(acc["W"]) - exact.expected_W(n, theta)),
                        abs(math.fsum(acc["U"]) - exact.expected_U(n, theta)))
    dt = time.perf_counter() - t0
    assert record(1, "enumeration vs closed forms", worst <= 1e-10, dt, 10, f"max |err| = {worst:.2e}")


def test_criterion_02_wiener_oracle():
    t0 = time.perf_counter()
    rng = stream(derive_seed(SEED, 2))
    bad = 0
    for i in range(1000):
        tree = tr.generate_tree(int(rng.integers(1, 201)), (0.25, 1.0, 4.0)[i % 3], rng)
        bad += tr.compute_stats(tree).wiener != tr.wiener_bruteforce(tree)
    dt = time.perf_counter() - t0
    assert record(2, "O(n) Wiener == O(n^2) oracle", bad == 0, dt, 5, f"{bad} mismatches in 1000 trees")


def test_criterion_03_identities():
    t0 = time.perf_counter()
    rng = stream(derive_seed(SEED, 3))
    bad = 0
    for i in range(10_000):
        n = int(rng.integers(1, 301))
        s = tr.compute_stats(tr.generate_tree(n, (0.25, 0.5, 1.0, 2.0, 4.0)[i % 5], rng))
        bad += s.u != n * s.total_length - s.wiener
        bad += s.lca_sum != (n - 1) * s.total_length - s.wiener
    dt = time.perf_counter() - t0
    assert record(3, "U = nT - W, 2R = (n-1)T - W", bad == 0, dt, 5, f"{bad} violations in 10^4 trees")


def test_criterion_04_mc_means():
    t0 = time.perf_counter()
    zs = {}
    for theta in (0.5, 1.0, 4.0):
        for r in mc.estimate_many(["T", "U", "W"], 100, theta, 100_000, derive_seed(SEED, 4)):
            zs[f"{r.name}@{theta:g}"] = r.z
    dt = time.perf_counter() - t0
    worst = max(abs(z) for z in zs.values())
    assert record(4, "MC E T, E U, E W at n=100", worst < 3, dt, 60, f"max |z| = {worst:.2f}")


def test_criterion_05_u_pool():
    t0 = time.perf_counter()
    rep = fixpoint.replicated_moments("U", 1.0, 100_000, 40, derive_seed(SEED, 5), replicates=20)
    m = rep["moments"]["U"]
    z1 = (m["mean"] - 1.0) / m["mean_se"]
    z2 = (m["second"] - 11 / 9) / m["second_se"]
    dt = time.perf_counter() - t0
    ok = abs(z1) < 3 and abs(z2) < 3
    assert record(5, "U pool: 1 and 11/9", ok, dt, 120, f"z_mean = {z1:.2f}, z_second = {z2:.2f}")


def test_criterion_06_u_prime_pool():
    t0 = time.perf_counter()
    parts, ok = [], True
    for theta in (0.5, 2.0, 4.0):
        rep = fixpoint.replicated_moments("U_prime", theta, 100_000, 40, derive_seed(SEED, 6), replicates=20)
        m = rep["moments"]["U"]
        lim = exact.limit_moments_u(theta)
        z1 = (m["mean"] - lim.u_mean) / m["mean_se"]
        z2 = (m["second"] - lim.u_second) / m["second_se"]
        ok &= abs(z1) < 3 and abs(z2) < 3
        parts.append(f"theta={theta:g}: {z1:+.2f}/{z2:+.2f}")
    dt = time.perf_counter() - t0
    assert record(6, "U' pool moments", ok, dt, 180, "; ".join(parts))


@pytest.mark.slow
def test_criterion_07_mixing_variance():
    t0 = time.perf_counter()
    parts, ok = [], True
    for theta in (1.0, 4.0):
        mean_r, var_r = mc.mixed_normal_variance_report(10_000, theta, 1.0, 10_000, derive_seed(SEED, 7), threads=4)
        ok &= mean_r.passes(3.0, rel=0.05) and var_r.passes(3.0, rel=0.10)
        parts.append(f"theta={theta:g}: mean {mean_r.estimate:.4f} vs {mean_r.target:.4f}, "
                     f"var {var_r.estimate:.4f} vs {var_r.target:.4f}")
    dt = time.perf_counter() - t0
    assert record(7, "mixing variance at n=10^4", ok, dt, 600, "; ".join(parts))


def _decomposition(cross_term):
    t0 = time.perf_counter()
    parts, ok = [], True
    for theta in (1.0, 3.0):
        rep = fixpoint.subtree_decomposition_check(50, theta, 100_000, derive_seed(SEED, 8),
                                                   cross_term=cross_term)
        ok &= rep.ok
        parts.append(f"theta={theta:g}: z = {rep.z_first:+.1f}/{rep.z_second:+.1f}")
    return ok, time.perf_counter() - t0, "; ".join(parts)


@pytest.mark.xfail(strict=True, reason="the stated right-hand side adds 2K(n-K), which mixed pairs "
                                       "(LCA at the root, depth 0) do not contribute; see decisions ledger")
def test_criterion_08_decomposition_as_stated():
    ok, dt, detail = _decomposition(cross_term=True)
    assert record(8, "U'_n vs U_K + U'_(n-K) + K^2 + 2K(n-K)", ok, dt, 60, detail)


def test_criterion_08b_decomposition_corrected():
    ok, dt, detail = _decomposition(cross_term=False)
    assert record("8b", "U'_n vs U_K + U'_(n-K) + K^2", ok, dt, 60, detail)


def test_criterion_09_contraction():
    t0 = time.perf_counter()
    certs = [fixpoint.contraction_check(t) for t in (0.1, 0.5, 1.0, 2.0, 10.0, 100.0)]
    at_one = fixpoint.contraction_bound(1.0)
    dt = time.perf_counter() - t0
    ok = all(c.contracts for c in certs) and abs(at_one - 0.45) <= 1e-12
    worst = max(c.expected_lambda / c.bound for c in certs)
    assert record(9, "contraction certificate", ok, dt, 1, f"max E[lambda]/bound = {worst:.3f}, bound(1) = {at_one!r}")


def test_criterion_10_conditional_normality():
    t0 = time.perf_counter()
    results = mc.conditional_normality(100, 200, 1.0, 10_000, derive_seed(SEED, 10))
    passes = sum(r.passed for r in results)
    dt = time.perf_counter() - t0
    assert record(10, "KS normality of barycenters", passes >= 95, dt, 120, f"{passes}/100 trees pass")


def test_criterion_11_covariance():
    t0 = time.perf_counter()
    cov = empirical_pair_covariance(1, 2, 3, 1.0, normal(1.0), 100_000, derive_seed(SEED, 11))
    dt = time.perf_counter() - t0
    assert cov.exact == pytest.approx(0.5)
    assert record(11, "Cov(X_1, X_2) = sigma^2/2", abs(cov.z) < 3, dt, 10,
                  f"estimate {cov.estimate:.4f} +- {cov.stderr:.4f}, z = {cov.z:.2f}")
