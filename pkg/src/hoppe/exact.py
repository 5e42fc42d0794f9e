"""Closed-form expectations for Hoppe trees and their limit laws.

Everything here is deterministic and evaluated in double precision; these
values are the targets every simulation in the package is compared with.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

EULER_GAMMA = 0.57721566490153286061

# B_{2k} / (2k) for k = 1..7
_DIGAMMA_SERIES = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)


def _check(n: int, theta: float) -> None:
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if not theta > 0:
        raise ParameterError(f"theta must be positive, got {theta}")


@dataclass(frozen=True)
class ThetaParams:
    theta: float
    n: int

    def __post_init__(self):
        _check(self.n, self.theta)


@dataclass(frozen=True)
class LimitMoments:
    u_mean: float
    u_second: float
    u_variance: float


def harmonic_theta(n: int, theta: float) -> float:
    """``sum_{j=1}^{n-1} 1/(theta+j)``; zero for ``n = 1``."""
    _check(n, theta)
    return math.fsum(1.0 / (theta + j) for j in range(1, n))


def digamma(x: float) -> float:
    """Psi(x) for x > 0 by upward recurrence to x >= 10 and the asymptotic series."""
    x = float(x)
    if not x > 0 or math.isinf(x):
        raise ParameterError(f"digamma is implemented for finite x > 0, got {x}")
    acc = 0.0
    while x < 10.0:
        acc -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    series = 0.0
    for c in reversed(_DIGAMMA_SERIES):
        series = series * inv2 + c
    return acc + math.log(x) - 0.5 / x - series * inv2


# ---------------------------------------------------------- expectations


def expected_T(n: int, theta: float) -> float:
    """E T_n = (theta + n - 1) h_n."""
    _check(n, theta)
    return (theta + n - 1) * harmonic_theta(n, theta)


def expected_U(n: int, theta: float) -> float:
    _check(n, theta)
    if n == 1:
        return 0.0
    h = harmonic_theta(n - 1, theta)
    return (theta + n) * (theta + n - 1) * (
        2.0 / (1.0 + theta) - 1.0 / (theta + n - 1) - (1.0 + h) / (theta + n)
    )


def expected_W(n: int, theta: float) -> float:
    _check(n, theta)
    if n == 1:
        return 0.0
    h_prev = harmonic_theta(n - 1, theta)
    h = h_prev + 1.0 / (theta + n - 1)
    return (theta + n) * (theta + n - 1) * (
        (theta - 1.0) * (1.0 / (theta + 1.0) - 1.0 / (theta + n - 1) - h_prev / (theta + n))
        + h - 1.0 + (theta + 1.0) / (theta + n)
    )


def expected_R(n: int, theta: float) -> float:
    """E R_n from the identity 2R_n = (n-1) T_n - W_n."""
    return 0.5 * ((n - 1) * expected_T(n, theta) - expected_W(n, theta))


def expected_lca_depth(j: int, k: int, theta: float) -> float:
    """E[D_jk], the expected depth of the last common ancestor of ``j`` and ``k``.

    For ``i < j`` the value does not depend on ``j``: writing ``c_i`` for
    it, ``c_i = (1 + h_i + sum_{l<i} c_l) / (theta + i)``.  The diagonal is
    the expected depth ``1 + h_k`` (and 0 at the root).
    """
    if j < 0 or k < 0:
        raise ParameterError("vertices must be non-negative")
    if not theta > 0:
        raise ParameterError(f"theta must be positive, got {theta}")
    lo, hi = min(j, k), max(j, k)
    if lo == 0:
        return 0.0
    if lo == hi:
        return 1.0 + harmonic_theta(lo, theta)
    acc = 0.0
    h = 0.0
    c = 0.0
    for i in range(1, lo + 1):
        if i > 1:
            h += 1.0 / (theta + i - 1)
        c = (1.0 + h + acc) / (theta + i)
        acc += c
    return c


@dataclass(frozen=True)
class RecursionReport:
    n: int
    theta: float
    max_rel_error: dict
    tol: float

    @property
    def ok(self) -> bool:
        return all(err <= self.tol for err in self.max_rel_error.values())


def expected_recursion_check(n: int, theta: float, tol: float = 1e-9) -> RecursionReport:
    """Check the one-step recursions of E T, E R, E U, E W for sizes 2..n."""
    _check(n, theta)
    if n < 2:
        raise ParameterError("the recursions start at n = 2")
    errors = {"T": 0.0, "R": 0.0, "U": 0.0, "W": 0.0}

    def rel(lhs, rhs):
        return abs(lhs - rhs) / max(1.0, abs(lhs))

    prev = {
        "T": expected_T(1, theta), "R": expected_R(1, theta),
        "U": expected_U(1, theta), "W": expected_W(1, theta),
    }
    for m in range(2, n + 1):
        cur = {
            "T": expected_T(m, theta), "R": expected_R(m, theta),
            "U": expected_U(m, theta), "W": expected_W(m, theta),
        }
        d = theta + m - 2
        t = prev["T"]
        rhs = {
            "T": (theta + m - 1) / d * t + 1.0,
            "R": (theta + m) / d * prev["R"] + t / d,
            "U": (theta + m) / d * prev["U"] + t / d + 1.0,
            "W": (theta + m) / d * prev["W"] + (theta - 1.0) / d * t + m - 1,
        }
        for key in errors:
            errors[key] = max(errors[key], rel(cur[key], rhs[key]))
        prev = cur
    return RecursionReport(n=n, theta=theta, max_rel_error=errors, tol=tol)


def expectation_table(ns, theta: float) -> list[dict]:
    return [
        {"n": int(n), "theta": theta, "ET": expected_T(n, theta),
         "EU": expected_U(n, theta), "EW": expected_W(n, theta)}
        for n in ns
    ]


def expectation_table_csv(ns, theta: float) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["n", "theta", "ET", "EU", "EW"], lineterminator="\n")
    writer.writeheader()
    for row in expectation_table(ns, theta):
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


# ------------------------------------------------- size of the first branch


def _check_k(n: int, theta: float) -> None:
    if n < 2:
        raise ParameterError(f"K is defined for n >= 2, got {n}")
    if not theta > 0:
        raise ParameterError(f"theta must be positive, got {theta}")


def _log_ratio_terms(n: int, theta: float) -> np.ndarray:
    """``log(i / (theta + i))`` for ``i = 1..n-2``."""
    return -np.log1p(theta / np.arange(1, n - 1, dtype=float))


def k_pmf(n: int, theta: float, m: int) -> float:
    """P(K = m) for the size K of the subtree rooted at vertex 1.

    With ``a = n - m - 1`` the rising factorials cancel down to
    ``theta/(theta+a) * prod_{i=a+1}^{n-2} i/(theta+i)`` (the leading factor
    is 1 when ``a = 0``).  The product is summed in log space.
    """
    _check_k(n, theta)
    if not 1 <= m <= n - 1:
        raise ParameterError(f"m must lie in 1..{n - 1}, got {m}")
    a = n - m - 1
    log_p = math.fsum(_log_ratio_terms(n, theta)[a:])
    if a > 0:
        log_p += math.log(theta / (theta + a))
    return math.exp(log_p)


def k_cdf(n: int, theta: float) -> np.ndarray:
    """Cumulative probabilities of K over ``m = 1..n-1``."""
    _check_k(n, theta)
    terms = _log_ratio_terms(n, theta)
    # suffix sums: tail[a] = sum of terms a..n-3, for a = 0..n-2
    tail = np.concatenate([np.cumsum(terms[::-1])[::-1], [0.0]])
    a = np.arange(n - 1)
    lead = np.where(a > 0, np.log(theta / (theta + np.maximum(a, 1))), 0.0)
    pmf_by_a = np.exp(tail + lead)
    cdf = np.cumsum(pmf_by_a[::-1])  # m = 1..n-1 is a = n-2..0
    cdf /= cdf[-1]
    return cdf


def k_sample(n: int, theta: float, rng: np.random.Generator, size=None, cdf=None):
    """Draw K by inversion of its cumulative distribution."""
    if cdf is None:
        cdf = k_cdf(n, theta)
    u = rng.random(size)
    k = np.searchsorted(cdf, u, side="right") + 1
    return int(k) if size is None else k.astype(np.int64)


def k_sample_urn(n: int, theta: float, rng: np.random.Generator) -> int:
    """Draw K by running the Polya urn: red weight 1, white weight theta, n-2 draws."""
    if n < 2:
        raise ParameterError(f"K is defined for n >= 2, got {n}")
    red = 1
    u = rng.random(n - 2)
    for step, x in enumerate(u):
        if x * (theta + 1.0 + step) < red:
            red += 1
    return red


# ---------------------------------------------------------- limit moments


def limit_moments_u(theta: float) -> LimitMoments:
    """Mean, second moment and variance of the limit of U_n / n^2 (Hoppe tree).

    At ``theta = 1`` these are the random recursive tree values 1, 11/9, 2/9.
    """
    if not theta > 0:
        raise ParameterError(f"theta must be positive, got {theta}")
    t = float(theta)
    mean = 2.0 / (1.0 + t)
    second = (12.0 * t + 76.0) / (3.0 * (1.0 + t) * (2.0 + t) * (3.0 + t))
    variance = (28.0 * t + 4.0) / (3.0 * (1.0 + t) ** 2 * (2.0 + t) * (3.0 + t))
    return LimitMoments(u_mean=mean, u_second=second, u_variance=variance)
