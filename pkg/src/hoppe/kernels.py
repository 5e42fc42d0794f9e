"""Covariant jump kernels on the real line.

A covariant kernel moves a point at ``x`` to ``x + Y`` with ``Y`` drawn from
a fixed law, so the whole kernel is described by that law.  ``mean_shift``
and ``variance`` are its mean and variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

KINDS = ("normal", "poisson_shift", "unit_shift", "simple_random_walk")
POISSON_MAX_LAMBDA = 30.0


@dataclass(frozen=True)
class JumpKernel:
    kind: str
    param: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown kernel kind {self.kind!r}; choose from {KINDS}")
        if self.kind == "normal" and not self.param > 0:
            raise ParameterError("normal kernel needs sigma2 > 0")
        if self.kind == "poisson_shift":
            if not self.param > 0:
                raise ParameterError("poisson kernel needs lambda > 0")
            if self.param > POISSON_MAX_LAMBDA:
                raise ParameterError(
                    f"poisson inversion sampler is capped at lambda <= {POISSON_MAX_LAMBDA}"
                )

    @property
    def mean_shift(self) -> float:
        if self.kind == "poisson_shift":
            return float(self.param)
        if self.kind == "unit_shift":
            return 1.0
        return 0.0

    @property
    def variance(self) -> float:
        if self.kind in ("normal", "poisson_shift"):
            return float(self.param)
        if self.kind == "simple_random_walk":
            return 1.0
        return 0.0

    @property
    def centered(self) -> bool:
        return self.mean_shift == 0.0

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        """Draw increments ``Y`` of the given shape."""
        if self.kind == "normal":
            return rng.normal(0.0, math.sqrt(self.param), size)
        if self.kind == "poisson_shift":
            return poisson_inversion(self.param, rng, size).astype(float)
        if self.kind == "unit_shift":
            return np.ones(size)
        return np.where(rng.random(size) < 0.5, -1.0, 1.0)

    def spec(self) -> str:
        if self.kind == "normal":
            return f"normal:{self.param!r}"
        if self.kind == "poisson_shift":
            return f"poisson:{self.param!r}"
        return {"unit_shift": "shift", "simple_random_walk": "srw"}[self.kind]


def normal(sigma2: float = 1.0) -> JumpKernel:
    return JumpKernel("normal", float(sigma2))


def poisson_shift(lam: float) -> JumpKernel:
    return JumpKernel("poisson_shift", float(lam))


def unit_shift() -> JumpKernel:
    return JumpKernel("unit_shift")


def simple_random_walk() -> JumpKernel:
    return JumpKernel("simple_random_walk")


_ALIASES = {
    "normal": "normal", "gauss": "normal",
    "poisson": "poisson_shift", "poisson_shift": "poisson_shift",
    "shift": "unit_shift", "unit_shift": "unit_shift",
    "srw": "simple_random_walk", "simple_random_walk": "simple_random_walk",
}


def parse_kernel(text: str) -> JumpKernel:
    """Parse ``normal:1.5``, ``poisson:2``, ``shift`` or ``srw``."""
    name, _, arg = text.strip().partition(":")
    kind = _ALIASES.get(name.lower())
    if kind is None:
        raise ParameterError(f"unknown kernel {text!r}")
    if kind in ("normal", "poisson_shift"):
        if not arg:
            if kind == "normal":
                return normal(1.0)
            raise ParameterError("poisson kernel needs a rate, e.g. poisson:2")
        try:
            value = float(arg)
        except ValueError as exc:
            raise ParameterError(f"bad kernel parameter in {text!r}") from exc
        return JumpKernel(kind, value)
    if arg:
        raise ParameterError(f"kernel {name!r} takes no parameter")
    return JumpKernel(kind)


def poisson_inversion(lam: float, rng: np.random.Generator, size) -> np.ndarray:
    """Poisson(lam) by inverting the CDF (sequential search over a cached table)."""
    if not 0 < lam <= POISSON_MAX_LAMBDA:
        raise ParameterError(f"lambda must lie in (0, {POISSON_MAX_LAMBDA}]")
    p = math.exp(-lam)
    cdf = [p]
    k = 0
    while cdf[-1] < 1.0 - 1e-16 and k < 1000:
        k += 1
        p *= lam / k
        cdf.append(cdf[-1] + p)
    table = np.array(cdf)
    table[-1] = 1.0
    return np.searchsorted(table, rng.random(size), side="right").astype(np.int64)
