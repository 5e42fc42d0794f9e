"""Streaming moments with an associative merge.

Tracks count, mean and the central sums M2..M4.  Single values go through
Welford's update; arrays are reduced two-pass and merged with the pairwise
rules of Chan et al. and Pebay, so chunked and serial accumulation agree.
"""

from __future__ import annotations

import math

import numpy as np


class RunningStats:
    __slots__ = ("count", "mean", "m2", "m3", "m4")

    def __init__(self):
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0
        self.m3 = 0.0
        self.m4 = 0.0

    def push(self, x: float) -> "RunningStats":
        n1 = self.count
        self.count += 1
        n = self.count
        delta = x - self.mean
        delta_n = delta / n
        term = delta * delta_n * n1
        self.mean += delta_n
        self.m4 += term * delta_n * delta_n * (n * n - 3 * n + 3) + 6 * delta_n * delta_n * self.m2 - 4 * delta_n * self.m3
        self.m3 += term * delta_n * (n - 2) - 3 * delta_n * self.m2
        self.m2 += term
        return self

    def update(self, values) -> "RunningStats":
        """Fold a batch of values in."""
        x = np.asarray(values, dtype=float).ravel()
        if x.size == 0:
            return self
        batch = RunningStats()
        batch.count = x.size
        batch.mean = float(x.mean())
        d = x - batch.mean
        d2 = d * d
        batch.m2 = float(d2.sum())
        batch.m3 = float((d2 * d).sum())
        batch.m4 = float((d2 * d2).sum())
        self._absorb(batch)
        return self

    def merge(self, other: "RunningStats") -> "RunningStats":
        out = self.copy()
        out._absorb(other)
        return out

    def copy(self) -> "RunningStats":
        out = RunningStats()
        out.count, out.mean, out.m2, out.m3, out.m4 = self.count, self.mean, self.m2, self.m3, self.m4
        return out

    def _absorb(self, b: "RunningStats") -> None:
        if b.count == 0:
            return
        if self.count == 0:
            self.count, self.mean, self.m2, self.m3, self.m4 = b.count, b.mean, b.m2, b.m3, b.m4
            return
        na, nb = self.count, b.count
        n = na + nb
        delta = b.mean - self.mean
        d2 = delta * delta
        m2 = self.m2 + b.m2 + d2 * na * nb / n
        m3 = (self.m3 + b.m3 + d2 * delta * na * nb * (na - nb) / (n * n)
              + 3.0 * delta * (na * b.m2 - nb * self.m2) / n)
        m4 = (self.m4 + b.m4
              + d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / (n ** 3)
              + 6.0 * d2 * (na * na * b.m2 + nb * nb * self.m2) / (n * n)
              + 4.0 * delta * (na * b.m3 - nb * self.m3) / n)
        self.count = n
        self.mean = self.mean + delta * nb / n
        self.m2, self.m3, self.m4 = m2, m3, m4

    @property
    def variance(self) -> float:
        """Unbiased sample variance."""
        if self.count < 2:
            return 0.0
        return self.m2 / (self.count - 1)

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    @property
    def stderr(self) -> float:
        """Standard error of the mean."""
        if self.count < 2:
            return math.inf
        return math.sqrt(self.variance / self.count)

    @property
    def variance_stderr(self) -> float:
        """Standard error of :attr:`variance`, from the fourth central moment."""
        n = self.count
        if n < 4:
            return math.inf
        mu4 = self.m4 / n
        s2 = self.variance
        return math.sqrt(max(mu4 - s2 * s2 * (n - 3) / (n - 1), 0.0) / n)

    def __repr__(self):
        return f"RunningStats(count={self.count}, mean={self.mean:.6g}, variance={self.variance:.6g})"
