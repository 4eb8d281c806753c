"""Discrete distributions over a finite domain, plus the test instances used in experiments.

Symbols are 1..k throughout.  Instances are generated here (rather than in test
code) so that experiment configs can name them and runs stay reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

SUM_TOLERANCE = 1e-12


@dataclass(frozen=True)
class DiscreteDistribution:
    """Probability vector over the symbols 1..k.

    Invariants (enforced at construction): entries are non-negative, sum to 1
    within ``SUM_TOLERANCE``, and k >= 2.  Instances are immutable and safe to
    share across workers.
    """

    probs: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=np.float64, copy=True)
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        if probs.ndim != 1 or probs.size < 2:
            raise ValueError("need a 1-D probability vector with k >= 2")
        if np.any(probs < 0.0):
            raise ValueError("probability entries must be non-negative")
        total = float(probs.sum())
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise ValueError(f"probabilities must sum to 1, got {total!r}")
        cdf = np.cumsum(probs)
        cdf.setflags(write=False)
        object.__setattr__(self, "_cdf", cdf)

    @property
    def k(self) -> int:
        return int(self.probs.size)

    @classmethod
    def uniform(cls, k: int) -> "DiscreteDistribution":
        if k < 2:
            raise ValueError("k must be at least 2")
        return cls(np.full(k, 1.0 / k))

    @classmethod
    def from_list(cls, probs: Iterable[float]) -> "DiscreteDistribution":
        return cls(np.asarray(list(probs), dtype=np.float64))

    def to_list(self) -> list[float]:
        """JSON-friendly representation (a plain list of probabilities)."""
        return [float(x) for x in self.probs]

    def sample(self, shape, rng: np.random.Generator) -> np.ndarray:
        """Draw iid symbols with the given shape via inverse CDF.

        O(log k) per draw over the precomputed cumulative array; deterministic
        given the generator state.
        """
        u = rng.random(shape)
        idx = np.searchsorted(self._cdf, u, side="right")
        np.clip(idx, 0, self.k - 1, out=idx)
        return (idx + 1).astype(np.int64)


@dataclass(frozen=True)
class SampleBatch:
    """One user's data: m iid symbols from the unknown distribution."""

    symbols: np.ndarray
    m: int

    def __post_init__(self):
        symbols = np.asarray(self.symbols, dtype=np.int64)
        object.__setattr__(self, "symbols", symbols)
        if symbols.ndim != 1 or symbols.size != self.m:
            raise ValueError("symbols must be a 1-D vector of length m")
        if self.m < 1:
            raise ValueError("m must be positive")
        if np.any(symbols < 1):
            raise ValueError("symbols must be in 1..k")


def sample_batch(dist: DiscreteDistribution, m: int, rng: np.random.Generator) -> SampleBatch:
    """Draw one user's batch of m iid samples from ``dist``."""
    if m < 1:
        raise ValueError("m must be at least 1")
    return SampleBatch(symbols=dist.sample(m, rng), m=m)


def tv_distance(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    """Total variation distance, (1/2) * sum |p_x - q_x|."""
    if p.k != q.k:
        raise ValueError(f"domain sizes differ: {p.k} vs {q.k}")
    return 0.5 * float(np.abs(p.probs - q.probs).sum())


def make_paninski_instance(k: int, delta: float) -> DiscreteDistribution:
    """Alternating +-2*delta/k perturbation of uniform, at TV distance exactly delta.

    Entry j is (1 + (-1)^(j+1) * 2*delta) / k for j = 1..k; k must be even.
    """
    if k % 2 != 0:
        raise ValueError("k must be even")
    if not 0.0 < delta <= 0.5:
        raise ValueError("delta must lie in (0, 1/2]")
    signs = np.where(np.arange(k) % 2 == 0, 1.0, -1.0)
    return DiscreteDistribution((1.0 + signs * 2.0 * delta) / k)


def make_heavy_set_instance(k: int, subset: Iterable[int], extra: float) -> DiscreteDistribution:
    """Shift ``extra`` probability mass onto ``subset``, keeping each side internally uniform.

    The result satisfies p(subset) = |subset|/k + extra.  ``extra`` must be
    positive and small enough that the complement keeps non-negative mass.
    """
    members = sorted(set(int(s) for s in subset))
    if not members:
        raise ValueError("subset must be non-empty")
    if members[0] < 1 or members[-1] > k:
        raise ValueError("subset symbols must be in 1..k")
    size = len(members)
    if size >= k:
        raise ValueError("subset must be a strict subset of the domain")
    if not 0.0 < extra <= 1.0 - size / k:
        raise ValueError(f"extra must lie in (0, {1.0 - size / k}]")
    probs = np.full(k, (1.0 - size / k - extra) / (k - size))
    probs[np.asarray(members) - 1] = (size / k + extra) / size
    return DiscreteDistribution(probs)
