"""Implicit Sylvester +-1 matrix of order k = 2^t.

Column j >= 2 defines the monitored subset chi_j, the half of the domain whose
matrix entry is +1 in that column.  Membership is parity of a bitwise AND, so
no k-by-k matrix is ever materialised on the protocol path; the dense
membership matrix is only built for brute-force checks and bias summation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import DiscreteDistribution, tv_distance


def _bit_parity(values: np.ndarray) -> np.ndarray:
    """Parity (0 even, 1 odd) of the popcount of each entry."""
    x = values.astype(np.uint64, copy=True)
    for shift in (32, 16, 8, 4, 2, 1):
        x ^= x >> np.uint64(shift)
    return (x & np.uint64(1)).astype(np.uint8)


@dataclass(frozen=True)
class HadamardPlan:
    """Order parameters of the Sylvester structure: k = 2^t."""

    t: int
    k: int

    def __post_init__(self):
        if self.t < 1 or self.k != 1 << self.t:
            raise ValueError(f"k must equal 2^t with k >= 2, got t={self.t}, k={self.k}")
        parity = _bit_parity(np.arange(self.k))
        parity.setflags(write=False)
        object.__setattr__(self, "_parity", parity)

    @classmethod
    def of_order(cls, k: int) -> "HadamardPlan":
        if k < 2 or k & (k - 1):
            raise ValueError(f"domain size must be a power of two >= 2, got {k}")
        return cls(t=k.bit_length() - 1, k=k)

    def parity_table(self) -> np.ndarray:
        """Popcount parity of 0..k-1; index with (r-1) & (j-1)."""
        return self._parity

    def membership_matrix(self) -> np.ndarray:
        """Dense boolean matrix M with M[r-1, j-1] true iff symbol r is in chi_j."""
        idx = np.bitwise_and.outer(np.arange(self.k), np.arange(self.k))
        return self._parity[idx] == 0

    def chi_set(self, j: int) -> np.ndarray:
        """Symbols of the monitored subset chi_j, as a sorted array."""
        if not 1 <= j <= self.k:
            raise ValueError(f"column index must be in 1..{self.k}")
        r = np.arange(1, self.k + 1)
        return r[self._parity[(r - 1) & (j - 1)] == 0]


@dataclass(frozen=True)
class GroupBiasVector:
    """Column biases p(chi_j) - 1/2, indexed by column j = 1..k.

    Entry 1 corresponds to the all-ones column and is stored as 0; it is
    excluded from protocol groups.
    """

    biases: np.ndarray

    def __post_init__(self):
        biases = np.asarray(self.biases, dtype=np.float64)
        object.__setattr__(self, "biases", biases)
        if biases.ndim != 1 or biases.size < 2:
            raise ValueError("need one bias entry per column, k >= 2")
        if np.any(np.abs(biases[1:]) > 0.5 + 1e-12):
            raise ValueError("column biases must lie in [-1/2, 1/2]")

    def bias(self, j: int) -> float:
        return float(self.biases[j - 1])


def chi_membership(plan: HadamardPlan, r: int, j: int) -> bool:
    """True iff symbol r belongs to the monitored subset chi_j.

    Computed as even parity of popcount((r-1) & (j-1)), i.e. a +1 entry of the
    Sylvester matrix.
    """
    if not 1 <= r <= plan.k or not 1 <= j <= plan.k:
        raise ValueError(f"indices must be in 1..{plan.k}, got r={r}, j={j}")
    return int(plan.parity_table()[(r - 1) & (j - 1)]) == 0


def group_biases(plan: HadamardPlan, p: DiscreteDistribution) -> GroupBiasVector:
    """Bias of every column under p: entry j (j >= 2) is p(chi_j) - 1/2."""
    if p.k != plan.k:
        raise ValueError(f"distribution is over {p.k} symbols, plan expects {plan.k}")
    member = plan.membership_matrix()
    biases = member.T.astype(np.float64) @ p.probs - 0.5
    biases[0] = 0.0
    return GroupBiasVector(biases)


def norm_preservation_check(plan: HadamardPlan, p: DiscreteDistribution) -> tuple[float, float]:
    """Evaluate both sides of the subset-probability energy identity.

    Returns (lhs, rhs) with
        lhs = sum_j (p(chi_j) - U(chi_j))^2   over all k columns,
        rhs = (k/4) * sum_x (p_x - 1/k)^2.
    The two are equal; callers assert the equality, and separately that the
    per-column biases dominate the squared TV distance to uniform.
    """
    if p.k != plan.k:
        raise ValueError(f"distribution is over {p.k} symbols, plan expects {plan.k}")
    member = plan.membership_matrix().astype(np.float64)
    col_probs = member.T @ p.probs
    uni_probs = member.sum(axis=0) / plan.k
    lhs = float(((col_probs - uni_probs) ** 2).sum())
    rhs = plan.k / 4.0 * float(((p.probs - 1.0 / plan.k) ** 2).sum())
    return lhs, rhs


def bias_energy_dominates_tv(plan: HadamardPlan, p: DiscreteDistribution) -> bool:
    """Check sum_{j>=2} bias_j^2 >= tv(p, U)^2 (small float slack)."""
    biases = group_biases(plan, p).biases
    tv = tv_distance(p, DiscreteDistribution.uniform(plan.k))
    return float((biases[1:] ** 2).sum()) >= tv * tv - 1e-12


def fwht(values: np.ndarray, axis: int = -1) -> np.ndarray:
    """Unnormalised fast transform along ``axis``; length must be a power of two.

    Natural (Sylvester) ordering: output index a is
    sum_b (-1)^popcount(a & b) * input[b].
    """
    a = np.asarray(values)
    a = np.moveaxis(a, axis, -1)
    n = a.shape[-1]
    if n & (n - 1) or n == 0:
        raise ValueError("transform length must be a power of two")
    lead = a.shape[:-1]
    a = a.reshape(-1, n).copy()
    h = 1
    while h < n:
        b = a.reshape(-1, n // (2 * h), 2, h)
        x = b[:, :, 0, :].copy()
        y = b[:, :, 1, :].copy()
        b[:, :, 0, :] = x + y
        b[:, :, 1, :] = x - y
        h *= 2
    return np.moveaxis(a.reshape(*lead, n), -1, axis)
