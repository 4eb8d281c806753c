"""Client-side message generation.

Each simulated user turns its batch of samples into one or two bits: a
threshold bit for its monitored subset, a deviation flag over all subsets, a
compression bit against a shared balanced partition, and optionally a pass
through binary randomized response.  Single-user operations wrap the
vectorised kernels the protocol layer uses, so both paths share one
implementation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .distributions import SampleBatch
from .hadamard import HadamardPlan, fwht


class MessageKind(enum.Enum):
    HADAMARD_BIT = "hadamard_bit"
    LARGE_M_BIT = "large_m_bit"
    RR_BIT = "rr_bit"
    COIN_BIT = "coin_bit"


@dataclass(frozen=True)
class UserMessage:
    """The one message a client emits: a bit, tagged with its role.

    ``group`` is the monitored-column index and is present exactly when the
    message is a Hadamard bit sent in symmetric mode (the index is chosen by
    the client, so the server must be told).
    """

    kind: MessageKind
    bit: int
    group: Optional[int] = None

    def __post_init__(self):
        if self.bit not in (0, 1):
            raise ValueError("bit must be 0 or 1")
        if self.group is not None and self.kind is not MessageKind.HADAMARD_BIT:
            raise ValueError("group index is only carried by symmetric-mode Hadamard bits")
        if self.group is not None and self.group < 2:
            raise ValueError("group index must be a column in 2..k")

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value, "bit": int(self.bit)}
        if self.group is not None:
            out["group"] = int(self.group)
        return out


@dataclass(frozen=True)
class PrivacyParams:
    """Privacy budget for one message: epsilon > 0, or None for non-private runs."""

    epsilon: Optional[float] = None

    def __post_init__(self):
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError("epsilon must be positive when private")

    @classmethod
    def non_private(cls) -> "PrivacyParams":
        return cls(epsilon=None)

    @classmethod
    def private(cls, epsilon: float) -> "PrivacyParams":
        return cls(epsilon=float(epsilon))

    @property
    def is_private(self) -> bool:
        return self.epsilon is not None

    def keep_probability(self) -> float:
        """Probability randomized response keeps the input bit, e^eps / (e^eps + 1)."""
        if not self.is_private:
            raise ValueError("non-private runs do not apply randomized response")
        e = math.exp(self.epsilon)
        return e / (e + 1.0)

    def attenuation(self) -> float:
        """Bias shrink factor of randomized response, (e^eps - 1)/(e^eps + 1); 1 if non-private."""
        if not self.is_private:
            return 1.0
        e = math.exp(self.epsilon)
        return (e - 1.0) / (e + 1.0)

    def split(self, parts: int = 2) -> "PrivacyParams":
        """Per-message budget when the total is divided evenly over ``parts`` messages."""
        if not self.is_private:
            return self
        return PrivacyParams.private(self.epsilon / parts)


def rr_transition_matrix(priv: PrivacyParams) -> np.ndarray:
    """2x2 matrix Q[y, x] = P[output y | input x] of binary randomized response."""
    keep = priv.keep_probability()
    flip = 1.0 / (math.exp(priv.epsilon) + 1.0)
    return np.array([[keep, flip], [flip, keep]])


def rr_max_likelihood_ratio(priv: PrivacyParams) -> float:
    """Worst-case ratio P[y|x] / P[y|x'] over the transition matrix; equals e^eps."""
    q = rr_transition_matrix(priv)
    return float(np.max(q / q[:, ::-1]))


# ---------------------------------------------------------------------------
# Vectorised kernels (users along axis 0, samples along axis 1)
# ---------------------------------------------------------------------------

_HIST_CHUNK_CELLS = 4_000_000


def threshold_bits(samples: np.ndarray, plan: HadamardPlan, groups: np.ndarray) -> np.ndarray:
    """Per-user threshold bit: 1 iff at least (m+1)/2 of the samples land in chi_{group}.

    ``samples`` has shape (users, m) with m odd; ``groups`` holds one column
    index in 2..k per user.
    """
    samples = np.asarray(samples)
    groups = np.asarray(groups)
    m = samples.shape[1]
    if m % 2 == 0:
        raise ValueError("m must be odd; drop one sample first for even batches")
    if np.any(groups < 2) or np.any(groups > plan.k):
        raise ValueError("group indices must be columns in 2..k")
    lut = plan.parity_table()
    member = lut[(samples - 1) & (groups - 1)[:, None]] == 0
    counts = member.sum(axis=1)
    return (counts >= (m + 1) // 2).astype(np.int8)


def symbol_histograms(samples: np.ndarray, k: int) -> np.ndarray:
    """Per-user symbol counts, shape (users, k); chunked to bound peak memory."""
    samples = np.asarray(samples)
    users, _ = samples.shape
    out = np.empty((users, k), dtype=np.int64)
    rows_per_chunk = max(1, _HIST_CHUNK_CELLS // k)
    for start in range(0, users, rows_per_chunk):
        block = samples[start : start + rows_per_chunk] - 1
        rows = block.shape[0]
        idx = block + (np.arange(rows) * k)[:, None]
        out[start : start + rows] = np.bincount(idx.ravel(), minlength=rows * k).reshape(rows, k)
    return out


def deviation_flags(samples: np.ndarray, plan: HadamardPlan, threshold: float) -> np.ndarray:
    """Per-user flag: 1 iff some monitored subset's count deviates from m/2 by more than ``threshold``.

    All k-1 counts come from one pass over the samples: a symbol histogram,
    then a fast transform whose output doubles as the centred subset counts
    (2*V_j - m).  Counts are exact integers.
    """
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    samples = np.asarray(samples)
    users, m = samples.shape
    if threshold >= m / 2.0:
        # |V_j - m/2| <= m/2 always, so no user can flag; skip the transform.
        return np.zeros(users, dtype=np.int8)
    hist = symbol_histograms(samples, plan.k)
    centred = fwht(hist, axis=1)  # entry j-1 equals 2*V_j - m
    max_dev = np.abs(centred[:, 1:]).max(axis=1)
    return (max_dev > 2.0 * threshold).astype(np.int8)


def rr_bits(bits: np.ndarray, priv: PrivacyParams, rng: np.random.Generator) -> np.ndarray:
    """Binary randomized response applied elementwise."""
    keep = priv.keep_probability()
    flips = rng.random(np.shape(bits)) >= keep
    return np.bitwise_xor(np.asarray(bits, dtype=np.int8), flips.astype(np.int8))


# ---------------------------------------------------------------------------
# Single-user operations
# ---------------------------------------------------------------------------


def threshold_bit(batch: SampleBatch, plan: HadamardPlan, j: int) -> int:
    """One user's monitored-subset bit: 1{#samples in chi_j >= (m+1)/2}."""
    if not 2 <= j <= plan.k:
        raise ValueError(f"column index must be in 2..{plan.k}")
    _check_symbols(batch, plan.k)
    return int(threshold_bits(batch.symbols[None, :], plan, np.array([j]))[0])


def large_m_flag(batch: SampleBatch, plan: HadamardPlan, T: float) -> int:
    """One user's deviation flag: 1{max over j>=2 of |V_j - m/2| > T}."""
    _check_symbols(batch, plan.k)
    return int(deviation_flags(batch.symbols[None, :], plan, T)[0])


def randomized_response(bit: int, priv: PrivacyParams, rng: np.random.Generator) -> int:
    """Keep the bit with probability e^eps/(e^eps + 1), flip it otherwise."""
    if bit not in (0, 1):
        raise ValueError("bit must be 0 or 1")
    if not priv.is_private:
        raise ValueError("randomized response needs a privacy budget; skip it when non-private")
    return int(rr_bits(np.array([bit], dtype=np.int8), priv, rng)[0])


@dataclass(frozen=True)
class BalancedPartition:
    """Two-part partition of 1..k with parts of size exactly k/2."""

    in_first_part: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.in_first_part, dtype=bool)
        object.__setattr__(self, "in_first_part", mask)
        k = mask.size
        if k < 2 or k % 2 != 0:
            raise ValueError("partition needs an even domain size >= 2")
        if int(mask.sum()) != k // 2:
            raise ValueError("parts must each contain exactly k/2 symbols")

    @property
    def k(self) -> int:
        return int(self.in_first_part.size)


def draw_balanced_partition(k: int, rng: np.random.Generator) -> BalancedPartition:
    """Uniformly random balanced partition: shuffle the domain and split in half."""
    order = rng.permutation(k)
    mask = np.zeros(k, dtype=bool)
    mask[order[: k // 2]] = True
    return BalancedPartition(mask)


def compress_bit(sample: int, partition: BalancedPartition) -> int:
    """1 iff the sample falls in the first part of the shared partition."""
    if not 1 <= sample <= partition.k:
        raise ValueError(f"sample must be in 1..{partition.k}")
    return int(partition.in_first_part[sample - 1])


def compression_bias(probs: np.ndarray, partition: BalancedPartition) -> float:
    """Bias of the induced coin, p(first part) - 1/2 (exact, no sampling)."""
    return float(probs[partition.in_first_part].sum() - 0.5)


def _check_symbols(batch: SampleBatch, k: int) -> None:
    if np.any(batch.symbols > k):
        raise ValueError(f"batch contains symbols outside 1..{k}")
