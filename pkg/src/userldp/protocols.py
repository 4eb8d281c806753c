"""End-to-end uniformity testing protocols: clients, server decision, transcripts.

Every run is a pure function of (params, input distribution, random stream):
users are simulated in one vectorised pass, the server aggregates, and the
returned verdict carries a JSON-friendly transcript with message counts and
per-subprotocol statistics.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .constants import DEFAULT_CONSTANTS, ProtocolConstants
from .distributions import DiscreteDistribution
from .hadamard import HadamardPlan
from .mean_test import (
    CoordinateCounts,
    Decision,
    MeanTestResult,
    asymmetric_mean_test,
    symmetric_mean_test,
)
from .randomizers import (
    PrivacyParams,
    deviation_flags,
    draw_balanced_partition,
    rr_bits,
    threshold_bits,
)


class Mode(enum.Enum):
    SYMMETRIC = "symmetric"
    ASYMMETRIC = "asymmetric"


class InsufficientUsersError(ValueError):
    """The protocol cannot be run with the requested number of users."""


@dataclass(frozen=True)
class ProtocolParams:
    """Full configuration of one protocol run."""

    k: int
    m: int
    n: int
    privacy: PrivacyParams = field(default_factory=PrivacyParams.non_private)
    delta: float = 0.5
    mode: Mode = Mode.ASYMMETRIC
    seed: int = 0
    constants: ProtocolConstants = DEFAULT_CONSTANTS

    def __post_init__(self):
        if self.k < 2 or self.k & (self.k - 1):
            raise ValueError("k must be a power of two >= 2")
        if self.n < 1 or self.m < 1:
            raise ValueError("need n >= 1 users and m >= 1 samples per user")
        if not 0.0 < self.delta <= 1.0:
            raise ValueError("delta must lie in (0, 1]")

    @property
    def epsilon(self) -> Optional[float]:
        return self.privacy.epsilon


@dataclass(frozen=True)
class Verdict:
    decision: Decision
    transcript: dict

    @property
    def accepted(self) -> bool:
        return self.decision is Decision.ACCEPT

    def to_json(self) -> dict:
        return {"decision": self.decision.value, "transcript": self.transcript}


def _rng_for(params: ProtocolParams, rng: Optional[np.random.Generator]) -> np.random.Generator:
    if rng is not None:
        return rng
    return np.random.default_rng(np.random.SeedSequence(entropy=params.seed))


def _odd(m: int) -> int:
    # Even batches drop one sample; the threshold argument needs odd m.
    return m if m % 2 == 1 else m - 1


def _debiased_mean(bits: np.ndarray, priv: PrivacyParams) -> tuple[float, float]:
    """(raw mean, estimate of the pre-randomization mean)."""
    avg = float(np.mean(bits))
    if not priv.is_private:
        return avg, avg
    e = math.exp(priv.epsilon)
    return avg, (avg - 1.0 / (e + 1.0)) * (e + 1.0) / (e - 1.0)


def _flag_threshold(m: int, n_detectors: int, k: int, constants: ProtocolConstants) -> float:
    return constants.large_m_threshold_scale * math.sqrt(m * math.log(20.0 * n_detectors * k))


def _privatize(bits: np.ndarray, priv: PrivacyParams, rng: np.random.Generator) -> np.ndarray:
    return rr_bits(bits, priv, rng) if priv.is_private else bits


def _hadamard_mean_subprotocol(
    params: ProtocolParams,
    p: DiscreteDistribution,
    rng: np.random.Generator,
    n_users: int,
    gamma: float,
    priv: PrivacyParams,
) -> tuple[MeanTestResult, dict]:
    """Grouped threshold bits fed to the fixed-allocation mean tester.

    Users are assigned round-robin to the k-1 monitored columns; the leftover
    n_users mod (k-1) users are dropped (and counted in the transcript).
    """
    plan = HadamardPlan.of_order(params.k)
    d = params.k - 1
    per_group = n_users // d
    if per_group < 2:
        raise InsufficientUsersError(
            f"need at least {2 * d} users for {d} groups of 2, got {n_users}"
        )
    used = per_group * d
    m_eff = _odd(params.m)
    samples = p.sample((used, m_eff), rng)
    groups = np.tile(np.arange(2, params.k + 1), per_group)
    bits = threshold_bits(samples, plan, groups)
    bits = _privatize(bits, priv, rng)
    centred = (2 * bits.astype(np.int64) - 1).reshape(per_group, d)
    result = asymmetric_mean_test(centred, gamma)
    info = {
        "users": used,
        "users_dropped": n_users - used,
        "vectors": per_group,
        "dim": d,
        "m_effective": m_eff,
        "gamma": gamma,
        "statistic": result.statistic,
        "threshold": result.threshold,
        "decision": result.decision.value,
    }
    return result, info


def _large_m_subprotocol(
    params: ProtocolParams,
    p: DiscreteDistribution,
    rng: np.random.Generator,
    n_users: int,
    priv: PrivacyParams,
) -> tuple[Decision, dict]:
    """Deviation flags from every user, majority-style decision on the debiased rate."""
    plan = HadamardPlan.of_order(params.k)
    threshold = _flag_threshold(params.m, n_users, params.k, params.constants)
    samples = p.sample((n_users, params.m), rng)
    flags = deviation_flags(samples, plan, threshold)
    sent = _privatize(flags, priv, rng)
    raw_rate, debiased = _debiased_mean(sent, priv)
    # Ties resolve to reject.
    decision = Decision.REJECT if debiased >= 0.5 else Decision.ACCEPT
    info = {
        "users": n_users,
        "deviation_threshold": threshold,
        "flag_rate": raw_rate,
        "debiased_flag_rate": debiased,
        "decision": decision.value,
    }
    return decision, info


def run_asymmetric_hadamard(
    params: ProtocolParams,
    p: DiscreteDistribution,
    rng: Optional[np.random.Generator] = None,
) -> Verdict:
    """One-bit asymmetric tester: grouped threshold bits plus the mean test.

    The distance parameter handed to the mean tester is
    gamma_scale * r * min(sqrt(m) * delta, 1), with r the randomized-response
    attenuation (1 when non-private).
    """
    if params.n < params.k - 1:
        raise InsufficientUsersError(f"need at least k-1 = {params.k - 1} users")
    rng = _rng_for(params, rng)
    c = params.constants
    priv = params.privacy
    m_eff = _odd(params.m)
    d = params.k - 1
    gamma = c.gamma_scale * priv.attenuation() * min(math.sqrt(m_eff) * params.delta, 1.0)
    gamma = min(gamma, math.sqrt(d))
    result, info = _hadamard_mean_subprotocol(params, p, rng, params.n, gamma, priv)
    transcript = {
        "protocol": "asymmetric_hadamard",
        "k": params.k,
        "m": params.m,
        "n": params.n,
        "epsilon": priv.epsilon,
        "bits_per_user": 1,
        "group_index_bits_per_user": 0,
        "rr_passes_per_raw_bit": 1 if priv.is_private else 0,
        "per_message_epsilon": [priv.epsilon] if priv.is_private else [],
        "mean_test": info,
    }
    return Verdict(decision=result.decision, transcript=transcript)


def run_large_m(
    params: ProtocolParams,
    p: DiscreteDistribution,
    rng: Optional[np.random.Generator] = None,
) -> Verdict:
    """Symmetric one-bit tester for strongly biased subsets.

    Every user flags whether any monitored subset's count strays from m/2 by
    more than T = scale * sqrt(m * ln(20 n k)); the server rejects when the
    debiased flag rate reaches 1/2.
    """
    rng = _rng_for(params, rng)
    priv = params.privacy
    decision, info = _large_m_subprotocol(params, p, rng, params.n, priv)
    transcript = {
        "protocol": "large_m",
        "k": params.k,
        "m": params.m,
        "n": params.n,
        "epsilon": priv.epsilon,
        "bits_per_user": 1,
        "group_index_bits_per_user": 0,
        "rr_passes_per_raw_bit": 1 if priv.is_private else 0,
        "per_message_epsilon": [priv.epsilon] if priv.is_private else [],
        "large_m": info,
    }
    return Verdict(decision=decision, transcript=transcript)


def _combined_gamma(
    params: ProtocolParams, priv_mean: PrivacyParams, n_detectors: int, m_eff: int
) -> float:
    """Distance parameter for the mean test inside the combined protocol.

    gamma^2 = scale^2 * r^2 * min(m * delta^2 / ln(20 n2 k), k), clamped so the
    tester's gamma <= sqrt(d) precondition holds.
    """
    c = params.constants
    scale = (
        c.combined_gamma_scale if params.mode is Mode.ASYMMETRIC else c.symmetric_gamma_scale
    )
    log_term = math.log(20.0 * n_detectors * params.k)
    gamma_sq = (
        scale**2
        * priv_mean.attenuation() ** 2
        * min(m_eff * params.delta**2 / log_term, float(params.k))
    )
    return min(math.sqrt(gamma_sq), math.sqrt(params.k - 1))


def run_combined(
    params: ProtocolParams,
    p: DiscreteDistribution,
    rng: Optional[np.random.Generator] = None,
) -> Verdict:
    """Both testers together; accept iff both accept.

    Asymmetric mode reserves a small detector pool (1 user if non-private,
    ceil(c/eps^2) if private) for the deviation test and runs the mean test on
    the rest, each message at full budget.  Symmetric mode has every user run
    both randomizers at half budget each, picking its monitored column
    uniformly at random and sending the (data-independent) column index along.
    """
    rng = _rng_for(params, rng)
    priv = params.privacy
    c = params.constants
    if params.mode is Mode.ASYMMETRIC:
        n2 = 1 if not priv.is_private else math.ceil(c.detector_users_constant / priv.epsilon**2)
        n1 = params.n - n2
        if n1 < params.k - 1:
            raise InsufficientUsersError(
                f"need more than {n2 + params.k - 1} users for the combined run, got {params.n}"
            )
        flag_decision, flag_info = _large_m_subprotocol(params, p, rng, n2, priv)
        m_eff = _odd(params.m)
        gamma = _combined_gamma(params, priv, n2, m_eff)
        mean_result, mean_info = _hadamard_mean_subprotocol(params, p, rng, n1, gamma, priv)
        both_accept = flag_decision is Decision.ACCEPT and mean_result.decision is Decision.ACCEPT
        transcript = {
            "protocol": "combined",
            "mode": Mode.ASYMMETRIC.value,
            "k": params.k,
            "m": params.m,
            "n": params.n,
            "epsilon": priv.epsilon,
            "detector_users": n2,
            "mean_users": n1,
            "bits_per_user": 1,
            "group_index_bits_per_user": 0,
            "rr_passes_per_raw_bit": 1 if priv.is_private else 0,
            "per_message_epsilon": [priv.epsilon] if priv.is_private else [],
            "large_m": flag_info,
            "mean_test": mean_info,
        }
        decision = Decision.ACCEPT if both_accept else Decision.REJECT
        return Verdict(decision=decision, transcript=transcript)

    # Symmetric mode: every user sends (column index, threshold bit, flag bit).
    plan = HadamardPlan.of_order(params.k)
    d = params.k - 1
    n = params.n
    nominal = n / d
    if nominal < 2:
        raise InsufficientUsersError(f"need at least {2 * d} users, got {n}")
    half = priv.split(2)
    m_eff = _odd(params.m)
    samples = p.sample((n, params.m), rng)
    groups = rng.integers(2, params.k + 1, size=n)
    had_bits = threshold_bits(samples[:, :m_eff], plan, groups)
    had_bits = _privatize(had_bits, half, rng)
    threshold = _flag_threshold(params.m, n, params.k, c)
    flags = deviation_flags(samples, plan, threshold)
    flags = _privatize(flags, half, rng)
    signs = 2 * had_bits.astype(np.int64) - 1
    counts = CoordinateCounts.from_signs(groups - 2, signs, d=d, n=nominal)
    gamma = _combined_gamma(params, half, n, m_eff)
    mean_result = symmetric_mean_test(counts, gamma)
    raw_rate, debiased = _debiased_mean(flags, half)
    flag_decision = Decision.REJECT if debiased >= 0.5 else Decision.ACCEPT
    both_accept = flag_decision is Decision.ACCEPT and mean_result.decision is Decision.ACCEPT
    eps_half = priv.epsilon / 2.0 if priv.is_private else None
    transcript = {
        "protocol": "combined",
        "mode": Mode.SYMMETRIC.value,
        "k": params.k,
        "m": params.m,
        "n": params.n,
        "epsilon": priv.epsilon,
        "bits_per_user": 2,
        "group_index_bits_per_user": math.ceil(math.log2(params.k)),
        "group_index_epsilon_cost": 0.0,  # the column choice is data-independent
        "rr_passes_per_raw_bit": 1 if priv.is_private else 0,
        "per_message_epsilon": [eps_half, eps_half] if priv.is_private else [],
        "large_m": {
            "users": n,
            "deviation_threshold": threshold,
            "flag_rate": raw_rate,
            "debiased_flag_rate": debiased,
            "decision": flag_decision.value,
        },
        "mean_test": {
            "users": n,
            "dim": d,
            "nominal_per_coordinate": nominal,
            "m_effective": m_eff,
            "gamma": gamma,
            "statistic": mean_result.statistic,
            "threshold": mean_result.threshold,
            "decision": mean_result.decision.value,
        },
    }
    decision = Decision.ACCEPT if both_accept else Decision.REJECT
    return Verdict(decision=decision, transcript=transcript)


def run_public_coin(
    params: ProtocolParams,
    p: DiscreteDistribution,
    rng: Optional[np.random.Generator] = None,
) -> Verdict:
    """Shared-randomness tester: compress the domain to a coin, test its bias.

    Users are split into R disjoint batches.  Each batch shares one balanced
    partition drawn from the public stream; each user thresholds its in-part
    count at (m+1)/2 and randomizes the bit.  A batch votes reject when the
    debiased mean strays from 1/2 by more than
    scale * min(sqrt(m) * delta / sqrt(k), 1); the final verdict is the
    majority over batches.
    """
    rng = _rng_for(params, rng)
    c = params.constants
    priv = params.privacy
    batches = c.pubcoin_batches
    if params.n < batches:
        raise InsufficientUsersError(f"need at least one user per batch ({batches})")
    per_batch = params.n // batches
    m_eff = _odd(params.m)
    theta = c.pubcoin_threshold_scale * min(
        math.sqrt(m_eff) * params.delta / math.sqrt(params.k), 1.0
    )
    batch_stats = []
    rejections = 0
    for _ in range(batches):
        partition = draw_balanced_partition(params.k, rng)
        samples = p.sample((per_batch, m_eff), rng)
        counts = partition.in_first_part[samples - 1].sum(axis=1)
        bits = (counts >= (m_eff + 1) // 2).astype(np.int8)
        bits = _privatize(bits, priv, rng)
        _, debiased = _debiased_mean(bits, priv)
        rejected = abs(debiased - 0.5) > theta
        rejections += int(rejected)
        batch_stats.append({"debiased_mean": debiased, "rejected": bool(rejected)})
    decision = Decision.REJECT if rejections > batches // 2 else Decision.ACCEPT
    transcript = {
        "protocol": "public_coin",
        "k": params.k,
        "m": params.m,
        "n": params.n,
        "epsilon": priv.epsilon,
        "bits_per_user": 1,
        "group_index_bits_per_user": 0,
        "rr_passes_per_raw_bit": 1 if priv.is_private else 0,
        "per_message_epsilon": [priv.epsilon] if priv.is_private else [],
        "batches": batches,
        "users_per_batch": per_batch,
        "users_dropped": params.n - per_batch * batches,
        "bias_threshold": theta,
        "batch_rejections": rejections,
        "batch_stats": batch_stats,
    }
    return Verdict(decision=decision, transcript=transcript)


def run_baseline_repetition(
    params: ProtocolParams,
    p: DiscreteDistribution,
    rng: Optional[np.random.Generator] = None,
) -> Verdict:
    """Empty-cell baseline: each user reports its noised fraction of unseen symbols.

    Per user, Z_i is the fraction of domain symbols missing from its batch,
    privatised with additive Laplace noise at scale ((m-1)/k)/eps.  The server
    rejects when the average exceeds the uniform expectation (1 - 1/k)^m by
    half the separation margin m^2 delta^2 / (4 e k^2).
    """
    if params.m > params.k:
        raise ValueError("the repetition baseline requires m <= k")
    rng = _rng_for(params, rng)
    priv = params.privacy
    samples = np.sort(p.sample((params.n, params.m), rng), axis=1)
    if params.m == 1:
        distinct = np.ones(params.n, dtype=np.int64)
    else:
        distinct = 1 + (np.diff(samples, axis=1) != 0).sum(axis=1)
    z = (params.k - distinct) / params.k
    sensitivity = (params.m - 1) / params.k
    noise_scale = sensitivity / priv.epsilon if priv.is_private else 0.0
    if noise_scale > 0.0:
        z = z + rng.laplace(0.0, noise_scale, size=params.n)
    statistic = float(np.mean(z))
    expected_uniform = (1.0 - 1.0 / params.k) ** params.m
    margin = params.m**2 * params.delta**2 / (4.0 * math.e * params.k**2)
    threshold = expected_uniform + margin / 2.0
    decision = Decision.REJECT if statistic >= threshold else Decision.ACCEPT
    transcript = {
        "protocol": "baseline_repetition",
        "k": params.k,
        "m": params.m,
        "n": params.n,
        "epsilon": priv.epsilon,
        "message_type": "real",
        "noise_scale": noise_scale,
        "statistic": statistic,
        "expected_uniform": expected_uniform,
        "separation_margin": margin,
        "threshold": threshold,
    }
    return Verdict(decision=decision, transcript=transcript)


ProtocolFn = Callable[[ProtocolParams, DiscreteDistribution, Optional[np.random.Generator]], Verdict]

PROTOCOLS: dict[str, ProtocolFn] = {
    "asymmetric_hadamard": run_asymmetric_hadamard,
    "large_m": run_large_m,
    "combined": run_combined,
    "public_coin": run_public_coin,
    "baseline_repetition": run_baseline_repetition,
}
