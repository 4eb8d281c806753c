"""Calibrated protocol constants.

The testing guarantees fix rates, not absolute constants, so every constant
the protocols need is pinned here from a one-time calibration sweep at desk
scale (k = 64, delta = 0.45; see ``mean_test.calibrate_budget_constant`` and
the power checks in ``verification``).  Every value can be overridden per run
through the ``constants`` block of an experiment config.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Mapping


@dataclass(frozen=True)
class ProtocolConstants:
    # Observations per coordinate the fixed-allocation mean tester needs,
    # n >= C * sqrt(d) / gamma^2.
    mean_test_budget_constant: float = 50.0
    # Same role for the multinomial-allocation tester (calibrated; the
    # guarantee only asserts existence of a constant).
    symmetric_budget_constant: float = 100.0
    # Scale on the mean-test distance parameter gamma in the plain
    # monitored-subset protocol.
    gamma_scale: float = 1.0
    # Scale on gamma in the combined tester, where the distance parameter
    # carries the worst-case log factor.  Calibrated per mode; larger values
    # shrink the required n but must keep the mean test able to fire up to the
    # m where the deviation detector takes over.
    combined_gamma_scale: float = 1.0
    symmetric_gamma_scale: float = 2.0
    # Deviation threshold T = scale * sqrt(m * ln(20 n k)).
    large_m_threshold_scale: float = 0.5
    # Two-sided bias threshold scale for the public-coin batch decision
    # (calibrated).
    pubcoin_threshold_scale: float = 0.2
    # Number of disjoint public-coin batches combined by majority vote.
    pubcoin_batches: int = 9
    # Users assigned to the deviation detector in the private asymmetric
    # combined protocol: ceil(constant / eps^2).
    detector_users_constant: float = 25.0
    # Domain-compression quality, estimated empirically: a random balanced
    # partition keeps at least compression_bias_fraction * delta * sqrt(2/k)
    # of the distance with probability >= compression_success_rate.
    compression_bias_fraction: float = 0.5
    compression_success_rate: float = 0.3

    def with_overrides(self, overrides: Mapping[str, float] | None) -> "ProtocolConstants":
        if not overrides:
            return self
        known = {f.name for f in dataclasses.fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ValueError(f"unknown constant overrides: {sorted(unknown)}")
        return dataclasses.replace(self, **dict(overrides))


DEFAULT_CONSTANTS = ProtocolConstants()
