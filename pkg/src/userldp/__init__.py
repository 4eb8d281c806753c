"""One-bit uniformity testing with many samples per user, under user-level local privacy.

Library layout: distributions and test instances (``distributions``), the
implicit Sylvester structure (``hadamard``), client randomizers
(``randomizers``), server-side mean testing (``mean_test``), end-to-end
protocols (``protocols``), exact oracles (``oracles``), and the experiment
harness (``harness``, ``verification``, ``cli``).
"""

from .constants import DEFAULT_CONSTANTS, ProtocolConstants
from .distributions import (
    DiscreteDistribution,
    SampleBatch,
    make_heavy_set_instance,
    make_paninski_instance,
    sample_batch,
    tv_distance,
)
from .hadamard import (
    GroupBiasVector,
    HadamardPlan,
    chi_membership,
    fwht,
    group_biases,
    norm_preservation_check,
)
from .harness import (
    ConfigError,
    ExperimentConfig,
    MinUsersNotFound,
    PowerEstimate,
    emit_scaling_csv,
    estimate_power,
    find_min_n,
    wilson_interval,
)
from .mean_test import (
    CoordinateCounts,
    Decision,
    MeanTestResult,
    asymmetric_mean_test,
    multinomial_allocate,
    symmetric_mean_test,
)
from .oracles import (
    Allocation,
    StochasticMatrix,
    exact_mean_Z,
    exact_rr_bias,
    exact_threshold_bias,
    lemma_constant_sweep,
    lower_bound_witness,
)
from .protocols import (
    InsufficientUsersError,
    Mode,
    ProtocolParams,
    Verdict,
    run_asymmetric_hadamard,
    run_baseline_repetition,
    run_combined,
    run_large_m,
    run_public_coin,
)
from .randomizers import (
    BalancedPartition,
    MessageKind,
    PrivacyParams,
    UserMessage,
    compress_bit,
    draw_balanced_partition,
    large_m_flag,
    randomized_response,
    threshold_bit,
)
from .verification import run_verification_suite

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "BalancedPartition",
    "ConfigError",
    "CoordinateCounts",
    "DEFAULT_CONSTANTS",
    "Decision",
    "DiscreteDistribution",
    "ExperimentConfig",
    "GroupBiasVector",
    "HadamardPlan",
    "InsufficientUsersError",
    "MeanTestResult",
    "MessageKind",
    "MinUsersNotFound",
    "Mode",
    "PowerEstimate",
    "PrivacyParams",
    "ProtocolConstants",
    "ProtocolParams",
    "SampleBatch",
    "StochasticMatrix",
    "UserMessage",
    "Verdict",
    "asymmetric_mean_test",
    "chi_membership",
    "compress_bit",
    "draw_balanced_partition",
    "emit_scaling_csv",
    "estimate_power",
    "exact_mean_Z",
    "exact_rr_bias",
    "exact_threshold_bias",
    "find_min_n",
    "fwht",
    "group_biases",
    "large_m_flag",
    "lemma_constant_sweep",
    "lower_bound_witness",
    "make_heavy_set_instance",
    "make_paninski_instance",
    "multinomial_allocate",
    "norm_preservation_check",
    "randomized_response",
    "run_asymmetric_hadamard",
    "run_baseline_repetition",
    "run_combined",
    "run_large_m",
    "run_public_coin",
    "run_verification_suite",
    "sample_batch",
    "symmetric_mean_test",
    "threshold_bit",
    "tv_distance",
    "wilson_interval",
]
