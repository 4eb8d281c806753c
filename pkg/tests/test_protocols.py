import json
import math

import numpy as np
import pytest

from userldp.constants import DEFAULT_CONSTANTS
from userldp.distributions import (
    DiscreteDistribution,
    make_heavy_set_instance,
    make_paninski_instance,
)
from userldp.hadamard import HadamardPlan
from userldp.mean_test import Decision
from userldp.protocols import (
    InsufficientUsersError,
    Mode,
    ProtocolParams,
    run_asymmetric_hadamard,
    run_baseline_repetition,
    run_combined,
    run_large_m,
    run_public_coin,
)
from userldp.randomizers import PrivacyParams


def params_with_eps(epsilon=None, **kwargs):
    priv = PrivacyParams.private(epsilon) if epsilon is not None else PrivacyParams.non_private()
    base = dict(k=16, m=5, n=3000, delta=0.45, seed=7, privacy=priv)
    base.update(kwargs)
    return ProtocolParams(**base)


def accept_rate(run, p, dist, trials=40):
    return sum(run(p, dist, np.random.default_rng([p.seed, t])).accepted for t in range(trials)) / trials


UNIFORM16 = DiscreteDistribution.uniform(16)
PANINSKI16 = make_paninski_instance(16, 0.45)


def test_every_protocol_is_deterministic_given_seed():
    heavy = make_heavy_set_instance(16, HadamardPlan.of_order(16).chi_set(2).tolist(), 0.4)
    cases = [
        (run_asymmetric_hadamard, params_with_eps(n=200)),
        (run_large_m, params_with_eps(m=101, n=20)),
        (run_combined, params_with_eps(n=500)),
        (run_combined, params_with_eps(1.0, n=2000, mode=Mode.SYMMETRIC)),
        (run_public_coin, params_with_eps(n=450)),
        (run_baseline_repetition, params_with_eps(1.0, m=9, n=50)),
    ]
    for run, p in cases:
        a = run(p, heavy)
        b = run(p, heavy)
        assert a.decision == b.decision
        assert json.dumps(a.transcript, sort_keys=True) == json.dumps(b.transcript, sort_keys=True)


def test_asymmetric_hadamard_power_quick():
    # N = 50 sqrt(k)/gamma^2 per the fixed-allocation budget, gamma = 1 here.
    p = params_with_eps(n=200 * 15)
    assert accept_rate(run_asymmetric_hadamard, p, UNIFORM16) >= 2 / 3
    assert 1 - accept_rate(run_asymmetric_hadamard, p, PANINSKI16) >= 2 / 3


def test_asymmetric_hadamard_private_gamma_halves_exactly():
    non_private = run_asymmetric_hadamard(params_with_eps(n=300), UNIFORM16)
    private = run_asymmetric_hadamard(params_with_eps(math.log(3.0), n=300), UNIFORM16)
    ratio = private.transcript["mean_test"]["gamma"] / non_private.transcript["mean_test"]["gamma"]
    assert ratio == pytest.approx(0.5, rel=1e-12)


def test_asymmetric_hadamard_requires_enough_users():
    with pytest.raises(InsufficientUsersError):
        run_asymmetric_hadamard(params_with_eps(n=10), UNIFORM16)


def test_asymmetric_hadamard_drops_excess_users():
    p = params_with_eps(k=8, n=17)
    verdict = run_asymmetric_hadamard(p, UNIFORM16)
    info = verdict.transcript["mean_test"]
    assert info["users"] == 14
    assert info["users_dropped"] == 3
    assert verdict.transcript["bits_per_user"] == 1


def test_large_m_power_quick():
    k, m, n = 16, 401, 30
    extra = 3.0 * math.sqrt(math.log(20.0 * n * k) / m)
    heavy = make_heavy_set_instance(k, HadamardPlan.of_order(k).chi_set(2).tolist(), extra)
    p = params_with_eps(m=m, n=n)
    assert accept_rate(run_large_m, p, UNIFORM16, trials=60) >= 0.9
    assert 1 - accept_rate(run_large_m, p, heavy, trials=60) >= 0.9


def test_large_m_private_floor():
    # Randomized response keeps both guarantees above (2 e^eps + 1)/(3 (e^eps + 1)).
    k, m, n = 16, 401, 60
    extra = 0.45
    heavy = make_heavy_set_instance(k, HadamardPlan.of_order(k).chi_set(2).tolist(), extra)
    p = params_with_eps(1.0, m=m, n=n)
    floor = (2 * math.e + 1) / (3 * (math.e + 1))
    assert accept_rate(run_large_m, p, UNIFORM16, trials=80) >= floor
    assert 1 - accept_rate(run_large_m, p, heavy, trials=80) >= floor


def test_combined_asymmetric_power_quick():
    p = params_with_eps(1.0, n=9000)
    assert accept_rate(run_combined, p, UNIFORM16) >= 2 / 3
    assert 1 - accept_rate(run_combined, p, PANINSKI16) >= 2 / 3


def test_combined_rejects_paninski_through_mean_branch():
    # At m=5 the deviation threshold exceeds m/2, so that branch cannot fire.
    p = params_with_eps(1.0, n=9000, seed=3)
    verdict = run_combined(p, PANINSKI16)
    assert verdict.decision is Decision.REJECT
    assert verdict.transcript["large_m"]["decision"] == "accept"
    assert verdict.transcript["mean_test"]["decision"] == "reject"


def test_combined_rejects_heavy_set_through_deviation_branch():
    heavy = make_heavy_set_instance(16, HadamardPlan.of_order(16).chi_set(3).tolist(), 0.45)
    p = params_with_eps(1.0, m=401, n=2000, seed=4)
    verdict = run_combined(p, heavy)
    assert verdict.decision is Decision.REJECT
    assert verdict.transcript["large_m"]["decision"] == "reject"


def test_combined_symmetric_power_quick():
    p = params_with_eps(1.0, n=12000, mode=Mode.SYMMETRIC)
    assert accept_rate(run_combined, p, UNIFORM16) >= 2 / 3
    assert 1 - accept_rate(run_combined, p, PANINSKI16) >= 2 / 3


def test_combined_symmetric_transcript_budget():
    p = params_with_eps(1.0, n=500, mode=Mode.SYMMETRIC)
    t = run_combined(p, UNIFORM16).transcript
    assert t["per_message_epsilon"] == [0.5, 0.5]
    assert sum(t["per_message_epsilon"]) == 1.0
    assert t["bits_per_user"] == 2
    assert t["group_index_bits_per_user"] == 4
    assert t["group_index_epsilon_cost"] == 0.0
    assert t["rr_passes_per_raw_bit"] == 1
    # Message budget: one group index plus two bits.
    assert t["bits_per_user"] + t["group_index_bits_per_user"] <= 1 + math.ceil(math.log2(16)) + 1


def test_combined_asymmetric_transcript_budget():
    t = run_combined(params_with_eps(1.0, n=500), UNIFORM16).transcript
    assert t["per_message_epsilon"] == [1.0]
    assert t["bits_per_user"] == 1
    assert t["detector_users"] == 25
    assert t["mean_users"] == 475
    non_private = run_combined(params_with_eps(n=500), UNIFORM16).transcript
    assert non_private["detector_users"] == 1
    assert non_private["per_message_epsilon"] == []
    assert non_private["rr_passes_per_raw_bit"] == 0


def test_combined_insufficient_users():
    with pytest.raises(InsufficientUsersError):
        run_combined(params_with_eps(1.0, n=30), UNIFORM16)
    with pytest.raises(InsufficientUsersError):
        run_combined(params_with_eps(1.0, n=20, mode=Mode.SYMMETRIC), UNIFORM16)


def test_public_coin_quick_power():
    uni = DiscreteDistribution.uniform(64)
    pan = make_paninski_instance(64, 0.45)
    p = params_with_eps(1.0, k=64, n=27000)
    assert accept_rate(run_public_coin, p, uni, trials=60) >= 2 / 3
    assert 1 - accept_rate(run_public_coin, p, pan, trials=60) >= 2 / 3


def test_public_coin_single_batch_is_weaker():
    # One batch succeeds only with modest probability; the majority over nine
    # disjoint batches is what lifts the guarantee.
    pan = make_paninski_instance(64, 0.45)
    single = params_with_eps(
        1.0, k=64, n=3000, seed=11,
        constants=DEFAULT_CONSTANTS.with_overrides({"pubcoin_batches": 1}),
    )
    majority = params_with_eps(1.0, k=64, n=27000, seed=11)
    reject_single = 1 - accept_rate(run_public_coin, single, pan, trials=100)
    reject_majority = 1 - accept_rate(run_public_coin, majority, pan, trials=100)
    assert reject_single < reject_majority
    assert reject_single <= 0.9
    assert reject_majority >= 2 / 3


def test_public_coin_requires_one_user_per_batch():
    with pytest.raises(InsufficientUsersError):
        run_public_coin(params_with_eps(1.0, n=5), UNIFORM16)


def test_public_coin_transcript():
    p = params_with_eps(1.0, n=95)
    t = run_public_coin(p, UNIFORM16).transcript
    assert t["batches"] == 9
    assert t["users_per_batch"] == 10
    assert t["users_dropped"] == 5
    assert t["bits_per_user"] == 1
    assert len(t["batch_stats"]) == 9


def test_baseline_point_mass_statistic():
    point = DiscreteDistribution.from_list([1.0] + [0.0] * 7)
    p = params_with_eps(k=8, m=4, n=20)
    verdict = run_baseline_repetition(p, point)
    assert verdict.transcript["statistic"] == pytest.approx((8 - 1) / 8)
    assert verdict.transcript["noise_scale"] == 0.0


def test_baseline_uniform_mean_matches_expectation():
    p = params_with_eps(k=16, m=8, n=100)
    uni = UNIFORM16
    stats = [
        run_baseline_repetition(p, uni, np.random.default_rng([9, t])).transcript["statistic"]
        for t in range(200)
    ]
    stats = np.array(stats)
    expected = (1 - 1 / 16) ** 8
    se = stats.std(ddof=1) / math.sqrt(stats.size)
    assert abs(stats.mean() - expected) <= 5 * se


def test_baseline_m1_never_rejects():
    p = params_with_eps(1.0, k=16, m=1, n=500)
    assert accept_rate(run_baseline_repetition, p, PANINSKI16, trials=50) == 1.0


def test_baseline_rejects_m_above_k():
    with pytest.raises(ValueError):
        run_baseline_repetition(params_with_eps(k=8, m=9, n=10), DiscreteDistribution.uniform(8))


def test_baseline_power_with_enough_users():
    p = params_with_eps(1.0, k=16, m=9, n=60_000)
    assert accept_rate(run_baseline_repetition, p, UNIFORM16, trials=50) >= 2 / 3
    assert 1 - accept_rate(run_baseline_repetition, p, PANINSKI16, trials=50) >= 2 / 3


def test_protocol_params_validation():
    with pytest.raises(ValueError):
        ProtocolParams(k=12, m=1, n=1, delta=0.4)
    with pytest.raises(ValueError):
        ProtocolParams(k=8, m=0, n=1, delta=0.4)
    with pytest.raises(ValueError):
        ProtocolParams(k=8, m=1, n=1, delta=1.5)


def test_combined_nonprivate_accepts_generously():
    # Without privacy noise both branches are quiet on uniform input, so the
    # joint accept rate clears 8/10.
    p = params_with_eps(n=6000)
    assert accept_rate(run_combined, p, UNIFORM16, trials=60) >= 0.8
    assert 1 - accept_rate(run_combined, p, PANINSKI16, trials=60) >= 0.8
