import numpy as np
import pytest

from userldp.distributions import (
    DiscreteDistribution,
    SampleBatch,
    make_heavy_set_instance,
    make_paninski_instance,
    sample_batch,
    tv_distance,
)


def test_point_mass_sampling():
    dist = DiscreteDistribution.from_list([1.0, 0.0])
    batch = sample_batch(dist, 3, np.random.default_rng(0))
    assert batch.m == 3
    assert np.all(batch.symbols == 1)


def test_uniform_sampling_frequency():
    # Binomial concentration: 4 sigma at 1e6 draws is 0.002.
    dist = DiscreteDistribution.uniform(2)
    batch = sample_batch(dist, 10**6, np.random.default_rng(1))
    freq = np.mean(batch.symbols == 1)
    assert abs(freq - 0.5) < 0.002


def test_paninski_sampling_frequency():
    dist = make_paninski_instance(4, 0.2)
    batch = sample_batch(dist, 10**6, np.random.default_rng(2))
    freq = np.mean(batch.symbols == 1)
    assert abs(freq - 0.35) < 0.002


def test_sample_batch_rejects_zero_m():
    with pytest.raises(ValueError):
        sample_batch(DiscreteDistribution.uniform(4), 0, np.random.default_rng(0))


def test_sampling_deterministic_given_stream():
    dist = make_paninski_instance(8, 0.3)
    a = sample_batch(dist, 1000, np.random.default_rng(42)).symbols
    b = sample_batch(dist, 1000, np.random.default_rng(42)).symbols
    assert np.array_equal(a, b)


def test_tv_distance_values():
    u4 = DiscreteDistribution.uniform(4)
    assert tv_distance(u4, u4) == 0.0
    p = DiscreteDistribution.from_list([1.0, 0.0])
    q = DiscreteDistribution.from_list([0.0, 1.0])
    assert tv_distance(p, q) == 1.0
    pan = DiscreteDistribution.from_list([0.35, 0.15, 0.35, 0.15])
    assert tv_distance(pan, u4) == pytest.approx(0.2, abs=1e-15)


def test_tv_distance_rejects_mismatched_domains():
    with pytest.raises(ValueError):
        tv_distance(DiscreteDistribution.uniform(2), DiscreteDistribution.uniform(4))


def test_tv_is_a_metric_on_random_triples():
    rng = np.random.default_rng(3)
    for _ in range(50):
        k = int(rng.integers(2, 40))
        p, q, r = (DiscreteDistribution(rng.dirichlet(np.ones(k))) for _ in range(3))
        assert tv_distance(p, q) == tv_distance(q, p)
        assert tv_distance(p, r) <= tv_distance(p, q) + tv_distance(q, r) + 1e-12


def test_paninski_instance_values():
    assert make_paninski_instance(4, 0.2).probs == pytest.approx([0.35, 0.15, 0.35, 0.15])
    assert make_paninski_instance(2, 0.5).probs == pytest.approx([1.0, 0.0])
    near_uniform = make_paninski_instance(8, 1e-9)
    assert np.allclose(near_uniform.probs, 1 / 8, atol=1e-9)


def test_paninski_distance_is_exact():
    for k in (2, 4, 16, 64, 256):
        for delta in (0.01, 0.2, 0.45, 0.5):
            p = make_paninski_instance(k, delta)
            assert abs(tv_distance(p, DiscreteDistribution.uniform(k)) - delta) < 1e-12


def test_paninski_rejects_bad_arguments():
    with pytest.raises(ValueError):
        make_paninski_instance(5, 0.2)
    with pytest.raises(ValueError):
        make_paninski_instance(4, 0.6)
    with pytest.raises(ValueError):
        make_paninski_instance(4, 0.0)


def test_heavy_set_instance_values():
    p = make_heavy_set_instance(4, {1, 3}, 0.3)
    assert p.probs == pytest.approx([0.4, 0.1, 0.4, 0.1])
    assert p.probs[[0, 2]].sum() == pytest.approx(0.8)
    assert make_heavy_set_instance(2, {1}, 0.25).probs == pytest.approx([0.75, 0.25])


def test_heavy_set_rejects_infeasible_mass():
    with pytest.raises(ValueError):
        make_heavy_set_instance(4, {1, 2, 3, 4}, 0.1)  # cannot exceed total mass 1
    with pytest.raises(ValueError):
        make_heavy_set_instance(4, {1, 3}, 0.6)  # complement would go negative
    with pytest.raises(ValueError):
        make_heavy_set_instance(4, set(), 0.1)
    with pytest.raises(ValueError):
        make_heavy_set_instance(4, {0, 1}, 0.1)


def test_generated_instances_are_valid():
    rng = np.random.default_rng(4)
    instances = [make_paninski_instance(16, 0.37), make_heavy_set_instance(16, range(1, 5), 0.2)]
    instances += [DiscreteDistribution(rng.dirichlet(np.ones(16))) for _ in range(20)]
    for dist in instances:
        assert np.all(dist.probs >= 0)
        assert abs(dist.probs.sum() - 1.0) <= 1e-12


def test_distribution_validation():
    with pytest.raises(ValueError):
        DiscreteDistribution.from_list([0.5])  # k < 2
    with pytest.raises(ValueError):
        DiscreteDistribution.from_list([0.7, 0.2])  # does not sum to 1
    with pytest.raises(ValueError):
        DiscreteDistribution.from_list([1.2, -0.2])  # negative entry


def test_json_round_trip():
    p = make_paninski_instance(8, 0.25)
    q = DiscreteDistribution.from_list(p.to_list())
    assert np.array_equal(p.probs, q.probs)


def test_sample_batch_validation():
    with pytest.raises(ValueError):
        SampleBatch(symbols=np.array([1, 2, 3]), m=2)
    with pytest.raises(ValueError):
        SampleBatch(symbols=np.array([0, 1]), m=2)
