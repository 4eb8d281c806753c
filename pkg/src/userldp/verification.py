"""Verification suite: every closed-form claim checked against brute force or Monte Carlo.

Each check is callable on its own (the acceptance tests pin exact grid sizes
and tolerances); ``run_verification_suite`` bundles them for the CLI, with a
trial-scale knob so quick runs stay cheap.  Tolerances are sized so that the
pass/fail verdicts are stable across seeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import DEFAULT_CONSTANTS, ProtocolConstants
from .distributions import DiscreteDistribution, make_paninski_instance, tv_distance
from .hadamard import HadamardPlan, norm_preservation_check
from .harness import ExperimentConfig, estimate_power
from .oracles import (
    Allocation,
    StochasticMatrix,
    exact_mean_Z,
    exact_threshold_bias,
    fixed_variance_bound,
    lemma_constant_sweep,
    lower_bound_witness,
    multinomial_variance_bound,
)
from .randomizers import PrivacyParams, compression_bias, draw_balanced_partition, rr_max_likelihood_ratio

BIAS_RATIO_FLOOR = 1.0 / 100.0
IDENTITY_TOL = 1e-12
WITNESS_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.detail}"


@dataclass(frozen=True)
class VerificationReport:
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list[str]:
        return [c.line() for c in self.checks]

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [
                {"name": c.name, "passed": c.passed, "detail": c.detail} for c in self.checks
            ],
        }


def check_threshold_bias_sweep(max_m: int = 201, alpha_points: int = 50) -> CheckResult:
    """Exact bit bias dominates min(sqrt(m)*alpha, 1)/100 on the full grid, and is 0 at alpha=0."""
    m_grid = range(1, max_m + 1, 2)
    alpha_grid = [0.5 * (i + 1) / alpha_points for i in range(alpha_points)]
    report = lemma_constant_sweep(m_grid, alpha_grid)
    zero_ok = all(exact_threshold_bias(m, 0.0) == 0.0 for m in m_grid)
    passed = report.min_ratio >= BIAS_RATIO_FLOOR and zero_ok
    detail = (
        f"min ratio {report.min_ratio:.4f} at (m={report.argmin_m}, "
        f"alpha={report.argmin_alpha:.3f}), floor {BIAS_RATIO_FLOOR}; zero-bias exact: {zero_ok}"
    )
    return CheckResult("threshold-bias-sweep", passed, detail)


def check_norm_preservation(seed: int = 0, dists_per_k: int = 100, max_t: int = 8) -> CheckResult:
    """Subset-energy identity holds to 1e-12 and the bias energy dominates tv^2, for random inputs."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(101,)))
    worst_gap = 0.0
    dominance_ok = True
    for t in range(1, max_t + 1):
        k = 1 << t
        plan = HadamardPlan.of_order(k)
        uniform = DiscreteDistribution.uniform(k)
        for i in range(dists_per_k):
            alpha = 1.0 if i % 2 == 0 else 0.2
            p = DiscreteDistribution(rng.dirichlet(np.full(k, alpha)))
            lhs, rhs = norm_preservation_check(plan, p)
            worst_gap = max(worst_gap, abs(lhs - rhs))
            member = plan.membership_matrix().astype(np.float64)
            biases = member.T @ p.probs - 0.5
            energy = float((biases[1:] ** 2).sum())
            tv = tv_distance(p, uniform)
            if energy < tv * tv - IDENTITY_TOL:
                dominance_ok = False
    passed = worst_gap <= IDENTITY_TOL and dominance_ok
    detail = (
        f"max |lhs-rhs| {worst_gap:.3e} (tol {IDENTITY_TOL}); "
        f"bias energy >= tv^2: {dominance_ok}"
    )
    return CheckResult("norm-preservation-identity", passed, detail)


_MOMENT_GRID_D = (4, 64)
_MOMENT_GRID_N = (10, 100)


def _moment_grid_means(d: int) -> list[np.ndarray]:
    zero = np.zeros(d)
    single = np.zeros(d)
    single[0] = 0.4
    dense = np.full(d, 1.0 / math.sqrt(d))
    return [zero, single, dense]


def _simulate_fixed_Z(mu, n, trials, rng) -> np.ndarray:
    d = mu.size
    p_up = (1.0 + mu) / 2.0
    ups = rng.binomial(n, p_up, size=(trials, d))
    xbar = (2.0 * ups - n) / n
    return (xbar**2).sum(axis=1) - d / n


def _simulate_multinomial_Z(mu, n, trials, rng) -> np.ndarray:
    d = mu.size
    p_up = (1.0 + mu) / 2.0
    n_j = rng.multinomial(n * d, np.full(d, 1.0 / d), size=trials)
    ups = rng.binomial(n_j, p_up)
    s_j = 2 * ups - n_j
    xbar = s_j / n
    return (xbar**2).sum(axis=1) - d / n


def _variance_se(z: np.ndarray) -> float:
    centred = z - z.mean()
    m2 = float((centred**2).mean())
    m4 = float((centred**4).mean())
    return math.sqrt(max(m4 - m2 * m2, 0.0) / z.size)


def check_moment_formulas(seed: int = 0, trials: int = 100_000) -> CheckResult:
    """MC mean and variance of the squared-norm statistic against the closed forms, 5 SE."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(102,)))
    worst_mean_z = 0.0
    worst_var_excess = -math.inf
    for d in _MOMENT_GRID_D:
        for n in _MOMENT_GRID_N:
            for mu in _moment_grid_means(d):
                for allocation, simulate, bound in (
                    (Allocation.FIXED, _simulate_fixed_Z, fixed_variance_bound),
                    (Allocation.MULTINOMIAL, _simulate_multinomial_Z, multinomial_variance_bound),
                ):
                    z = simulate(mu, n, trials, rng)
                    expected = exact_mean_Z(mu, n, allocation)
                    se = max(float(z.std(ddof=1)) / math.sqrt(trials), 1e-300)
                    worst_mean_z = max(worst_mean_z, abs(float(z.mean()) - expected) / se)
                    var_excess = (float(z.var(ddof=1)) - bound(mu, n)) / max(_variance_se(z), 1e-300)
                    worst_var_excess = max(worst_var_excess, var_excess)
    # Pinned example: multinomial allocation, n=4, d=2, ||mu||^2 = 1 has mean
    # (1 - 1/(n d)) = 0.875 (oracle-computed; enumeration and MC agree).
    mu = np.full(2, 1.0 / math.sqrt(2.0))
    expected = exact_mean_Z(mu, 4, Allocation.MULTINOMIAL)
    example_ok = abs(expected - 0.875) < 1e-15
    z = _simulate_multinomial_Z(mu, 4, min(10 * trials, 1_000_000), rng)
    se = float(z.std(ddof=1)) / math.sqrt(z.size)
    example_z = abs(float(z.mean()) - expected) / se
    passed = worst_mean_z <= 5.0 and worst_var_excess <= 5.0 and example_ok and example_z <= 5.0
    detail = (
        f"max |mean z-score| {worst_mean_z:.2f}, max variance excess {worst_var_excess:.2f} SE "
        f"(limits 5); pinned mean 0.875 off by {example_z:.2f} SE"
    )
    return CheckResult("statistic-moment-formulas", passed, detail)


def check_rr_privacy(epsilons=(0.1, math.log(3.0), 2.0)) -> CheckResult:
    """Worst-case likelihood ratio of the response matrix equals e^eps, analytically."""
    worst_rel = 0.0
    for eps in epsilons:
        ratio = rr_max_likelihood_ratio(PrivacyParams.private(eps))
        worst_rel = max(worst_rel, abs(ratio - math.exp(eps)) / math.exp(eps))
    passed = worst_rel <= 1e-12
    return CheckResult(
        "randomized-response-privacy",
        passed,
        f"max relative ratio error {worst_rel:.3e} over eps={tuple(round(e, 6) for e in epsilons)}",
    )


def check_witness(seed: int = 0, per_shape: int = 100,
                  shapes=((8, 2), (16, 3), (64, 5))) -> CheckResult:
    """Indistinguishable instances: valid distribution, TV exactly 1/k, tiny channel residual."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(103,)))
    worst_resid = 0.0
    worst_tv_err = 0.0
    for k, bits in shapes:
        uniform = DiscreteDistribution.uniform(k)
        for _ in range(per_shape):
            channel = StochasticMatrix.random(k, bits, rng)
            p = lower_bound_witness(channel)
            resid = float(np.abs(channel.matrix.T @ (p.probs - uniform.probs)).max())
            worst_resid = max(worst_resid, resid)
            worst_tv_err = max(worst_tv_err, abs(tv_distance(p, uniform) - 1.0 / k))
    passed = worst_resid <= WITNESS_RESIDUAL_TOL and worst_tv_err <= IDENTITY_TOL
    detail = (
        f"max channel residual {worst_resid:.3e} (tol {WITNESS_RESIDUAL_TOL}), "
        f"max |tv - 1/k| {worst_tv_err:.3e}"
    )
    return CheckResult("lower-bound-witness", passed, detail)


def check_large_m_power(
    seed: int = 0,
    trials: int = 200,
    constants: ProtocolConstants = DEFAULT_CONSTANTS,
    threads: int = 1,
) -> CheckResult:
    """Deviation tester accepts uniform and rejects a single overloaded subset (MC)."""
    k, m, n = 64, 401, 40
    extra = 3.0 * math.sqrt(math.log(20.0 * n * k) / m)
    overrides = {
        f.name: getattr(constants, f.name) for f in constants.__dataclass_fields__.values()  # type: ignore[attr-defined]
    }
    base = dict(
        protocol="large_m", k=k, m=m, n=n, delta=0.45, trials=trials, seed=seed,
        constants=overrides,
    )
    accept = estimate_power(
        ExperimentConfig(instance={"kind": "uniform"}, **base), threads=threads
    )
    reject = estimate_power(
        ExperimentConfig(instance={"kind": "heavy_set", "column": 2, "extra": extra}, **base),
        threads=threads,
    )
    passed = accept.accept_rate >= 0.75 and reject.reject_rate >= 0.75
    detail = (
        f"uniform accept rate {accept.accept_rate:.3f}, overloaded-subset reject rate "
        f"{reject.reject_rate:.3f} (floors 0.75, bias {extra:.3f})"
    )
    return CheckResult("large-m-power", passed, detail)


def check_compression_constants(
    seed: int = 0,
    partitions: int = 1000,
    constants: ProtocolConstants = DEFAULT_CONSTANTS,
) -> CheckResult:
    """Random balanced partitions keep a c1*delta*sqrt(2/k) bias with rate >= c2 (MC)."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(104,)))
    c1 = constants.compression_bias_fraction
    c2 = constants.compression_success_rate
    worst_rate = 1.0
    for k, delta in ((16, 0.3), (64, 0.45)):
        p = make_paninski_instance(k, delta)
        cut = c1 * delta * math.sqrt(2.0 / k)
        hits = 0
        for _ in range(partitions):
            partition = draw_balanced_partition(k, rng)
            if abs(compression_bias(p.probs, partition)) >= cut:
                hits += 1
        worst_rate = min(worst_rate, hits / partitions)
    passed = worst_rate >= c2
    detail = f"worst retention rate {worst_rate:.3f} at bias floor c1={c1} (need >= {c2})"
    return CheckResult("domain-compression-constants", passed, detail)


def run_verification_suite(
    seed: int = 0,
    constants_overrides: dict | None = None,
    trials_scale: float = 1.0,
    threads: int = 1,
) -> VerificationReport:
    """Run every check; grid sizes scale with ``trials_scale`` (1.0 = full acceptance sizes)."""
    constants = DEFAULT_CONSTANTS.with_overrides(constants_overrides)

    def scaled(base: int, floor: int) -> int:
        return max(floor, int(base * trials_scale))

    checks = (
        check_threshold_bias_sweep(),
        check_norm_preservation(seed=seed, dists_per_k=scaled(100, 5)),
        check_moment_formulas(seed=seed, trials=scaled(100_000, 2_000)),
        check_rr_privacy(),
        check_witness(seed=seed, per_shape=scaled(100, 5)),
        check_large_m_power(seed=seed, trials=scaled(200, 30), constants=constants,
                            threads=threads),
        check_compression_constants(seed=seed, partitions=scaled(1000, 200),
                                    constants=constants),
    )
    return VerificationReport(checks=checks)
