"""Reproducible experiment driver: power estimation, minimum-user search, sweeps.

Random streams follow a documented counter scheme so that parallel and serial
runs agree: the trial-level generator for key (a, b, ...) under master seed s
is ``np.random.default_rng(np.random.SeedSequence(entropy=s, spawn_key=(a, b, ...)))``.
Power estimates use key (trial,); the minimum-user search evaluates candidate
n with keys (n, which_instance, trial), which also makes every evaluation
independent of the search path.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .constants import DEFAULT_CONSTANTS
from .distributions import (
    DiscreteDistribution,
    make_heavy_set_instance,
    make_paninski_instance,
)
from .hadamard import HadamardPlan
from .mean_test import Decision
from .protocols import PROTOCOLS, InsufficientUsersError, Mode, ProtocolParams, Verdict
from .randomizers import PrivacyParams

WILSON_Z = 1.959963984540054  # two-sided 95%


class ConfigError(ValueError):
    """The experiment configuration is malformed."""


class MinUsersNotFound(RuntimeError):
    """No n in the searched range met the error targets."""

    def __init__(self, message: str, trace: list):
        super().__init__(message)
        self.trace = trace


def trial_rng(seed: int, *key: int) -> np.random.Generator:
    """Substream for one unit of work; see the module docstring for the scheme."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(key)))


def wilson_interval(successes: int, trials: int, z: float = WILSON_Z) -> tuple[float, float]:
    """Closed-form Wilson 95% score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("trials must be positive")
    if not 0 <= successes <= trials:
        raise ValueError("successes must lie in 0..trials")
    p_hat = successes / trials
    denom = 1.0 + z * z / trials
    centre = (p_hat + z * z / (2.0 * trials)) / denom
    half = z * math.sqrt(p_hat * (1.0 - p_hat) / trials + z * z / (4.0 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass(frozen=True)
class PowerEstimate:
    accepts: int
    trials: int
    point: float
    ci_low: float
    ci_high: float

    def __post_init__(self):
        if not (0.0 <= self.ci_low <= self.point <= self.ci_high <= 1.0):
            raise ValueError("interval bounds must satisfy low <= point <= high in [0, 1]")

    @property
    def accept_rate(self) -> float:
        return self.point

    @property
    def reject_rate(self) -> float:
        return 1.0 - self.point

    @property
    def half_width(self) -> float:
        return (self.ci_high - self.ci_low) / 2.0

    @classmethod
    def from_counts(cls, accepts: int, trials: int) -> "PowerEstimate":
        low, high = wilson_interval(accepts, trials)
        point = accepts / trials
        # The score interval contains p-hat in exact arithmetic; guard the
        # boundary cases (p-hat 0 or 1) against float rounding.
        return cls(accepts=accepts, trials=trials, point=point,
                   ci_low=min(low, point), ci_high=max(high, point))


_INSTANCE_KINDS = ("uniform", "paninski", "heavy_set", "explicit")


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a protocol, its parameters, an input instance, and trial counts."""

    protocol: str
    k: int
    m: int
    n: int
    delta: float
    instance: Mapping
    epsilon: Optional[float] = None
    mode: str = Mode.ASYMMETRIC.value
    trials: int = 300
    target_error: float = 1.0 / 3.0
    seed: int = 0
    constants: Mapping[str, float] = field(default_factory=dict)
    output_path: Optional[str] = None

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ConfigError(
                f"unknown protocol {self.protocol!r}; choose from {sorted(PROTOCOLS)}"
            )
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if not 0.0 < self.target_error < 0.5:
            raise ConfigError("target error must lie in (0, 1/2)")
        if self.mode not in (Mode.SYMMETRIC.value, Mode.ASYMMETRIC.value):
            raise ConfigError(f"unknown mode {self.mode!r}")
        kind = dict(self.instance).get("kind")
        if kind not in _INSTANCE_KINDS:
            raise ConfigError(f"unknown instance kind {kind!r}; choose from {_INSTANCE_KINDS}")
        try:
            self.params(n=self.n)
            instance = self.build_instance()
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if instance.k != self.k:
            raise ConfigError(
                f"instance is over {instance.k} symbols but the experiment sets k={self.k}"
            )

    @classmethod
    def from_dict(cls, raw: Mapping) -> "ExperimentConfig":
        known = {f.name for f in cls.__dataclass_fields__.values()}  # type: ignore[attr-defined]
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = {"protocol", "k", "m", "n", "delta", "instance"} - set(raw)
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json_file(cls, path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(raw)

    def params(self, n: Optional[int] = None) -> ProtocolParams:
        privacy = (
            PrivacyParams.private(self.epsilon) if self.epsilon is not None
            else PrivacyParams.non_private()
        )
        return ProtocolParams(
            k=self.k,
            m=self.m,
            n=self.n if n is None else n,
            privacy=privacy,
            delta=self.delta,
            mode=Mode(self.mode),
            seed=self.seed,
            constants=DEFAULT_CONSTANTS.with_overrides(dict(self.constants)),
        )

    def build_instance(self) -> DiscreteDistribution:
        return build_instance(dict(self.instance), self.k)


def build_instance(spec: dict, k: int) -> DiscreteDistribution:
    """Materialise an instance spec: uniform, paninski, heavy_set, or explicit probs."""
    kind = spec.get("kind")
    if kind == "uniform":
        return DiscreteDistribution.uniform(k)
    if kind == "paninski":
        return make_paninski_instance(k, float(spec["delta"]))
    if kind == "heavy_set":
        if "column" in spec:
            subset = HadamardPlan.of_order(k).chi_set(int(spec["column"])).tolist()
        elif "set" in spec:
            subset = list(spec["set"])
        else:
            raise ConfigError("heavy_set instance needs a 'set' or a 'column'")
        return make_heavy_set_instance(k, subset, float(spec["extra"]))
    if kind == "explicit":
        return DiscreteDistribution.from_list(spec["probs"])
    raise ConfigError(f"unknown instance kind {kind!r}")


def _run_trials(
    config: ExperimentConfig,
    dist: DiscreteDistribution,
    n: int,
    trials: int,
    key_prefix: tuple[int, ...],
    threads: int,
    registry: Mapping,
) -> int:
    """Number of accepting runs; aggregation is a count, so worker order is irrelevant."""
    run = registry[config.protocol]
    params = config.params(n=n)

    def one(trial: int) -> bool:
        rng = trial_rng(config.seed, *key_prefix, trial)
        verdict: Verdict = run(params, dist, rng)
        return verdict.decision is Decision.ACCEPT

    if threads <= 1:
        return sum(one(t) for t in range(trials))
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return sum(pool.map(one, range(trials)))


def estimate_power(
    config: ExperimentConfig,
    threads: int = 1,
    trials: Optional[int] = None,
    registry: Mapping = PROTOCOLS,
) -> PowerEstimate:
    """Accept frequency of the configured protocol on the configured instance."""
    trials = config.trials if trials is None else trials
    dist = config.build_instance()
    accepts = _run_trials(config, dist, config.n, trials, (), threads, registry)
    return PowerEstimate.from_counts(accepts, trials)


def _error_rates(
    config: ExperimentConfig,
    n: int,
    trials: int,
    threads: int,
    registry: Mapping,
) -> dict:
    """Type-I (reject uniform) and type-II (accept the far instance) at sample size n."""
    uniform = DiscreteDistribution.uniform(config.k)
    far = config.build_instance()
    try:
        accepts_unif = _run_trials(config, uniform, n, trials, (n, 0), threads, registry)
        accepts_far = _run_trials(config, far, n, trials, (n, 1), threads, registry)
    except InsufficientUsersError as exc:
        # Too few users to run at all certainly does not meet the targets.
        return {"n": n, "type1": 1.0, "type2": 1.0, "passes": False, "note": str(exc)}
    type1 = PowerEstimate.from_counts(trials - accepts_unif, trials)
    type2 = PowerEstimate.from_counts(accepts_far, trials)
    target = config.target_error
    passes = (
        type1.point <= target + type1.half_width
        and type2.point <= target + type2.half_width
    )
    return {
        "n": n,
        "type1": type1.point,
        "type2": type2.point,
        "passes": passes,
    }


def find_min_n(
    config: ExperimentConfig,
    n_range: tuple[int, int],
    trials: Optional[int] = None,
    threads: int = 1,
    registry: Mapping = PROTOCOLS,
    return_trace: bool = False,
    min_step: int = 1,
):
    """Smallest n in the range meeting both error targets, by doubling then bisection.

    Doubling from the low end serves as the coarse monotonicity scan; the first
    passing n is re-confirmed before bisecting the bracket below it.  Every
    evaluation draws its own substreams keyed by n, so the result does not
    depend on the path taken.  ``min_step`` stops the bisection once the
    bracket is that narrow (the returned n then overshoots the true boundary
    by at most min_step).  Raises MinUsersNotFound (with the scan trace) when
    the range is exhausted.
    """
    trials = config.trials if trials is None else trials
    lo, hi = n_range
    if not 1 <= lo <= hi:
        raise ValueError("need 1 <= lo <= hi")
    if dict(config.instance).get("kind") == "uniform":
        raise ConfigError("the search needs a far instance to measure type-II error")
    trace: list[dict] = []

    def evaluate(n: int) -> dict:
        record = _error_rates(config, n, trials, threads, registry)
        trace.append(record)
        return record

    n = lo
    first_pass = None
    last_fail = lo - 1
    while True:
        record = evaluate(n)
        if record["passes"]:
            first_pass = n
            break
        last_fail = n
        if n >= hi:
            raise MinUsersNotFound(
                f"no n in [{lo}, {hi}] met the {config.target_error:.3f} error target", trace
            )
        n = min(2 * n, hi)

    # Coarse-scan confirmation: a pass that immediately fails again at a larger
    # n signals a non-monotone power curve, so resume doubling from there.
    if first_pass < hi:
        confirm = evaluate(min(2 * first_pass, hi))
        if not confirm["passes"]:
            n = confirm["n"]
            first_pass = None
            while n < hi:
                n = min(2 * n, hi)
                record = evaluate(n)
                if record["passes"]:
                    first_pass = n
                    break
                last_fail = n
            if first_pass is None:
                raise MinUsersNotFound(
                    f"power not monotone-ish and no pass up to {hi}", trace
                )

    low, high = last_fail, first_pass
    while high - low > max(1, min_step):
        mid = (low + high) // 2
        if evaluate(mid)["passes"]:
            high = mid
        else:
            low = mid
    if return_trace:
        return high, trace
    return high


SCALING_CSV_HEADER = ["protocol", "k", "m", "eps", "delta", "n_required", "ci_low", "ci_high", "seed"]


def scaling_rows(
    config_base: ExperimentConfig,
    m_grid: Sequence[int],
    protocols: Sequence[str],
    n_range: tuple[int, int],
    trials: Optional[int] = None,
    threads: int = 1,
    min_step: int = 1,
) -> list[dict]:
    """Minimum users per (protocol, m) grid point.

    ci_low/ci_high report the final search bracket: the largest failing n plus
    one, and the returned n itself.  Grid points whose search exhausts the
    range get infinite n_required.
    """
    rows = []
    for protocol in protocols:
        for m in m_grid:
            cfg = ExperimentConfig(
                protocol=protocol,
                k=config_base.k,
                m=int(m),
                n=n_range[0],
                delta=config_base.delta,
                instance=config_base.instance,
                epsilon=config_base.epsilon,
                mode=config_base.mode,
                trials=config_base.trials if trials is None else trials,
                target_error=config_base.target_error,
                seed=config_base.seed,
                constants=config_base.constants,
            )
            try:
                n_req, trace = find_min_n(cfg, n_range, trials=trials, threads=threads,
                                          return_trace=True, min_step=min_step)
                fails = [r["n"] for r in trace if not r["passes"] and r["n"] < n_req]
                bracket_low = (max(fails) + 1) if fails else n_range[0]
                row_vals = {"n_required": n_req, "ci_low": bracket_low, "ci_high": n_req}
            except MinUsersNotFound:
                row_vals = {"n_required": math.inf, "ci_low": n_range[1], "ci_high": math.inf}
            rows.append(
                {
                    "protocol": protocol,
                    "k": config_base.k,
                    "m": int(m),
                    "eps": config_base.epsilon if config_base.epsilon is not None else math.inf,
                    "delta": config_base.delta,
                    **row_vals,
                    "seed": config_base.seed,
                }
            )
    return rows


def write_scaling_csv(rows: Sequence[Mapping], path) -> None:
    """Write grid rows with the fixed header; formatting is deterministic."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SCALING_CSV_HEADER)
        for row in rows:
            writer.writerow([_format_cell(row[key]) for key in SCALING_CSV_HEADER])


def emit_scaling_csv(
    config_base: ExperimentConfig,
    m_grid: Sequence[int],
    protocols: Sequence[str],
    n_range: tuple[int, int],
    path,
    trials: Optional[int] = None,
    threads: int = 1,
    min_step: int = 1,
) -> list[dict]:
    rows = scaling_rows(config_base, m_grid, protocols, n_range, trials=trials, threads=threads,
                        min_step=min_step)
    write_scaling_csv(rows, path)
    return rows


def _format_cell(value) -> str:
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        if value == int(value):
            return str(int(value))
        return repr(value)
    return str(value)
