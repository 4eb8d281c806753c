"""Command-line driver.

Subcommands map onto the harness operations: ``verify`` runs the verification
suite, ``power`` estimates accept rates, ``find-n`` searches for the smallest
workable user count, ``scaling`` sweeps m and writes the scaling CSV,
``lower-bound-demo`` builds channel-blind instances, and ``baseline`` compares
the repetition baseline against the combined tester.

Exit codes: 0 success, 1 verification failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .distributions import DiscreteDistribution, tv_distance
from .harness import (
    ConfigError,
    ExperimentConfig,
    MinUsersNotFound,
    emit_scaling_csv,
    estimate_power,
    find_min_n,
    scaling_rows,
    write_scaling_csv,
)
from .oracles import StochasticMatrix, lower_bound_witness
from .verification import run_verification_suite


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
    parser.add_argument("--trials", type=int, default=None, help="Monte Carlo trials (overrides config)")
    parser.add_argument("--out", type=Path, default=None, help="output file path")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for MC trials")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="userldp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_verify = sub.add_parser("verify", help="run the verification suite")
    _add_common(p_verify)
    p_verify.add_argument("--trials-scale", type=float, default=1.0,
                          help="scale factor on Monte Carlo sizes (1.0 = full)")
    p_verify.add_argument("--set", action="append", default=[], metavar="NAME=VALUE",
                          help="override a protocol constant (repeatable)")

    p_power = sub.add_parser("power", help="estimate accept rate for a configured experiment")
    p_power.add_argument("--config", type=Path, required=True)
    p_power.add_argument("--plot", action="store_true", help="render a figure next to --out")
    _add_common(p_power)

    p_findn = sub.add_parser("find-n", help="smallest n meeting the error targets")
    p_findn.add_argument("--config", type=Path, required=True)
    p_findn.add_argument("--n-min", type=int, default=100)
    p_findn.add_argument("--n-max", type=int, default=1_000_000)
    p_findn.add_argument("--n-step", type=int, default=1,
                         help="bisection resolution (smallest bracket width)")
    _add_common(p_findn)

    p_scaling = sub.add_parser("scaling", help="sweep m and emit the scaling CSV")
    p_scaling.add_argument("--config", type=Path, required=True)
    p_scaling.add_argument("--m-grid", type=int, nargs="+", default=[1, 3, 9])
    p_scaling.add_argument("--protocols", nargs="+", default=["combined"])
    p_scaling.add_argument("--n-min", type=int, default=100)
    p_scaling.add_argument("--n-max", type=int, default=1_000_000)
    p_scaling.add_argument("--n-step", type=int, default=1)
    p_scaling.add_argument("--plot", action="store_true", help="render a figure next to the CSV")
    _add_common(p_scaling)

    p_lb = sub.add_parser("lower-bound-demo",
                          help="instances a too-narrow channel cannot distinguish from uniform")
    p_lb.add_argument("--k", type=int, default=16)
    p_lb.add_argument("--bits", type=int, default=3)
    p_lb.add_argument("--instances", type=int, default=5)
    _add_common(p_lb)

    p_base = sub.add_parser("baseline",
                            help="compare the repetition baseline against the combined tester")
    p_base.add_argument("--config", type=Path, required=True)
    p_base.add_argument("--m-grid", type=int, nargs="+", default=[1, 9])
    p_base.add_argument("--n-min", type=int, default=100)
    p_base.add_argument("--n-max", type=int, default=1_000_000)
    p_base.add_argument("--n-step", type=int, default=1)
    p_base.add_argument("--plot", action="store_true")
    _add_common(p_base)

    return parser


def _load_config(args) -> ExperimentConfig:
    config = ExperimentConfig.from_json_file(args.config)
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.trials is not None:
        updates["trials"] = args.trials
    if updates:
        raw = {**_config_as_dict(config), **updates}
        config = ExperimentConfig.from_dict(raw)
    return config


def _output_path(args, config: ExperimentConfig):
    if args.out is not None:
        return args.out
    if config.output_path:
        return Path(config.output_path)
    return None


def _config_as_dict(config: ExperimentConfig) -> dict:
    return {
        "protocol": config.protocol,
        "k": config.k,
        "m": config.m,
        "n": config.n,
        "delta": config.delta,
        "instance": dict(config.instance),
        "epsilon": config.epsilon,
        "mode": config.mode,
        "trials": config.trials,
        "target_error": config.target_error,
        "seed": config.seed,
        "constants": dict(config.constants),
        "output_path": config.output_path,
    }


def _parse_overrides(pairs) -> dict:
    overrides = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"expected NAME=VALUE, got {pair!r}")
        name, value = pair.split("=", 1)
        overrides[name.strip()] = float(value)
    return overrides


def _cmd_verify(args) -> int:
    report = run_verification_suite(
        seed=args.seed if args.seed is not None else 0,
        constants_overrides=_parse_overrides(args.set),
        trials_scale=args.trials_scale,
        threads=args.threads,
    )
    for line in report.lines():
        print(line)
    if args.out:
        args.out.write_text(json.dumps(report.to_json(), indent=2) + "\n")
    return 0 if report.passed else 1


def _cmd_power(args) -> int:
    config = _load_config(args)
    estimate = estimate_power(config, threads=args.threads)
    print(
        f"protocol={config.protocol} n={config.n} m={config.m} accept_rate={estimate.point:.4f} "
        f"ci=[{estimate.ci_low:.4f}, {estimate.ci_high:.4f}] trials={estimate.trials}"
    )
    out = _output_path(args, config)
    if out:
        _write_power_csv(out, config, estimate)
        if args.plot:
            from .report import save_power_figure

            save_power_figure([config.protocol], [estimate], out.with_suffix(".png"))
    return 0


def _write_power_csv(path: Path, config: ExperimentConfig, estimate) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["protocol", "k", "m", "n", "eps", "delta", "instance",
                         "trials", "accepts", "accept_rate", "ci_low", "ci_high", "seed"])
        eps = config.epsilon if config.epsilon is not None else math.inf
        writer.writerow([
            config.protocol, config.k, config.m, config.n, eps, config.delta,
            dict(config.instance).get("kind"), estimate.trials, estimate.accepts,
            repr(estimate.point), repr(estimate.ci_low), repr(estimate.ci_high), config.seed,
        ])


def _cmd_find_n(args) -> int:
    config = _load_config(args)
    try:
        n, trace = find_min_n(config, (args.n_min, args.n_max), threads=args.threads,
                              return_trace=True, min_step=args.n_step)
    except MinUsersNotFound as exc:
        print(f"not found: {exc}", file=sys.stderr)
        for record in exc.trace:
            print(f"  scanned n={record['n']}: type1={record['type1']:.3f} "
                  f"type2={record['type2']:.3f}", file=sys.stderr)
        return 1
    print(f"minimum n = {n}")
    out = _output_path(args, config)
    if out:
        out.write_text(json.dumps({"n_required": n, "trace": trace}, indent=2) + "\n")
    return 0


def _cmd_scaling(args) -> int:
    config = _load_config(args)
    out = _output_path(args, config) or Path("scaling.csv")
    rows = emit_scaling_csv(
        config, args.m_grid, args.protocols, (args.n_min, args.n_max), out,
        threads=args.threads, min_step=args.n_step,
    )
    print(f"wrote {len(rows)} rows to {out}")
    if args.plot:
        from .report import save_scaling_figure

        save_scaling_figure(rows, out.with_suffix(".png"))
        print(f"wrote figure to {out.with_suffix('.png')}")
    return 0


def _cmd_lower_bound_demo(args) -> int:
    seed = args.seed if args.seed is not None else 0
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(7,)))
    k, bits = args.k, args.bits
    uniform = DiscreteDistribution.uniform(k)
    rows = []
    for i in range(args.instances):
        channel = StochasticMatrix.random(k, bits, rng)
        p = lower_bound_witness(channel)
        residual = float(np.abs(channel.matrix.T @ (p.probs - uniform.probs)).max())
        tv = tv_distance(p, uniform)
        rows.append((i, k, bits, repr(tv), repr(residual)))
        print(f"instance {i}: tv={tv:.6f} (target {1.0 / k:.6f}), channel residual {residual:.2e}")
    if args.out:
        import csv

        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["instance", "k", "bits", "tv", "channel_residual"])
            writer.writerows(rows)
    return 0


def _cmd_baseline(args) -> int:
    config = _load_config(args)
    rows = scaling_rows(config, args.m_grid, ["baseline_repetition", "combined"],
                        (args.n_min, args.n_max), threads=args.threads, min_step=args.n_step)
    out = _output_path(args, config) or Path("baseline.csv")
    write_scaling_csv(rows, out)
    print(f"wrote {len(rows)} rows to {out}")
    worse_everywhere = True
    for m in args.m_grid:
        base = next(r for r in rows if r["protocol"] == "baseline_repetition" and r["m"] == m)
        comb = next(r for r in rows if r["protocol"] == "combined" and r["m"] == m)
        ok = base["n_required"] > comb["n_required"]
        worse_everywhere &= ok
        print(f"m={m}: baseline n={base['n_required']}, combined n={comb['n_required']}"
              f" -> baseline worse: {ok}")
    if args.plot:
        from .report import save_scaling_figure

        save_scaling_figure(rows, out.with_suffix(".png"))
    return 0 if worse_everywhere else 1


_COMMANDS = {
    "verify": _cmd_verify,
    "power": _cmd_power,
    "find-n": _cmd_find_n,
    "scaling": _cmd_scaling,
    "lower-bound-demo": _cmd_lower_bound_demo,
    "baseline": _cmd_baseline,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        # Parameter combinations the protocols themselves reject.
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
