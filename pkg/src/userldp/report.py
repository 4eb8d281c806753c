"""Figure rendering for the CLI report paths.

Figures are a convenience layer next to the delimited outputs; the CSV files
remain the canonical, byte-reproducible artifacts.
"""

from __future__ import annotations

import math
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def save_scaling_figure(rows: Sequence[Mapping], path) -> None:
    """Required users against samples per user, one line per protocol (log-log)."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    by_protocol: dict[str, list] = {}
    for row in rows:
        by_protocol.setdefault(row["protocol"], []).append(row)
    for protocol, entries in sorted(by_protocol.items()):
        entries = sorted(entries, key=lambda r: r["m"])
        ms = [r["m"] for r in entries]
        ns = [r["n_required"] for r in entries]
        finite = [(m, n) for m, n in zip(ms, ns) if not math.isinf(n)]
        if finite:
            ax.plot(*zip(*finite), marker="o", label=protocol)
        capped = [(m, n) for m, n in zip(ms, ns) if math.isinf(n)]
        if capped:
            ax.plot([m for m, _ in capped], [1 for _ in capped], marker="x", linestyle="none",
                    label=f"{protocol} (not found)")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("samples per user (m)")
    ax.set_ylabel("required users (n)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_power_figure(labels: Sequence[str], estimates, path) -> None:
    """Accept rates with Wilson intervals as an error-bar chart."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    xs = range(len(labels))
    points = [e.point for e in estimates]
    err_low = [e.point - e.ci_low for e in estimates]
    err_high = [e.ci_high - e.point for e in estimates]
    ax.errorbar(xs, points, yerr=[err_low, err_high], fmt="o", capsize=4)
    ax.axhline(2.0 / 3.0, color="grey", linestyle="--", linewidth=1)
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels, rotation=20, ha="right")
    ax.set_ylim(-0.02, 1.02)
    ax.set_ylabel("accept rate")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
