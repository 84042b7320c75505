"""File-output rendering of experiment reports.

Kept separate from the numeric pipeline: the library computes and emits
delimited data, and only the report path below turns it into figures.
Uses the Agg backend so rendering works headless; PNGs are written
without the Software tag so payload bytes do not vary by toolchain.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .saa import ExperimentResult, empirical_cdf

_META = {"Software": None}


def render_cdf_figure(result: ExperimentResult, path: str | Path) -> None:
    """Distance CDF per sample size, one step curve each."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for n in sorted(result.sample_sizes):
        cdf = empirical_cdf(result.distances[n])
        if cdf.size == 0:
            continue
        xs = [0.0] + list(cdf[:, 0])
        fr = [0.0] + list(cdf[:, 1])
        ax.step(xs, fr, where="post", label=f"n = {n}")
    ax.set_xlabel("distance to reference equilibrium")
    ax.set_ylabel("fraction of runs")
    ax.set_ylim(0.0, 1.02)
    ax.legend(frameon=False)
    ax.set_title("Sampled-equilibrium error distribution")
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata=_META)
    plt.close(fig)


def render_quantile_figure(result: ExperimentResult, path: str | Path) -> None:
    """Error quantiles against sample size on log-log axes."""
    sizes = sorted(result.sample_sizes)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for q, mark in (("q25", "v"), ("q50", "o"), ("q75", "^"), ("q95", "s")):
        ax.plot(sizes, [result.quantiles[n][q] for n in sizes],
                marker=mark, label=q.replace("q", "") + "th percentile")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("samples per run")
    ax.set_ylabel("distance to reference equilibrium")
    ax.legend(frameon=False)
    ax.set_title("Error quantiles vs sample size")
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata=_META)
    plt.close(fig)
