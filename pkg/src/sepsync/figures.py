"""Render report figures to PNG files next to the delimited outputs.

Uses the Agg backend and fixed styling so figure files are byte-identical
across runs of the same seeded scenario. The CSVs remain the primary
machine-readable outputs; figures are companions for quick inspection.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

FIG_SIZE = (6.0, 3.6)
DPI = 120


def _save(fig, path: Path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)


def render_k_histogram(path: str | Path, k_values, title: str) -> None:
    ks = np.asarray(k_values)
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    bins = np.arange(0.5, ks.max() + 1.5)
    ax.hist(ks, bins=bins, color="#3465a4", edgecolor="black", linewidth=0.4)
    ax.set_xlabel("sessions until convergence K")
    ax.set_ylabel("count")
    ax.set_title(title)
    _save(fig, Path(path))


def render_error_histogram(path: str | Path, errors_ms, title: str,
                           bins: int = 40) -> None:
    errs = np.asarray(errors_ms)
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    ax.hist(errs, bins=bins, color="#73d216", edgecolor="black", linewidth=0.4)
    ax.set_xlabel("clock offset error (ms)")
    ax.set_ylabel("count")
    ax.set_title(title)
    _save(fig, Path(path))


def render_error_comparison(path: str | Path, comb_errors_ms, ntp_errors_ms) -> None:
    """Sorted absolute-error curves for the comb-assisted estimate and the
    symmetric-link baseline, on a log axis."""
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    for label, errs, color in (("comb-assisted", comb_errors_ms, "#3465a4"),
                               ("symmetric-link baseline", ntp_errors_ms,
                                "#cc0000")):
        e = np.sort(np.abs(np.asarray(errs)))
        if e.size == 0:
            continue
        frac = np.arange(1, e.size + 1) / e.size
        ax.plot(e, frac, label=label, color=color)
    ax.set_xscale("log")
    ax.set_xlabel("|error| (ms)")
    ax.set_ylabel("fraction of sessions under")
    ax.legend(loc="lower right")
    ax.grid(True, which="both", alpha=0.3)
    _save(fig, Path(path))


def render_sweep(path: str | Path, strengths, maes_ms) -> None:
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    xs, ys = [], []
    for s, m in zip(strengths, maes_ms):
        if m is not None:
            xs.append(s * 100.0)
            ys.append(m)
    ax.plot(xs, ys, "o-", color="#3465a4")
    ax.set_xscale("log")
    ax.set_xlabel("signal strength (%)")
    ax.set_ylabel("crossing MAE (ms)")
    ax.grid(True, which="both", alpha=0.3)
    _save(fig, Path(path))


def render_mean_k_grid(path: str | Path, grid: np.ndarray) -> None:
    """Mean K over the (i_max, j_max) grid as a heat map."""
    fig, ax = plt.subplots(figsize=(5.0, 4.2))
    im = ax.imshow(grid, origin="lower", cmap="viridis")
    ax.set_xlabel("j_max")
    ax.set_ylabel("i_max")
    fig.colorbar(im, ax=ax, label="mean K")
    _save(fig, Path(path))
