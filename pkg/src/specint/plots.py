"""Report figures rendered straight to image files (headless backend)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .spectral_measure import AtomicMeasure, bin_pushforward  # noqa: E402

__all__ = ["save_measure_histogram", "save_convergence_curve"]


def save_measure_histogram(m: AtomicMeasure, path: str | Path, title: str,
                           width: float | None = None) -> Path:
    """Bar chart of the measure, binned when the atom count is large."""
    path = Path(path)
    if width is None:
        span = float(m.positions.max() - m.positions.min()) if len(m.positions) > 1 else 1.0
        width = span / 48 if span > 0 else 1.0
    binned = bin_pushforward(m, width) if len(m.positions) > 64 else m
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(binned.positions, binned.masses.real,
           width=0.8 * width if len(m.positions) > 64 else 0.02 * max(width, 1.0),
           color="#31688e")
    ax.set_xlabel("spectral position")
    ax.set_ylabel("mass")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_convergence_curve(rows: Sequence[tuple[int, float]], path: str | Path,
                           title: str, ylabel: str) -> Path:
    """Semilog plot of a metric against the truncation size."""
    path = Path(path)
    ns = [r[0] for r in rows]
    vals = [max(r[1], 1e-18) for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(ns, vals, marker="o", color="#35b779")
    ax.set_xlabel("truncation size")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
