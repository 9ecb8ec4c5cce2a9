"""Figure rendering (matplotlib, Agg backend). Optional: importing needs matplotlib."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .theory import mp_density, mp_edges  # noqa: E402


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def emergence_figure(result: dict, gamma: float, path: Path) -> Path:
    """One panel per b: pooled sigma histogram, limit density, bulk edges and windows."""
    rows = result["rows"]
    q = gamma ** 0.25
    lo, hi = mp_edges(q)
    fig, axes = plt.subplots(1, len(rows), figsize=(4.2 * len(rows), 3.4), squeeze=False)
    for ax, row in zip(axes[0], rows):
        edges, counts = result["histograms"][row["b"]]
        width = np.diff(edges)
        dens = counts / max(counts.sum(), 1) / width
        ax.bar(edges[:-1], dens, width=width, align="edge", color="0.65", edgecolor="none")
        s = np.linspace(max(lo, 1e-6), hi, 400)
        ax.plot(s, mp_density(s, q), color="k", lw=1.2)
        w = row["window"]
        for x, style in ((lo, "--"), (hi, "--"), (lo - w, ":"), (hi + w, ":")):
            ax.axvline(x, color="tab:red", ls=style, lw=0.8)
        ax.set_yscale("symlog", linthresh=1e-3)
        ax.set_title(f"b = {row['b']:g}")
        ax.set_xlabel("singular value")
    axes[0][0].set_ylabel("density")
    return _save(fig, path)


def phase_figure(result: dict, path: Path) -> Path:
    rows = result["rows"]
    q = np.array([r["q"] for r in rows])

    def col(key):
        return np.array([np.nan if r[key] is None else r[key] for r in rows], dtype=float)

    fig, ax = plt.subplots(figsize=(5.5, 4))
    for key, label in (("r2_star", "r2*"), ("r1_star", "r1*"), ("l2_star", "l2*"),
                       ("q2", "q^2"), ("ihara_bass", "q^2/h(q^2-1)")):
        ax.plot(q, col(key), label=label, lw=1.2)
    ax.axvline(result["q_star"], color="0.4", ls=":", lw=0.8)
    ax.set_ylim(0, 12)
    ax.set_xlabel("q")
    ax.set_ylabel("b")
    ax.legend(frameon=False, fontsize=8)
    return _save(fig, path)


def count_figure(result: dict, path: Path) -> Path:
    rows = result["rows"]
    N = np.array([r["N"] for r in rows], dtype=float)
    fig, ax = plt.subplots(figsize=(5, 3.6))
    ax.loglog(N, [r["mean_R2"] + 1 for r in rows], "o-", label="mean |R2| + 1")
    ax.loglog(N, [r["predicted"] + 1 for r in rows], "s--", label="leading-order + 1")
    ax.set_xlabel("N")
    ax.legend(frameon=False, fontsize=8)
    return _save(fig, path)
