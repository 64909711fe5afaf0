"""Matplotlib report figures rendered next to the delimited outputs."""
from __future__ import annotations

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def bounds_figure(samples, markers: dict, path):
    """Sample histogram with vertical markers for bounds / empirical values.

    ``markers`` maps a label to an x-position, e.g. ``{"VaR bound": 0.21}``.
    """
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(np.asarray(samples, float), bins=15, density=True, alpha=0.55,
            color="tab:blue", edgecolor="white")
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"][1:]
    for (label, xpos), color in zip(markers.items(), colors):
        ax.axvline(xpos, color=color, linestyle="--", linewidth=1.5, label=label)
    ax.set_xlabel("sample value")
    ax.set_ylabel("density")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def trace_figure(trace_rows, cfg, path):
    """Robot path (left) and barrier diagnostics over time (right)."""
    rows = list(trace_rows)
    if not rows:
        return
    t = np.array([r[0] for r in rows])
    px = np.array([r[1] for r in rows])
    py = np.array([r[2] for r in rows])
    h_min = np.array([r[6] for r in rows])
    emp = np.array([r[7] for r in rows])

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.plot(px, py, color="tab:blue", label="robot")
    ax1.plot(px[0], py[0], "o", color="tab:blue")
    ax1.plot(cfg.target[0], cfg.target[1], "*", color="tab:green",
             markersize=12, label="target")
    ax1.scatter(cfg.mixture.means[:, 0], cfg.mixture.means[:, 1],
                color="tab:red", marker="x", label="belief modes (t=0)")
    ax1.set_xlabel("x [m]")
    ax1.set_ylabel("y [m]")
    ax1.set_aspect("equal", adjustable="datalim")
    ax1.legend(fontsize=8)

    ax2.plot(t, emp, color="tab:orange", label="empirical VaR")
    ax2.plot(t, h_min, color="tab:blue", label="risk lower bound")
    ax2.axhline(0.0, color="k", linewidth=0.8)
    ax2.set_xlabel("t [s]")
    ax2.set_ylabel("barrier margin [m]")
    ax2.legend(fontsize=8)

    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def benchmark_figure(summary, path):
    """Grouped success / collision / timeout bars per method."""
    labels = [m.label for m in summary.methods]
    cats = ["success", "collision", "timeout"]
    colors = ["tab:green", "tab:red", "tab:gray"]
    x = np.arange(len(labels))
    width = 0.26

    fig, ax = plt.subplots(figsize=(1.8 * len(labels) + 2.5, 4))
    for j, (cat, color) in enumerate(zip(cats, colors)):
        vals = [getattr(m, cat) for m in summary.methods]
        ax.bar(x + (j - 1) * width, vals, width, label=cat, color=color)
    ax.set_xticks(x)
    ax.set_xticklabels(labels)
    ax.set_ylabel(f"runs (of {summary.n_runs})")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
