"""Render sweep CSVs to figures.

The sweep commands emit delimited results; these helpers turn them into the
matching matplotlib figures (marginal error versus interaction strength, or
versus sample count) written next to the CSV.
"""

from __future__ import annotations

import csv
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

__all__ = ["plot_strength_csv", "plot_time_csv", "plot_csv"]

_STYLE = {
    "gibbs_original": dict(color="tab:gray", marker="o"),
    "euclidean+gibbs": dict(color="tab:blue", marker="s"),
    "piecewise+gibbs": dict(color="tab:green", marker="^"),
    "reversed+gibbs": dict(color="tab:red", marker="v"),
    "mf": dict(color="tab:purple", marker="x"),
    "lbp": dict(color="tab:orange", marker="d"),
}


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def plot_strength_csv(csv_path, out_path):
    """Mean marginal error vs interaction strength, one line per method,
    error bars showing the standard error across trials."""
    rows = _read(csv_path)
    series = defaultdict(list)
    for r in rows:
        series[r["method"]].append((float(r["d_e"]), float(r["mean_error"]),
                                    float(r["se_error"])))
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for method, pts in series.items():
        pts.sort()
        x, y, se = zip(*pts)
        ax.errorbar(x, y, yerr=se, label=method, capsize=2,
                    **_STYLE.get(method, {}))
    ax.set_xlabel("interaction strength")
    ax.set_ylabel("mean marginal error")
    if rows:
        ax.set_title(f"{rows[0]['topology']} ({rows[0]['mode']})")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def plot_time_csv(csv_path, out_path):
    """Marginal error vs number of recorded sweeps (log-x); variational
    baselines appear as horizontal reference lines."""
    rows = _read(csv_path)
    series = defaultdict(list)
    flat = {}
    for r in rows:
        cp = int(float(r["checkpoint"]))
        if cp == 0:
            flat[r["method"]] = float(r["error"])
        else:
            series[r["method"]].append((cp, float(r["error"])))
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for method, pts in series.items():
        pts.sort()
        x, y = zip(*pts)
        ax.plot(x, y, label=method, **_STYLE.get(method, {}))
    for method, err in flat.items():
        ax.axhline(err, linestyle="--", linewidth=1.2,
                   color=_STYLE.get(method, {}).get("color"), label=method)
    ax.set_xscale("log")
    ax.set_xlabel("samples (sweeps)")
    ax.set_ylabel("mean marginal error")
    if rows:
        ax.set_title(f"{rows[0]['topology']} ({rows[0]['mode']}, d_e={rows[0]['d_e']})")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3, which="both")
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def plot_csv(csv_path, out_path):
    """Dispatch on the CSV header."""
    with open(csv_path, newline="") as fh:
        header = next(csv.reader(fh))
    if "checkpoint" in header:
        return plot_time_csv(csv_path, out_path)
    if "mean_error" in header:
        return plot_strength_csv(csv_path, out_path)
    raise ValueError(f"unrecognized results schema in {csv_path}")
