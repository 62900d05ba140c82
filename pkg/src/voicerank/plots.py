"""Render evaluation reports as figures, next to their CSV twins.

All plotting uses the Agg backend and writes straight to files; no
display is ever opened, so these are safe on headless machines.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def _finish(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_length_sweep(rows, path):
    """Top-k accuracy versus utterance length, one curve per k."""
    by_k: dict = {}
    for row in rows:
        by_k.setdefault(int(row["k"]), []).append(
            (float(row["length_s"]), float(row["accuracy_pct"])))
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for k in sorted(by_k):
        pts = sorted(by_k[k])
        ax.plot([p[0] for p in pts], [p[1] for p in pts],
                marker="o", label=f"top-{k}")
    ax.set_xlabel("utterance length (s)")
    ax.set_ylabel("identification accuracy (%)")
    ax.set_ylim(0, 102)
    ax.grid(True, alpha=0.3)
    ax.legend()
    ax.set_title("Accuracy vs. probe length")
    return _finish(fig, path)


def plot_stage_times(rows, path):
    """Median wall time per pipeline stage as a horizontal bar chart."""
    stages = [r["stage"] for r in rows]
    medians = [float(r["median_ms"]) for r in rows]
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.barh(range(len(stages)), medians, color="#4878cf")
    ax.set_yticks(range(len(stages)))
    ax.set_yticklabels(stages)
    ax.invert_yaxis()
    ax.set_xlabel("median wall time (ms)")
    ax.set_title("Pipeline stage timings")
    ax.grid(True, axis="x", alpha=0.3)
    return _finish(fig, path)


def plot_scoring_scaling(rows, path):
    """Gallery-scoring time versus index size on log-log axes."""
    pts = sorted((int(r["n_rows"]), float(r["median_ms"])) for r in rows)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.loglog([p[0] for p in pts], [p[1] for p in pts], marker="o")
    ax.set_xlabel("gallery size (rows)")
    ax.set_ylabel("median scoring time (ms)")
    ax.set_title("Scoring cost vs. gallery size")
    ax.grid(True, which="both", alpha=0.3)
    return _finish(fig, path)
