"""Render figures for fit traces, topic weights, and metric tables.

Figures are written next to the delimited/JSON outputs the batch commands
produce. PNG metadata is pinned so identical inputs yield byte-identical
image files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_PNG_META = {"Software": "anchortopics"}


def _save(fig, path: str) -> None:
    fig.savefig(path, dpi=120, bbox_inches="tight", metadata=_PNG_META)
    plt.close(fig)


def render_tc_trace(fit_report: dict, path: str) -> None:
    """Objective value per iteration."""
    history = fit_report["tc_history"]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(range(len(history)), history, marker=".", lw=1.2)
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective (nats)")
    ax.set_title("total correlation bound")
    ax.grid(alpha=0.3)
    _save(fig, path)


def render_tc_per_factor(fit_report: dict, path: str) -> None:
    """Final per-factor objective contributions."""
    per_factor = fit_report["tc_per_factor"]
    fig, ax = plt.subplots(figsize=(max(4, 0.35 * len(per_factor) + 1.5), 3.5))
    ax.bar(range(len(per_factor)), per_factor, color="#4878a8")
    ax.set_xlabel("factor")
    ax.set_ylabel("contribution (nats)")
    ax.set_title("per-factor contribution")
    _save(fig, path)


def render_topic_weights(topics: list[dict], path: str, max_factors: int = 12) -> None:
    """Horizontal weight bars for the top terms of each factor."""
    shown = topics[:max_factors]
    if not shown:
        raise ValueError("no factors to render")
    ncols = min(3, len(shown))
    nrows = (len(shown) + ncols - 1) // ncols
    fig, axes = plt.subplots(
        nrows, ncols, figsize=(4.2 * ncols, 2.6 * nrows), squeeze=False
    )
    for ax in axes.ravel():
        ax.axis("off")
    for ax, factor in zip(axes.ravel(), shown):
        ax.axis("on")
        terms = factor["terms"]
        labels = [
            t["term"] + ("*" if t.get("anchor") else "") for t in terms
        ][::-1]
        weights = [t["weight"] for t in terms][::-1]
        colors = ["#b04a4a" if t["sign"] == "-" else "#4878a8" for t in terms][::-1]
        ax.barh(range(len(terms)), weights, color=colors)
        ax.set_yticks(range(len(terms)), labels, fontsize=7)
        ax.set_title(f"topic {factor['id']}", fontsize=9)
        ax.tick_params(axis="x", labelsize=7)
    fig.tight_layout()
    _save(fig, path)


def render_metrics(metrics: dict, path: str) -> None:
    """Grouped F1/AUC bars per label with the macro averages drawn as lines."""
    labels = sorted(metrics["labels"])
    f1_vals = [metrics["labels"][k]["f1"] for k in labels]
    auc_vals = [
        metrics["labels"][k]["auc"] if metrics["labels"][k]["auc"] is not None else 0.0
        for k in labels
    ]
    x = range(len(labels))
    width = 0.38
    fig, ax = plt.subplots(figsize=(max(4, 0.9 * len(labels) + 2), 3.5))
    ax.bar([i - width / 2 for i in x], f1_vals, width, label="F1", color="#4878a8")
    ax.bar([i + width / 2 for i in x], auc_vals, width, label="AUC", color="#6aa86a")
    ax.axhline(metrics["macro"]["f1"], color="#4878a8", ls="--", lw=1,
               label="macro F1")
    ax.axhline(metrics["macro"]["auc"], color="#6aa86a", ls="--", lw=1,
               label="macro AUC")
    ax.set_xticks(list(x), labels, rotation=30, ha="right", fontsize=8)
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=7)
    ax.set_title("classification performance")
    _save(fig, path)
