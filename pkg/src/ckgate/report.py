"""Rendering of operator-facing reports: CSV tables plus figures.

Everything drawn here comes from already-scrubbed material (EgressReport
metrics or aggregate graph statistics), never from raw rows, so writing
these files to disk sits on the safe side of the egress boundary.
"""

from __future__ import annotations

import csv
from pathlib import Path

from .gateway import EgressReport
from .graph import EdgeType, NodeLabel, PropertyGraph

_METRIC_FIELDS = ("accuracy", "precision", "recall", "f1")


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def write_metrics_report(report: EgressReport, directory) -> list:
    """Write metrics.csv and a per-task metrics bar chart; returns paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    csv_path = directory / "metrics.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["task", "accuracy", "precision", "recall", "f1", "n_scored", "n_missing"])
        for task in sorted(report.metrics):
            m = report.metrics[task]
            writer.writerow(
                [
                    task,
                    f"{m.accuracy:.6f}",
                    "" if m.precision is None else f"{m.precision:.6f}",
                    f"{m.recall:.6f}",
                    "" if m.f1 is None else f"{m.f1:.6f}",
                    m.n_scored,
                    m.n_missing,
                ]
            )
    written = [csv_path]
    if report.metrics:
        written.append(_metrics_figure(report, directory / "metrics.png"))
    return written


def _metrics_figure(report: EgressReport, path: Path) -> Path:
    plt = _plt()
    tasks = sorted(report.metrics)
    fig, axes = plt.subplots(1, len(tasks), figsize=(5.5 * len(tasks), 4.0), squeeze=False)
    for ax, task in zip(axes[0], tasks):
        m = report.metrics[task]
        names = [f for f in _METRIC_FIELDS if getattr(m, f) is not None]
        values = [getattr(m, f) for f in names]
        ax.bar(names, values, color="#4878a8")
        ax.set_ylim(0, 1.05)
        ax.set_title(f"Task {task} (n={m.n_scored}, missing={m.n_missing})")
        for x, v in enumerate(values):
            ax.text(x, v + 0.02, f"{v:.3f}", ha="center", fontsize=9)
    fig.suptitle(f"{report.app_name} {report.version} — released metrics")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def write_graph_overview(graph: PropertyGraph, directory) -> list:
    """Write graph_stats.csv plus shape figures for a graph."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stats = graph.graph_stats()
    csv_path = directory / "graph_stats.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["kind", "name", "value"])
        for label in NodeLabel:
            writer.writerow(["nodes", label.value, stats.nodes_by_label[label]])
        for etype in EdgeType:
            writer.writerow(["edges", etype.value, stats.edges_by_type[etype]])
        for (label, etype), mean in sorted(
            stats.mean_out_degree.items(), key=lambda kv: (kv[0][0].value, kv[0][1].value)
        ):
            writer.writerow(["mean_out_degree", f"{label.value}:{etype.value}", f"{mean:.4f}"])
    return [csv_path, _counts_figure(stats, directory / "graph_counts.png"),
            _degree_figure(graph, directory / "sample_degrees.png")]


def _counts_figure(stats, path: Path) -> Path:
    plt = _plt()
    fig, (left, right) = plt.subplots(1, 2, figsize=(11, 4.0))
    labels = [l.value for l in NodeLabel]
    left.bar(labels, [stats.nodes_by_label[l] for l in NodeLabel], color="#4878a8")
    left.set_title("nodes per label")
    left.tick_params(axis="x", rotation=30)
    types = [t.value for t in EdgeType]
    right.bar(types, [stats.edges_by_type[t] for t in EdgeType], color="#b5651d")
    right.set_title("edges per type")
    right.tick_params(axis="x", rotation=30)
    for ax in (left, right):
        ax.set_ylabel("count")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _degree_figure(graph: PropertyGraph, path: Path) -> Path:
    plt = _plt()
    samples = graph.nodes_by_label(NodeLabel.BIOLOGICAL_SAMPLE)
    fig, axes = plt.subplots(1, 3, figsize=(13, 3.6))
    for ax, etype in zip(
        axes, (EdgeType.HAS_DAMAGE, EdgeType.HAS_PROTEIN, EdgeType.HAS_PHENOTYPE)
    ):
        degrees = [len(graph.neighbors(s, etype, "out")) for s in samples]
        ax.hist(degrees, bins=min(25, max(5, len(set(degrees)))), color="#4878a8")
        ax.set_title(f"{etype.value} per sample")
        ax.set_xlabel("links")
        ax.set_ylabel("samples")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
