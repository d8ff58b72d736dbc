"""Aggregation tables and wins plots from a results file."""

from __future__ import annotations

import json
from pathlib import Path

from .aggregate import aggregate
from .records import ResultRecord


def build_tables(records: list[ResultRecord], metric: str = "mse", group_by=("budget_kind", "budget_value")):
    summary = aggregate(records, group_by=group_by, metric=metric)
    rows = []
    for group in sorted(summary, key=repr):
        for algorithm, stats in sorted(summary[group].items()):
            rows.append({**dict(zip(group_by, group)), "algorithm": algorithm, **stats})
    return rows


def write_report(records: list[ResultRecord], out_dir, metric: str = "mse", group_by=("budget_kind", "budget_value")):
    """Write ``wins_<metric>.json`` / ``.csv`` and one PNG per budget kind; return paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = build_tables(records, metric, group_by)
    paths = []
    table = out_dir / f"wins_{metric}.json"
    table.write_text(json.dumps({"metric": metric, "group_by": list(group_by), "rows": rows}, indent=2))
    paths.append(table)

    csv_path = out_dir / f"wins_{metric}.csv"
    columns = list(group_by) + ["algorithm", "wins", "mean_rank", "configs"]
    lines = [",".join(columns)] + [",".join(str(r[c]) for c in columns) for r in rows]
    csv_path.write_text("\n".join(lines) + "\n")
    paths.append(csv_path)

    if "budget_kind" in group_by and "budget_value" in group_by:
        paths.extend(_plot_wins(rows, out_dir, metric))
    return paths


def _plot_wins(rows, out_dir: Path, metric: str):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    paths = []
    for kind in sorted({r["budget_kind"] for r in rows}):
        fig, ax = plt.subplots(figsize=(6, 4))
        subset = [r for r in rows if r["budget_kind"] == kind]
        for algorithm in sorted({r["algorithm"] for r in subset}):
            pts = sorted((r["budget_value"], r["wins"]) for r in subset if r["algorithm"] == algorithm)
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=algorithm)
        ax.set_xlabel("data budget (points)" if kind == "data" else "time budget (s)")
        ax.set_ylabel(f"{metric.upper()} wins")
        ax.legend()
        fig.tight_layout()
        path = out_dir / f"wins_{metric}_{kind}.png"
        fig.savefig(path, dpi=100)
        plt.close(fig)
        paths.append(path)
    return paths
