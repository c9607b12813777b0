"""Read result tables written by the simulation CLI and draw the figures.

The renderer never recomputes metrics: it consumes only the documented CSV
schemas, skips figures whose inputs are missing (with a warning), and keeps
styling and file metadata deterministic so identical inputs give identical
images.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

log = logging.getLogger("cachefigs")

STYLE = {
    "figure.figsize": (6.0, 4.2),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.6,
    "lines.markersize": 5,
    "font.size": 10,
}
MARKERS = ["o", "s", "^", "v", "D", "x", "+", "*"]
SAVE_KWARGS = {"metadata": {"Software": "cachefigs", "Date": None}}


class TableError(RuntimeError):
    pass


@dataclass
class RenderedFigure:
    figure_id: str
    path: Path
    series: int


def read_table(path: Path) -> tuple[list[str], list[dict[str, str]]]:
    """CSV with a header row; leading '#' comment lines are skipped."""
    try:
        with path.open() as fh:
            rows = [line for line in fh if not line.startswith("#")]
        reader = csv.DictReader(rows)
        if reader.fieldnames is None:
            raise TableError(f"{path.name}: empty table")
        records = list(reader)
    except (OSError, csv.Error) as exc:
        raise TableError(f"{path.name}: {exc}") from exc
    return list(reader.fieldnames), records


def _column(records, name, cast=float):
    return np.array([cast(r[name]) for r in records])


def _save(fig, out_dir: Path, figure_id: str) -> Path:
    out = out_dir / f"{figure_id}.png"
    fig.savefig(out, **SAVE_KWARGS)
    plt.close(fig)
    return out


def draw_alpha_scan(path: Path, out_dir: Path) -> RenderedFigure:
    """Reservation-fraction scan: objective vs alpha, one line per series.

    Accepts either the grouped table (capacity_ratio,alpha,objective) or a
    single raw scan (alpha,objective,feasible)."""
    fields, records = read_table(path)
    fig, ax = plt.subplots()
    series = 0
    if "capacity_ratio" in fields:
        for idx, ratio in enumerate(sorted({r["capacity_ratio"]
                                            for r in records}, key=float)):
            sub = [r for r in records if r["capacity_ratio"] == ratio]
            ax.plot(_column(sub, "alpha"), _column(sub, "objective"),
                    marker=MARKERS[idx % len(MARKERS)], markevery=8,
                    label=f"capacity ratio {float(ratio):g}")
            series += 1
    else:
        sub = [r for r in records if r.get("feasible", "1") == "1"]
        if sub:
            ax.plot(_column(sub, "alpha"), _column(sub, "objective"),
                    marker="o", markevery=8, label="objective")
            series += 1
    ax.set_xlabel("reservation fraction")
    ax.set_ylabel("weighted hit value")
    ax.set_title("Objective vs reservation fraction")
    if series:
        ax.legend()
    return RenderedFigure("alpha_scan", _save(fig, out_dir, "alpha_scan"),
                          series)


def draw_static_cost(path: Path, out_dir: Path) -> RenderedFigure:
    fields, records = read_table(path)
    fig, ax = plt.subplots()
    series = 0
    strategies = sorted({r["strategy"] for r in records})
    for idx, strategy in enumerate(strategies):
        sub = sorted((r for r in records if r["strategy"] == strategy),
                     key=lambda r: float(r["intensity"]))
        ax.plot(_column(sub, "intensity"),
                _column(sub, "mean_aggregate_cost"),
                marker=MARKERS[idx % len(MARKERS)], label=strategy)
        series += 1
    ax.set_xlabel("traffic intensity (requests/slot)")
    ax.set_ylabel("aggregate link cost")
    ax.set_title("One-slot scenario: cost by selection strategy")
    if series:
        ax.legend()
    return RenderedFigure("static_cost", _save(fig, out_dir, "static_cost"),
                          series)


def draw_delta_sweep(path: Path, out_dir: Path) -> RenderedFigure:
    fields, records = read_table(path)
    records = sorted(records, key=lambda r: float(r["delta"]))
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 4.0))
    deltas = _column(records, "delta")
    ax1.plot(deltas, _column(records, "mean_max_utilization"), marker="o")
    ax1.set_xlabel("reserved capacity fraction")
    ax1.set_ylabel("max link utilization")
    ax2.plot(deltas, _column(records, "mean_throughput_bps") / 1e6,
             marker="s", color="tab:orange")
    ax2.set_xlabel("reserved capacity fraction")
    ax2.set_ylabel("in-network throughput (Mbps)")
    fig.suptitle("Congestion avoidance sweep")
    fig.tight_layout()
    return RenderedFigure("delta_sweep", _save(fig, out_dir, "delta_sweep"),
                          2 if len(records) else 0)


def draw_dynamic_summary(path: Path, out_dir: Path) -> RenderedFigure:
    fields, records = read_table(path)
    strategies = [r["strategy"] for r in records]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 4.0))
    x = np.arange(len(strategies))
    ax1.bar(x, _column(records, "mean_aggregate_cost"), color="tab:blue")
    ax1.set_xticks(x, strategies, rotation=20)
    ax1.set_ylabel("mean aggregate cost")
    ax2.bar(x, _column(records, "mean_max_utilization"), color="tab:orange")
    ax2.set_xticks(x, strategies, rotation=20)
    ax2.set_ylabel("mean max utilization")
    fig.suptitle("Dynamic scenario summary")
    fig.tight_layout()
    return RenderedFigure("dynamic_summary",
                          _save(fig, out_dir, "dynamic_summary"),
                          len(strategies))


def draw_savings(path: Path, out_dir: Path) -> RenderedFigure:
    fields, records = read_table(path)
    records = sorted(records, key=lambda r: float(r["total_requests"]))
    fig, ax = plt.subplots()
    totals = _column(records, "total_requests")
    ax.plot(totals, 100 * _column(records, "hit_saving"), marker="o",
            label="cache hit")
    ax.plot(totals, 100 * _column(records, "merge_saving"), marker="s",
            label="request merging")
    ax.set_xlabel("total requests")
    ax.set_ylabel("traffic saved (%)")
    ax.set_title("Traffic savings")
    ax.legend()
    return RenderedFigure("savings", _save(fig, out_dir, "savings"),
                          2 if len(records) else 0)


def draw_hit_ratio(path: Path, out_dir: Path) -> RenderedFigure:
    fields, records = read_table(path)
    fig, ax = plt.subplots()
    series = 0
    for idx, strategy in enumerate(sorted({r["strategy"] for r in records})):
        sub = sorted((r for r in records
                      if r["strategy"] == strategy and r["hit_ratio"]),
                     key=lambda r: float(r["capacity_ratio"]))
        if not sub:
            continue
        ax.plot(_column(sub, "capacity_ratio"), _column(sub, "hit_ratio"),
                marker=MARKERS[idx % len(MARKERS)], label=strategy)
        series += 1
    ax.set_xlabel("capacity ratio")
    ax.set_ylabel("hit ratio")
    ax.set_title("Placement hit ratio vs capacity ratio")
    if series:
        ax.legend()
    return RenderedFigure("hit_ratio", _save(fig, out_dir, "hit_ratio"),
                          series)


FIGURES = {
    "alpha_scan": ("table_alpha_scan.csv", draw_alpha_scan),
    "static_cost": ("table_static_cost.csv", draw_static_cost),
    "delta_sweep": ("table_delta_sweep.csv", draw_delta_sweep),
    "dynamic_summary": ("table_dynamic.csv", draw_dynamic_summary),
    "savings": ("table_savings.csv", draw_savings),
    "hit_ratio": ("table_hit_ratio.csv", draw_hit_ratio),
}


def render_figures(results_dir: Path | str, out_dir: Path | str,
                   only: list[str] | None = None) -> dict[str, RenderedFigure]:
    """Render every figure whose input table exists.

    Missing tables are skipped with a warning; a broken table fails that
    figure alone. Returns the rendered figures keyed by id.
    """
    results_dir = Path(results_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    wanted = set(only) if only else set(FIGURES)
    unknown = wanted - set(FIGURES)
    if unknown:
        raise ValueError(f"unknown figure ids: {sorted(unknown)}")

    rendered: dict[str, RenderedFigure] = {}
    failures: dict[str, str] = {}
    with plt.rc_context(STYLE):
        for figure_id in sorted(wanted):
            table_name, draw = FIGURES[figure_id]
            table = results_dir / table_name
            if not table.exists():
                log.warning("skipping %s: %s not found", figure_id, table_name)
                continue
            try:
                rendered[figure_id] = draw(table, out_dir)
            except (TableError, KeyError, ValueError) as exc:
                failures[figure_id] = str(exc)
                log.error("figure %s failed: %s", figure_id, exc)
    if failures and not rendered:
        raise TableError(f"all figures failed: {failures}")
    for figure_id, result in rendered.items():
        log.info("rendered %s -> %s (%d series)", figure_id, result.path,
                 result.series)
    return rendered


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
    parser = argparse.ArgumentParser(
        prog="cachefigs", description="render figures from result tables")
    parser.add_argument("results_dir", help="directory holding table_*.csv")
    parser.add_argument("out_dir", help="directory for the rendered images")
    parser.add_argument("--only", nargs="*", metavar="FIGURE_ID",
                        help=f"subset of {sorted(FIGURES)}")
    args = parser.parse_args(argv)
    try:
        rendered = render_figures(args.results_dir, args.out_dir, args.only)
    except (TableError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if not rendered:
        print("no figures rendered (no input tables found)", file=sys.stderr)
        return 1
    for result in rendered.values():
        print(f"{result.figure_id}: {result.path} ({result.series} series)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
