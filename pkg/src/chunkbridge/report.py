"""Benchmark report rendering: aligned text tables, CSV, and PNG figures."""

from __future__ import annotations

import csv
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .bench import BenchReport


def _format_table(headers: list[str], rows: list[list[str]]) -> str:
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)).rstrip(),
        "  ".join("-" * widths[i] for i in range(len(headers))),
    ]
    for row in rows:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
    return "\n".join(lines)


def _fmt(value, digits: int = 2) -> str:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return f"{value:.{digits}f}"
    return str(value)


def render_table(report: BenchReport) -> str:
    """Aligned-column text rendering of a benchmark report."""
    if report.mode == "ablation":
        headers = ["round", "mean_us", "median_us", "p99_us", "queries"]
        rows = [
            [str(r.round_no), _fmt(r.stats.mean_us), _fmt(r.stats.median_us),
             _fmt(r.stats.p99_us), str(r.stats.n)]
            for r in report.rounds
        ]
        table = _format_table(headers, rows)
        sorting = "on" if report.sorting else "off"
        return f"{table}\nsorting={sorting}  load_factor={_fmt(report.load_factor, 4)}"
    if report.mode == "speed":
        headers = ["path", "mean_us", "median_us", "p99_us", "queries"]
        rows = [
            ["engine", _fmt(report.engine.mean_us), _fmt(report.engine.median_us),
             _fmt(report.engine.p99_us), str(report.engine.n)],
            ["naive", _fmt(report.naive.mean_us), _fmt(report.naive.median_us),
             _fmt(report.naive.p99_us), str(report.naive.n)],
        ]
        table = _format_table(headers, rows)
        return (
            f"{table}\n"
            f"speedup_mean={_fmt(report.speedup_mean)}  "
            f"speedup_median={_fmt(report.speedup_median)}  "
            f"pool_mean={_fmt(report.pool_size_mean, 1)}  "
            f"pool_median={_fmt(report.pool_size_median, 1)}"
        )
    if report.mode == "fpr":
        headers = ["metric", "value"]
        rows = [
            ["fingerprint_fpr", _fmt(report.fingerprint_fpr, 6)],
            ["payload_fpr", _fmt(report.payload_fpr, 6)],
            ["false_negatives", _fmt(report.false_negatives)],
            ["members", _fmt(report.member_count)],
            ["non_members", _fmt(report.non_member_count)],
            ["load_factor", _fmt(report.load_factor, 4)],
        ]
        return _format_table(headers, rows)
    raise ValueError(f"unknown report mode {report.mode!r}")


def write_csv(report: BenchReport, path: str) -> None:
    """Delimited rows: per round (ablation), per query (speed), or the
    single metrics row (fpr)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if report.mode == "ablation":
            writer.writerow(["round", "mean_us", "median_us", "p99_us", "queries", "sorting"])
            for r in report.rounds:
                writer.writerow(
                    [r.round_no, f"{r.stats.mean_us:.3f}", f"{r.stats.median_us:.3f}",
                     f"{r.stats.p99_us:.3f}", r.stats.n, int(bool(report.sorting))]
                )
        elif report.mode == "speed":
            writer.writerow(
                ["query_index", "engine_us", "naive_us", "ratio", "pool_size", "fallback"]
            )
            for row in report.per_query:
                writer.writerow(
                    [row["query_index"], f"{row['engine_us']:.3f}", f"{row['naive_us']:.3f}",
                     f"{row['ratio']:.3f}", row["pool_size"], int(row["fallback"])]
                )
        elif report.mode == "fpr":
            writer.writerow(
                ["fingerprint_fpr", "payload_fpr", "false_negatives",
                 "members", "non_members", "load_factor"]
            )
            writer.writerow(
                [report.fingerprint_fpr, report.payload_fpr, report.false_negatives,
                 report.member_count, report.non_member_count, report.load_factor]
            )
        else:
            raise ValueError(f"unknown report mode {report.mode!r}")


def render_figures(report: BenchReport, out_dir: str) -> list[str]:
    """Write PNG figures for the report; returns the written paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths: list[str] = []
    if report.mode == "ablation":
        fig, ax = plt.subplots(figsize=(6, 4))
        rounds = [r.round_no for r in report.rounds]
        ax.plot(rounds, [r.stats.mean_us for r in report.rounds], marker="o", label="mean")
        ax.plot(rounds, [r.stats.median_us for r in report.rounds], marker="s", label="median")
        ax.set_xlabel("round")
        ax.set_ylabel("search latency (us)")
        ax.set_xticks(rounds)
        sorting = "on" if report.sorting else "off"
        ax.set_title(f"Per-round search latency (sorting {sorting})")
        ax.legend()
        ax.grid(True, alpha=0.3)
        path = os.path.join(out_dir, "ablation_latency.png")
        fig.savefig(path, dpi=150, bbox_inches="tight")
        plt.close(fig)
        paths.append(path)
    elif report.mode == "speed":
        fig, ax = plt.subplots(figsize=(6, 4))
        labels = ["mean", "median", "p99"]
        engine = [report.engine.mean_us, report.engine.median_us, report.engine.p99_us]
        naive = [report.naive.mean_us, report.naive.median_us, report.naive.p99_us]
        x = range(len(labels))
        ax.bar([i - 0.2 for i in x], engine, width=0.4, label="engine")
        ax.bar([i + 0.2 for i in x], naive, width=0.4, label="naive")
        ax.set_xticks(list(x), labels)
        ax.set_ylabel("latency (us)")
        ax.set_yscale("log")
        ax.set_title(f"Engine vs naive (median speedup {report.speedup_median:.1f}x)")
        ax.legend()
        path = os.path.join(out_dir, "speed_comparison.png")
        fig.savefig(path, dpi=150, bbox_inches="tight")
        plt.close(fig)
        paths.append(path)

        fig, ax = plt.subplots(figsize=(6, 4))
        ax.hist([row["ratio"] for row in report.per_query], bins=30)
        ax.set_xlabel("naive / engine latency ratio")
        ax.set_ylabel("queries")
        ax.set_title("Per-query speedup distribution")
        path = os.path.join(out_dir, "speedup_hist.png")
        fig.savefig(path, dpi=150, bbox_inches="tight")
        plt.close(fig)
        paths.append(path)
    elif report.mode == "fpr":
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.bar(["fingerprint", "payload"], [report.fingerprint_fpr, report.payload_fpr])
        ax.set_ylabel("false positive rate")
        ax.set_title(f"False positives over {report.non_member_count} absent entities")
        path = os.path.join(out_dir, "fpr.png")
        fig.savefig(path, dpi=150, bbox_inches="tight")
        plt.close(fig)
        paths.append(path)
    else:
        raise ValueError(f"unknown report mode {report.mode!r}")
    return paths
