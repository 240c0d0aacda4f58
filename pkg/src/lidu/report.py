"""Report rendering: summary CSV plus matplotlib figures written next to the
delimited outputs of a run or synthetic experiment."""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from pathlib import Path

import numpy as np

from .core import ValidationError
from .evaluation import read_report_csv


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def write_summary_csv(summary: dict, path) -> None:
    """Flatten a summary mapping (estimator -> metrics) into CSV."""
    metrics = ["win_rate", "pearson_r", "neg_pearson_r", "sare", "n_users"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["estimator"] + metrics)
        for name in summary:
            row = [name]
            for m in metrics:
                v = summary[name].get(m)
                row.append("" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(v) if isinstance(v, float) else v)
            writer.writerow(row)


def _bar_figure(labels, values, title, ylabel, path, hline=None):
    plt = _plt()
    fig, ax = plt.subplots(figsize=(max(6, 0.8 * len(labels)), 4))
    ax.bar(range(len(labels)), values, color="#4878a8")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=45, ha="right")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    if hline is not None:
        ax.axhline(hline, color="gray", linestyle="--", linewidth=1)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_run_figures(run_dir) -> list:
    """Figures for a `run` output directory; returns the files written."""
    run_dir = Path(run_dir)
    reports_dir = run_dir / "reports"
    per_user = reports_dir / "per_user.csv"
    summary_path = reports_dir / "summary.json"
    if not per_user.exists() or not summary_path.exists():
        raise ValidationError(f"{run_dir} does not look like a run output directory")
    fig_dir = reports_dir / "figures"
    fig_dir.mkdir(exist_ok=True)
    written = []

    with open(summary_path, encoding="utf-8") as fh:
        summary = json.load(fh)["estimators"]
    names = list(summary)
    neg_r = [summary[n]["neg_pearson_r"] or 0.0 for n in names]
    win = [summary[n]["win_rate"] or 0.0 for n in names]
    p = fig_dir / "estimator_neg_pearson.png"
    _bar_figure(names, neg_r, "Negative Pearson r vs NDCG", "-Pearson r", p)
    written.append(p)
    p = fig_dir / "estimator_win_rate.png"
    _bar_figure(names, win, "Win rate vs NDCG ordering", "win rate", p, hline=0.5)
    written.append(p)

    reports = read_report_csv(per_user)
    scatter_name = "lidu_dp" if "lidu_dp" in reports else names[0]
    rep = reports[scatter_name]
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.scatter(rep.estimates, rep.ndcg, s=6, alpha=0.35, color="#4878a8")
    ax.set_xlabel(f"{scatter_name} estimate")
    ax.set_ylabel("NDCG")
    ax.set_title(f"{scatter_name} vs per-user NDCG")
    fig.tight_layout()
    p = fig_dir / "lidu_vs_ndcg.png"
    fig.savefig(p, dpi=150)
    plt.close(fig)
    written.append(p)

    act_path = reports_dir / "activeness.csv"
    if act_path.exists():
        rows = list(csv.DictReader(open(act_path, encoding="utf-8")))
        groups = sorted({r["group"] for r in rows})
        ests = sorted({r["estimator"] for r in rows})
        plt = _plt()
        fig, ax = plt.subplots(figsize=(max(6, 0.9 * len(ests)), 4))
        width = 0.8 / len(groups)
        for gi, g in enumerate(groups):
            vals = []
            for e in ests:
                match = [r for r in rows if r["group"] == g and r["estimator"] == e]
                vals.append(abs(float(match[0]["pearson_r"])) if match and match[0]["pearson_r"] else 0.0)
            ax.bar(np.arange(len(ests)) + gi * width, vals, width=width, label=g)
        ax.set_xticks(np.arange(len(ests)) + 0.4)
        ax.set_xticklabels(ests, rotation=45, ha="right")
        ax.set_ylabel("|Pearson r|")
        ax.set_title("Estimation strength by user activeness")
        ax.legend()
        fig.tight_layout()
        p = fig_dir / "activeness.png"
        fig.savefig(p, dpi=150)
        plt.close(fig)
        written.append(p)

    sweep_path = reports_dir / "nl_sweep.csv"
    if sweep_path.exists():
        rows = list(csv.DictReader(open(sweep_path, encoding="utf-8")))
        ns = sorted({int(r["n_top"]) for r in rows})
        ls = sorted({int(r["l_max"]) for r in rows})
        grid = np.full((len(ns), len(ls)), np.nan)
        for r in rows:
            grid[ns.index(int(r["n_top"])), ls.index(int(r["l_max"]))] = float(r["win_rate"])
        plt = _plt()
        fig, ax = plt.subplots(figsize=(5, 4))
        im = ax.imshow(grid, origin="lower", aspect="auto", cmap="viridis")
        ax.set_xticks(range(len(ls)))
        ax.set_xticklabels(ls)
        ax.set_yticks(range(len(ns)))
        ax.set_yticklabels(ns)
        ax.set_xlabel("L")
        ax.set_ylabel("N")
        ax.set_title("Win rate over the (N, L) grid")
        fig.colorbar(im, ax=ax)
        fig.tight_layout()
        p = fig_dir / "nl_sweep.png"
        fig.savefig(p, dpi=150)
        plt.close(fig)
        written.append(p)

    for stem, title in (("dynamism_groups", "Interest dynamism"),
                        ("diversity_groups", "List diversity")):
        path = reports_dir / f"{stem}.csv"
        if not path.exists():
            continue
        rows = list(csv.DictReader(open(path, encoding="utf-8")))
        xs = [int(r["group_index"]) for r in rows]
        ys = [float(r["mean_log_lidu"]) for r in rows]
        plt = _plt()
        fig, ax = plt.subplots(figsize=(4.5, 3.5))
        ax.plot(xs, ys, marker="o", color="#4878a8")
        ax.set_xticks(xs)
        ax.set_xlabel(f"{title} group (low to high)")
        ax.set_ylabel("mean log LiDu")
        ax.set_title(f"Uncertainty vs {title.lower()}")
        fig.tight_layout()
        p = fig_dir / f"{stem}.png"
        fig.savefig(p, dpi=150)
        plt.close(fig)
        written.append(p)
    return written


def render_synth_figures(out_dir) -> list:
    """Figures for a `synth` output directory; returns the files written."""
    out_dir = Path(out_dir)
    table_path = out_dir / "table.csv"
    if not table_path.exists():
        raise ValidationError(f"{out_dir} has no table.csv")
    fig_dir = out_dir / "figures"
    fig_dir.mkdir(exist_ok=True)
    rows = list(csv.DictReader(open(table_path, encoding="utf-8")))
    by_est: dict = defaultdict(lambda: defaultdict(list))
    for r in rows:
        if r["pearson_r"]:
            by_est[r["estimator"]][float(r["density"])].append(float(r["pearson_r"]))
    written = []
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5, 4))
    for est, per_density in sorted(by_est.items()):
        densities = sorted(per_density)
        means = [float(np.mean(per_density[d])) for d in densities]
        ax.plot(densities, means, marker="o", label=est)
    ax.axhline(0.0, color="gray", linewidth=1, linestyle="--")
    ax.set_xlabel("training density")
    ax.set_ylabel("mean Pearson r vs correctness")
    ax.set_title("Uncertainty-correctness correlation vs density")
    ax.legend()
    fig.tight_layout()
    p = fig_dir / "density_trend.png"
    fig.savefig(p, dpi=150)
    plt.close(fig)
    written.append(p)

    freq_path = out_dir / "freq_quartiles.csv"
    if freq_path.exists():
        rows = list(csv.DictReader(open(freq_path, encoding="utf-8")))
        lidu_rows = [r for r in rows if r["estimator"] == "lidu" and r["pearson_r"]]
        quartiles = sorted({int(r["quartile"]) for r in lidu_rows})
        means = [
            float(np.mean([float(r["pearson_r"]) for r in lidu_rows if int(r["quartile"]) == q]))
            for q in quartiles
        ]
        _bar_figure(
            [f"Q{q}" for q in quartiles], means,
            "Correlation by sampling-weight quartile", "mean Pearson r",
            fig_dir / "freq_quartiles.png", hline=0.0,
        )
        written.append(fig_dir / "freq_quartiles.png")
    return written


def render_report(target_dir) -> dict:
    """Dispatch on directory contents; writes summary.csv for run outputs
    and figures for whichever artifacts are present."""
    target_dir = Path(target_dir)
    outputs: dict = {"figures": [], "csv": []}
    summary_path = target_dir / "reports" / "summary.json"
    if summary_path.exists():
        with open(summary_path, encoding="utf-8") as fh:
            summary = json.load(fh)["estimators"]
        csv_path = target_dir / "reports" / "summary.csv"
        write_summary_csv(summary, csv_path)
        outputs["csv"].append(csv_path)
        outputs["figures"].extend(render_run_figures(target_dir))
    elif (target_dir / "table.csv").exists():
        outputs["figures"].extend(render_synth_figures(target_dir))
    else:
        raise ValidationError(
            f"{target_dir} holds neither run reports nor a synthetic table"
        )
    return outputs
