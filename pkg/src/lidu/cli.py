"""Command-line driver wiring ingestion, training, uncertainty backends,
baselines and evaluation into reproducible experiment runs.

Subcommands: ``synth`` (synthetic correlation experiment), ``ingest``
(log -> canonical split file), ``train`` (split file -> checkpoint),
``run`` (log -> per-user estimator reports and metric summary), and
``report`` (reports -> summary CSV plus figures).

Parameter precedence is flag > ``--config`` JSON file > built-in default.
``LIDU_SEED`` supplies the default seed. Identical invocations write byte
identical CSV outputs.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import interest_dynamism, list_diversity, quantile_group_means, write_group_means
from .backends import (
    ensemble_scores_rows,
    gaussian_head_scores_rows,
    mc_dropout_scores_rows,
)
from .baselines import TopNScores, negate_for_comparison, nqc, smv, wgraph_all
from .core import LiduConfig, LiduError, RankedPrediction
from .data import (
    RawLogSpec,
    activeness_groups,
    filter_ratings,
    k_core,
    leave_one_out,
    load_interactions,
    read_split,
    write_split,
)
from .evaluation import (
    EstimatorReport,
    jsonable,
    ndcg_at_k,
    summarize,
    win_rate_delta,
    write_report_csv,
    write_summary_json,
)
from .models import (
    TrainConfig,
    save_model,
    train_bpr,
    train_gaussian_nll_implicit,
    user_mean_loss,
)
from .report import render_report, write_summary_csv
from .synthetic import SyntheticSpec, run_synthetic_experiment, write_table
from .uncertainty import lidu_topn, pointwise_uncertainty

ESTIMATOR_NAMES = (
    "lidu_dp", "lidu_en", "lidu_vb", "loss", "pointwise",
    "smv", "nqc", "wgraph_WACC", "wgraph_WADC", "wgraph_WAND", "wgraph_WD",
)
QPP_NAMES = ("smv", "nqc", "wgraph_WACC", "wgraph_WADC", "wgraph_WAND", "wgraph_WD")

DEFAULT_NL_GRID = "1,5,10,50,100x10,50,100,500,1000"


def _env_seed() -> int:
    return int(os.environ.get("LIDU_SEED", "42"))


def _load_config(path):
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise LiduError(f"config file {path} must hold a JSON object")
    return cfg


def _resolve(args, file_cfg, defaults):
    """flag > config file > default, with all defaults materialized."""
    resolved = {}
    for key, default in defaults.items():
        flag = getattr(args, key, None)
        if isinstance(default, bool):
            resolved[key] = bool(flag) or bool(file_cfg.get(key, default))
        elif flag is not None:
            resolved[key] = flag
        else:
            resolved[key] = file_cfg.get(key, default)
    return resolved


def _float_list(text):
    return [float(x) for x in str(text).split(",") if x != ""]


def _int_list(text):
    return [int(x) for x in str(text).split(",") if x != ""]


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------

SYNTH_DEFAULTS = {
    "n": 500, "d": 8, "density": 0.04, "alpha": 5.0, "seeds": 5,
    "seed": None, "test_size": 1000, "valid_size": 1000,
    "dropout_p": 0.2, "passes": 20, "max_epochs": 300,
    "sweep_density": None, "freq_buckets": False, "out": "synth_out",
    "verbose": False,
}


def cmd_synth(args) -> int:
    file_cfg = _load_config(args.config)
    r = _resolve(args, file_cfg, SYNTH_DEFAULTS)
    if r["seed"] is None:
        r["seed"] = _env_seed()
    seeds = tuple(r["seed"] + k for k in range(int(r["seeds"])))
    spec = SyntheticSpec(
        n=int(r["n"]), d=int(r["d"]), density=float(r["density"]),
        alpha=float(r["alpha"]), test_size=int(r["test_size"]),
        valid_size=int(r["valid_size"]), seeds=seeds,
        dropout_p=float(r["dropout_p"]), n_passes=int(r["passes"]),
        max_epochs=int(r["max_epochs"]),
    )
    grid = _float_list(r["sweep_density"]) if r["sweep_density"] else None
    if grid:
        for density in grid:
            SyntheticSpec(n=spec.n, d=spec.d, density=density, seeds=seeds)
    out = Path(r["out"])
    out.mkdir(parents=True, exist_ok=True)
    print(f"running synthetic experiment: n={spec.n} d={spec.d} "
          f"densities={grid or [spec.density]} seeds={list(seeds)}", flush=True)
    result = run_synthetic_experiment(
        spec, density_grid=grid, freq_buckets=r["freq_buckets"], verbose=r["verbose"]
    )
    freq_path = out / "freq_quartiles.csv" if r["freq_buckets"] else None
    write_table(result, out / "table.csv", meta_path=out / "meta.json", freq_path=freq_path)
    for density in result.densities:
        for est in ("lidu", "pointwise"):
            print(f"  density={density:.4f} {est}: mean r = {result.mean_r(density, est):+.4f}")
    print(f"wrote {out / 'table.csv'}")
    return 0


# ---------------------------------------------------------------------------
# ingest
# ---------------------------------------------------------------------------

INGEST_DEFAULTS = {
    "user_col": "user", "item_col": "item", "time_col": "time",
    "rating_col": None, "rating_threshold": None, "k_core": 0,
    "out": "split.csv",
}


def _ingest(input_path, r):
    spec = RawLogSpec(
        path=str(input_path), user_col=r["user_col"], item_col=r["item_col"],
        time_col=r["time_col"], rating_col=r["rating_col"],
        rating_threshold=r["rating_threshold"], k_core=int(r["k_core"]),
    )
    inter = load_interactions(spec)
    if spec.rating_threshold is not None:
        inter = filter_ratings(inter, spec.rating_threshold)
    if spec.k_core > 0:
        inter = k_core(inter, spec.k_core)
    return leave_one_out(inter)


def cmd_ingest(args) -> int:
    file_cfg = _load_config(args.config)
    r = _resolve(args, file_cfg, INGEST_DEFAULTS)
    if not args.input or not Path(args.input).exists():
        raise LiduError(f"input log {args.input!r} does not exist")
    split = _ingest(args.input, r)
    write_split(split, r["out"])
    counts = split.counts()
    print(f"ingested {args.input}: train={counts['train']} valid={counts['valid']} "
          f"test={counts['test']} -> {r['out']}")
    return 0


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

TRAIN_DEFAULTS = {
    "model": "bpr", "d": 64, "learning_rate": 0.01, "batch_size": 32,
    "patience": 10, "max_epochs": 100, "l2": 0.0, "seed": None,
    "ndcg_k": 1000, "out": "model.ckpt",
}


def cmd_train(args) -> int:
    file_cfg = _load_config(args.config)
    r = _resolve(args, file_cfg, TRAIN_DEFAULTS)
    if r["seed"] is None:
        r["seed"] = _env_seed()
    if not args.split or not Path(args.split).exists():
        raise LiduError(f"split file {args.split!r} does not exist")
    split = read_split(args.split)
    cfg = TrainConfig(
        learning_rate=float(r["learning_rate"]), batch_size=int(r["batch_size"]),
        patience=int(r["patience"]), max_epochs=int(r["max_epochs"]),
        seed=int(r["seed"]), l2=float(r["l2"]), d=int(r["d"]), eval_k=int(r["ndcg_k"]),
    )
    if r["model"] == "bpr":
        model = train_bpr(split, cfg)
    elif r["model"] == "gaussian":
        model = train_gaussian_nll_implicit(split, cfg)
    else:
        raise LiduError(f"unknown model kind {r['model']!r} (expected bpr or gaussian)")
    save_model(model, r["out"])
    print(f"trained {r['model']} model ({len(model.user_ids)} users x "
          f"{len(model.item_ids)} items, d={model.d}) -> {r['out']}")
    return 0


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

RUN_DEFAULTS = {
    **INGEST_DEFAULTS,
    "k_core": 5, "out": "run_out",
    "d": 64, "learning_rate": 0.01, "batch_size": 32, "patience": 10,
    "max_epochs": 100, "l2": 0.0, "seed": None,
    "n_top": 100, "l_max": 1000, "dropout_p": 0.2, "passes": 50,
    "ensemble_size": 5, "ndcg_k": 1000, "delta": 0.05,
    "activeness_split": False, "activeness_threshold": 5,
    "sweep_n_l": None,
}


def _split_index(model, split):
    """Per-user-row train item rows (chronological), valid row, test row."""
    train_rows = {u: [] for u in range(len(model.user_ids))}
    for it in split.train:
        train_rows[model.user_row(it.user_id)].append(model.item_row(it.item_id))
    valid_row = {model.user_row(it.user_id): model.item_row(it.item_id) for it in split.valid}
    test_row = {model.user_row(it.user_id): model.item_row(it.item_id) for it in split.test}
    return train_rows, valid_row, test_row


def _estimator_battery(primary, ensemble, vb_model, split, r):
    """Per-user estimates for every estimator plus shared NDCG labels.

    Candidates are all items the user did not touch in train or valid (the
    held-out test item always stays rankable). LiDu configs clamp N and L
    to the candidate count per user. QPP estimates are negated so that
    every estimator enters the harness as "higher = worse".
    """
    n_top, l_max = int(r["n_top"]), int(r["l_max"])
    p, passes, seed, k = float(r["dropout_p"]), int(r["passes"]), int(r["seed"]), int(r["ndcg_k"])
    train_rows, valid_row, test_row = _split_index(primary, split)
    n_items = len(primary.item_ids)
    all_items = np.arange(n_items, dtype=np.int64)
    estimates = {name: [] for name in ESTIMATOR_NAMES}
    kept_users, ndcg_vals = [], []
    dp_preds, top_lists, dyn_keys = [], [], []
    skipped = 0
    for u_row, uid in enumerate(primary.user_ids):
        t_row = test_row[u_row]
        seen = set(train_rows[u_row])
        seen.add(valid_row[u_row])
        seen.discard(t_row)
        cand = np.setdiff1d(all_items, np.fromiter(seen, dtype=np.int64, count=len(seen)))
        if cand.size < 2:
            skipped += 1
            continue
        det = primary.item_emb[cand] @ primary.user_emb[u_row]
        t_pos = int(np.searchsorted(cand, t_row))
        rank = 1 + int((det > det[t_pos]).sum()) + int(((det == det[t_pos]) & (cand < t_row)).sum())
        ndcg_vals.append(ndcg_at_k(rank, min(k, cand.size)))
        kept_users.append(uid)

        l_eff = min(l_max, int(cand.size))
        cfg_u = LiduConfig(n_top=min(n_top, l_eff), l_max=l_eff,
                           dropout_p=p, n_passes=passes)
        order = np.lexsort((cand, -det))
        n_qpp = max(2, min(n_top, cand.size))
        top_rows = cand[order[:n_qpp]]
        tops = TopNScores(det[order[:n_qpp]], tuple(int(x) for x in top_rows))
        estimates["nqc"].append(nqc(tops))
        estimates["smv"].append(smv(tops))
        for variant, value in wgraph_all(top_rows, primary.item_emb).items():
            estimates[f"wgraph_{variant}"].append(value)

        m_dp, v_dp = mc_dropout_scores_rows(primary, u_row, cand, p, passes, seed)
        pred_dp = RankedPrediction(uid, cand, m_dp, v_dp)
        estimates["lidu_dp"].append(lidu_topn(pred_dp, cfg_u).value)
        estimates["pointwise"].append(pointwise_uncertainty(pred_dp, cfg_u.n_top))
        dp_preds.append(pred_dp)

        m_en, v_en = ensemble_scores_rows(ensemble, u_row, cand)
        estimates["lidu_en"].append(lidu_topn(RankedPrediction(uid, cand, m_en, v_en), cfg_u).value)

        m_vb, v_vb = gaussian_head_scores_rows(vb_model, u_row, cand)
        estimates["lidu_vb"].append(lidu_topn(RankedPrediction(uid, cand, m_vb, v_vb), cfg_u).value)

        estimates["loss"].append(user_mean_loss(primary, split, uid, eval_seed=seed))

        top_lists.append(top_rows)
        rows = train_rows[u_row]
        dyn_keys.append(interest_dynamism(rows, primary.item_emb) if len(rows) >= 2 else None)
    if skipped:
        warnings.warn(f"skipped {skipped} user(s) with fewer than 2 candidate items")

    ndcg_arr = np.asarray(ndcg_vals)
    for name in QPP_NAMES:
        estimates[name] = negate_for_comparison(estimates[name])
    reports = {
        name: EstimatorReport(tuple(kept_users), np.asarray(estimates[name]), ndcg_arr)
        for name in ESTIMATOR_NAMES
    }
    extras = {
        "kept_users": kept_users, "ndcg": ndcg_arr, "dp_preds": dp_preds,
        "top_lists": top_lists, "dyn_keys": dyn_keys,
    }
    return reports, extras


def _nl_sweep_rows(extras, reports, r):
    spec = str(r["sweep_n_l"])
    try:
        n_part, l_part = spec.split("x")
        n_grid, l_grid = _int_list(n_part), _int_list(l_part)
    except ValueError:
        raise LiduError(f"bad --sweep-n-l spec {spec!r}, expected e.g. '1,10,100x10,100,1000'")
    users = tuple(extras["kept_users"])
    ndcg = extras["ndcg"]
    rows = []
    for n_top in n_grid:
        for l_max in l_grid:
            if n_top > l_max:
                continue
            vals = []
            for pred in extras["dp_preds"]:
                l_eff = min(l_max, len(pred))
                cfg = LiduConfig(n_top=min(n_top, l_eff), l_max=l_eff,
                                 dropout_p=float(r["dropout_p"]), n_passes=int(r["passes"]))
                vals.append(lidu_topn(pred, cfg).value)
            rep = EstimatorReport(users, np.asarray(vals), ndcg)
            rows.append({"n_top": n_top, "l_max": l_max,
                         "win_rate": win_rate_delta(rep, float(r["delta"]))})
    return rows


def _write_simple_csv(rows, columns, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c]
                             for c in columns])


def cmd_run(args) -> int:
    file_cfg = _load_config(args.config)
    r = _resolve(args, file_cfg, RUN_DEFAULTS)
    if r["seed"] is None:
        r["seed"] = _env_seed()
    r["seed"] = int(r["seed"])
    if not args.input or not Path(args.input).exists():
        raise LiduError(f"input log {args.input!r} does not exist")
    r["input"] = str(args.input)

    out = Path(r["out"])
    reports_dir = out / "reports"
    models_dir = out / "models"
    reports_dir.mkdir(parents=True, exist_ok=True)
    models_dir.mkdir(parents=True, exist_ok=True)

    split = _ingest(args.input, r)
    write_split(split, out / "split.csv")
    counts = split.counts()
    print(f"split: train={counts['train']} valid={counts['valid']} test={counts['test']}",
          flush=True)

    cfg = TrainConfig(
        learning_rate=float(r["learning_rate"]), batch_size=int(r["batch_size"]),
        patience=int(r["patience"]), max_epochs=int(r["max_epochs"]),
        seed=r["seed"], l2=float(r["l2"]), d=int(r["d"]), eval_k=int(r["ndcg_k"]),
    )
    from dataclasses import replace as _replace

    print("training primary BPR model", flush=True)
    primary = train_bpr(split, cfg)
    ensemble = [primary]
    for k in range(1, int(r["ensemble_size"])):
        print(f"training ensemble member {k + 1}/{int(r['ensemble_size'])}", flush=True)
        ensemble.append(train_bpr(split, _replace(cfg, seed=cfg.seed + k)))
    print("training Gaussian-head model", flush=True)
    vb_model = train_gaussian_nll_implicit(split, cfg)

    save_model(primary, models_dir / "bpr_main.ckpt")
    for k, member in enumerate(ensemble[1:], start=1):
        save_model(member, models_dir / f"bpr_ens{k}.ckpt")
    save_model(vb_model, models_dir / "gaussian_head.ckpt")

    print("computing estimators", flush=True)
    reports, extras = _estimator_battery(primary, ensemble, vb_model, split, r)
    summary = summarize(reports, delta_frac=float(r["delta"]))
    write_report_csv(reports, reports_dir / "per_user.csv")
    write_summary_json(summary, reports_dir / "summary.json", config=jsonable(r))

    if r["activeness_split"]:
        active, inactive = activeness_groups(split, int(r["activeness_threshold"]))
        rows = []
        for group, members in (("active", active), ("inactive", inactive)):
            member_set = set(members)
            subs = {name: rep.subset(member_set) for name, rep in reports.items()}
            subs = {name: rep for name, rep in subs.items() if len(rep) >= 2}
            for name, metrics in summarize(subs, delta_frac=float(r["delta"])).items():
                rows.append({"group": group, "estimator": name, **metrics})
        _write_simple_csv(
            rows, ["group", "estimator", "win_rate", "pearson_r", "neg_pearson_r",
                   "sare", "n_users"],
            reports_dir / "activeness.csv",
        )

    if r["sweep_n_l"]:
        rows = _nl_sweep_rows(extras, reports, r)
        _write_simple_csv(rows, ["n_top", "l_max", "win_rate"], reports_dir / "nl_sweep.csv")

    lidu_dp = reports["lidu_dp"].estimates
    dyn = [(k, v, u) for k, v, u in zip(extras["dyn_keys"], lidu_dp, extras["kept_users"])
           if k is not None]
    if len(dyn) >= 4:
        keys, vals, uids = zip(*dyn)
        write_group_means(
            quantile_group_means(keys, vals, uids, n_groups=4, drop_top=True),
            reports_dir / "dynamism_groups.csv",
        )
    div_keys = [list_diversity(rows, primary.item_emb) for rows in extras["top_lists"]]
    if len(div_keys) >= 4:
        write_group_means(
            quantile_group_means(div_keys, lidu_dp, extras["kept_users"], n_groups=4),
            reports_dir / "diversity_groups.csv",
        )

    meta = {"command": "run", "version": __version__, "config": jsonable(r),
            "counts": counts, "n_users": len(extras["kept_users"]),
            "n_items": len(primary.item_ids)}
    with open(out / "meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")

    for name in ESTIMATOR_NAMES:
        m = summary[name]
        r_txt = "nan" if m["pearson_r"] is None or m["pearson_r"] != m["pearson_r"] \
            else f"{m['pearson_r']:+.4f}"
        print(f"  {name:<14} win_rate={m['win_rate']:.4f} pearson_r={r_txt} "
              f"sare={m['sare']:.2f}")
    print(f"wrote {reports_dir / 'per_user.csv'}")
    return 0


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def cmd_report(args) -> int:
    target = Path(args.target)
    if not target.exists():
        raise LiduError(f"report target {args.target!r} does not exist")
    outputs = render_report(target)
    for path in outputs["csv"]:
        print(f"wrote {path}")
    for path in outputs["figures"]:
        print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_common(sub):
    sub.add_argument("--config", default=None, help="JSON file with defaults")
    sub.add_argument("--seed", type=int, default=None,
                     help="base random seed (default: $LIDU_SEED or 42)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lidu",
        description="List distribution uncertainty experiments and reports",
    )
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    synth = subs.add_parser("synth", help="run the synthetic correlation experiment")
    _add_common(synth)
    synth.add_argument("--n", type=int, default=None, help="matrix size (250/500/1000/2000)")
    synth.add_argument("--d", type=int, default=None, help="embedding dimension")
    synth.add_argument("--density", type=float, default=None, help="train density in (0, 0.04]")
    synth.add_argument("--alpha", type=float, default=None, help="Zipf sampling exponent")
    synth.add_argument("--seeds", type=int, default=None, help="number of seeds (base..base+k-1)")
    synth.add_argument("--test-size", dest="test_size", type=int, default=None)
    synth.add_argument("--valid-size", dest="valid_size", type=int, default=None)
    synth.add_argument("--dropout-p", dest="dropout_p", type=float, default=None)
    synth.add_argument("--passes", type=int, default=None, help="MC dropout passes")
    synth.add_argument("--max-epochs", dest="max_epochs", type=int, default=None)
    synth.add_argument("--sweep-density", dest="sweep_density", default=None,
                       help="comma list of densities replacing --density")
    synth.add_argument("--freq-buckets", dest="freq_buckets", action="store_true",
                       help="also emit per-quartile correlations by sampling weight")
    synth.add_argument("--verbose", action="store_true")
    synth.add_argument("--out", default=None, help="output directory")
    synth.set_defaults(func=cmd_synth)

    ingest = subs.add_parser("ingest", help="parse, filter and split an interaction log")
    _add_common(ingest)
    ingest.add_argument("--input", required=True, help="delimited log with header row")
    ingest.add_argument("--user-col", dest="user_col", default=None)
    ingest.add_argument("--item-col", dest="item_col", default=None)
    ingest.add_argument("--time-col", dest="time_col", default=None)
    ingest.add_argument("--rating-col", dest="rating_col", default=None)
    ingest.add_argument("--rating-threshold", dest="rating_threshold", type=float, default=None)
    ingest.add_argument("--k-core", dest="k_core", type=int, default=None)
    ingest.add_argument("--out", default=None, help="canonical split file")
    ingest.set_defaults(func=cmd_ingest)

    train = subs.add_parser("train", help="train one model from a split file")
    _add_common(train)
    train.add_argument("--split", required=True, help="canonical split file")
    train.add_argument("--model", default=None, choices=["bpr", "gaussian"])
    train.add_argument("--d", type=int, default=None)
    train.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
    train.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    train.add_argument("--patience", type=int, default=None)
    train.add_argument("--max-epochs", dest="max_epochs", type=int, default=None)
    train.add_argument("--l2", type=float, default=None)
    train.add_argument("--ndcg-k", dest="ndcg_k", type=int, default=None)
    train.add_argument("--out", default=None, help="checkpoint path")
    train.set_defaults(func=cmd_train)

    run = subs.add_parser("run", help="full pipeline: ingest, train, estimate, evaluate")
    _add_common(run)
    run.add_argument("--input", required=True, help="delimited log with header row")
    run.add_argument("--user-col", dest="user_col", default=None)
    run.add_argument("--item-col", dest="item_col", default=None)
    run.add_argument("--time-col", dest="time_col", default=None)
    run.add_argument("--rating-col", dest="rating_col", default=None)
    run.add_argument("--rating-threshold", dest="rating_threshold", type=float, default=None)
    run.add_argument("--k-core", dest="k_core", type=int, default=None)
    run.add_argument("--d", type=int, default=None)
    run.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
    run.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    run.add_argument("--patience", type=int, default=None)
    run.add_argument("--max-epochs", dest="max_epochs", type=int, default=None)
    run.add_argument("--l2", type=float, default=None)
    run.add_argument("--n-top", dest="n_top", type=int, default=None,
                     help="top ranks scored by the uncertainty (clamped per user)")
    run.add_argument("--l-max", dest="l_max", type=int, default=None,
                     help="deepest compared rank (clamped per user)")
    run.add_argument("--dropout-p", dest="dropout_p", type=float, default=None)
    run.add_argument("--passes", type=int, default=None)
    run.add_argument("--ensemble-size", dest="ensemble_size", type=int, default=None)
    run.add_argument("--ndcg-k", dest="ndcg_k", type=int, default=None)
    run.add_argument("--delta", type=float, default=None, help="win-rate rank-gap fraction")
    run.add_argument("--activeness-split", dest="activeness_split", action="store_true",
                     help="emit per-group metrics for active/inactive users")
    run.add_argument("--activeness-threshold", dest="activeness_threshold", type=int, default=None)
    run.add_argument("--sweep-n-l", dest="sweep_n_l", nargs="?", const=DEFAULT_NL_GRID,
                     default=None, help="win-rate grid, e.g. '1,10,100x10,100,1000'")
    run.add_argument("--out", default=None, help="output directory")
    run.set_defaults(func=cmd_run)

    rep = subs.add_parser("report", help="summary CSV and figures for an output directory")
    rep.add_argument("target", help="a run or synth output directory")
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except LiduError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
