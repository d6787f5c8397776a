"""Command-line front end.

Subcommands: estimate (centers + optional p-values), test (full pipeline to a
rejection set), simulate (replicated scenario tables), bh (Benjamini-Hochberg
on a p-value column). Every option has a documented default; values come from,
in increasing precedence, built-in defaults, a JSON config file (--config),
and command-line flags. Each run writes a manifest echoing the fully resolved
configuration, the seed, and library versions, sufficient to reproduce it.

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .dataset import NeighborhoodQuery, load_csv, scale_covariates, transform_response
from .errors import MirrorFdrError, NumericalError, ValidationError
from .mirror import all_pvalues, to_pvalue_scale
from .simulation import bh_procedure, replicate, scenario
from .symmetry import KdeConfig
from .threshold import TrainConfig, fit_threshold, rejections
from .trimming import TrimConfig, estimate_all_centers

DEFAULTS = {
    # input
    "input": None,
    "covariates": [],
    "response": "y",
    "label": None,
    "transform": "identity",
    "shift": 0.0,
    # neighborhoods
    "delta": 0.05,
    "norm": "euclidean",
    "min_size": 50,
    # trimming
    "z_crit": 1.96,
    "batch_k": 5,
    "min_retained": 30,
    "kde_bandwidth": None,
    "sqrt_n": True,
    # p-values
    "pvalues": False,
    "pvalue_source": "original",
    # threshold training
    "alpha": [0.1],
    "lambda_sharp": 200.0,
    "lambda2_init": 0.0,
    "rho": 0.01,
    "eta": 0.001,
    "epochs": 500,
    "pretrain_epochs": 200,
    "learning_rate": 0.01,
    "hidden_dim": 32,
    # simulate
    "scenario": None,
    "reps": 10,
    "method": ["proposed"],
    "n_null": 4000,
    "n_alt": 1000,
    "scale": "variance",
    # bh
    "pcol": "p_value",
    # run control
    "seed": 0,
    "threads": 1,
    "out": "mirrorfdr_out",
}


def _parse_list(value, cast):
    if isinstance(value, str):
        return [cast(v) for v in value.split(",") if v.strip()]
    if isinstance(value, (list, tuple)):
        return [cast(v) for v in value]
    return [cast(value)]


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge defaults, config file, and explicit flags (flags win)."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            try:
                file_cfg = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"config {args.config}: invalid JSON ({exc})")
        unknown = set(file_cfg) - set(DEFAULTS)
        if unknown:
            raise ValidationError(
                f"config {args.config}: unknown key(s) {', '.join(sorted(unknown))}")
        cfg.update(file_cfg)
    for key in DEFAULTS:
        flag_val = getattr(args, key, None)
        if flag_val is not None:
            cfg[key] = flag_val
    cfg["covariates"] = _parse_list(cfg["covariates"], str)
    cfg["alpha"] = _parse_list(cfg["alpha"], float)
    cfg["method"] = _parse_list(cfg["method"], str)
    return cfg


def _query(cfg) -> NeighborhoodQuery:
    return NeighborhoodQuery(delta=float(cfg["delta"]), norm=cfg["norm"],
                             min_size=int(cfg["min_size"]))


def _trim(cfg) -> TrimConfig:
    bw = cfg["kde_bandwidth"]
    return TrimConfig(
        z_crit=float(cfg["z_crit"]),
        batch_k=int(cfg["batch_k"]),
        min_retained=int(cfg["min_retained"]),
        kde=KdeConfig(bandwidth=None if bw is None else float(bw)),
        query=_query(cfg),
        sqrt_n=bool(cfg["sqrt_n"]),
    )


def _train(cfg, alpha: float) -> TrainConfig:
    return TrainConfig(
        alpha=alpha,
        lambda_sharp=float(cfg["lambda_sharp"]),
        lambda2_init=float(cfg["lambda2_init"]),
        rho=float(cfg["rho"]),
        eta=float(cfg["eta"]),
        epochs=int(cfg["epochs"]),
        pretrain_epochs=int(cfg["pretrain_epochs"]),
        learning_rate=float(cfg["learning_rate"]),
        seed=int(cfg["seed"]),
    )


def _load_input(cfg):
    if not cfg["input"]:
        raise ValidationError("an input CSV is required (--input)")
    if not cfg["covariates"]:
        raise ValidationError("covariate column names are required (--covariates)")
    ds = load_csv(cfg["input"], covariates=cfg["covariates"],
                  response=cfg["response"], label=cfg["label"])
    ds = transform_response(ds, cfg["transform"], shift=float(cfg["shift"]))
    return ds


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _write_manifest(out_dir: Path, command: str, cfg: dict, outputs, started: float):
    manifest = {
        "command": command,
        "config": {k: (list(v) if isinstance(v, (list, tuple)) else v)
                   for k, v in cfg.items()},
        "seed": cfg["seed"],
        "versions": {
            "mirrorfdr": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": sys.version.split()[0],
        },
        "outputs": sorted(str(o) for o in outputs),
        "wall_time_s": round(time.perf_counter() - started, 3),
    }
    path = out_dir / "manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path


def _flags_str(flags) -> str:
    return "|".join(sorted(flags))


def cmd_estimate(cfg: dict) -> int:
    started = time.perf_counter()
    out_dir = Path(cfg["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    ds_raw = _load_input(cfg)
    ds = scale_covariates(ds_raw)
    trim = _trim(cfg)
    centers = estimate_all_centers(ds, trim, n_jobs=int(cfg["threads"]))
    pvals = all_pvalues(ds, centers, trim.query, source=cfg["pvalue_source"]) \
        if cfg["pvalues"] else None

    header = ["index", *cfg["covariates"], "y", "m_hat", "t0",
              "n_retained", "iterations", "flags"]
    if pvals is not None:
        header.append("p_value")
    rows = []
    for i in range(ds.n):
        row = [i, *ds_raw.x[i].tolist(), ds.y[i], centers.m[i], centers.t0[i],
               len(centers.retained[i]), int(centers.iterations[i]),
               _flags_str(centers.flags[i])]
        if pvals is not None:
            row.append(pvals.p[i])
        rows.append(row)
    est_path = out_dir / "estimates.csv"
    _write_csv(est_path, header, rows)
    _write_manifest(out_dir, "estimate", cfg, [est_path], started)
    return 0


def cmd_test(cfg: dict) -> int:
    started = time.perf_counter()
    if len(cfg["alpha"]) != 1:
        raise ValidationError("test requires exactly one --alpha value")
    alpha = cfg["alpha"][0]
    out_dir = Path(cfg["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    ds_raw = _load_input(cfg)
    ds = scale_covariates(ds_raw)
    trim = _trim(cfg)
    centers = estimate_all_centers(ds, trim, n_jobs=int(cfg["threads"]))
    pvals = all_pvalues(ds, centers, trim.query, source=cfg["pvalue_source"])

    trace_rows = []
    if alpha == 0.0:
        # no rejection can satisfy FDP <= 0: the threshold collapses to zero
        t_hat = np.zeros(ds.n)
        rejected = np.array([], dtype=int)
        result_r, result_vhat, result_fdp = 0, 0, 0.0
        pretrain_mse = None
    else:
        targets = to_pvalue_scale(ds, centers, trim.query, centers.t0,
                                  source=cfg["pvalue_source"])
        net, trace = fit_threshold(ds.x, pvals.p, targets, _train(cfg, alpha),
                                   hidden_dim=int(cfg["hidden_dim"]))
        res = rejections(net, ds.x, pvals.p)
        t_hat = res.threshold_at
        rejected = res.rejected
        result_r, result_vhat, result_fdp = res.R, res.V_hat, res.FDP_hat
        trace_rows = trace.rows
        pretrain_mse = trace.pretrain_mse

    rej_mask = np.zeros(ds.n, dtype=int)
    rej_mask[rejected] = 1
    rej_path = out_dir / "rejections.csv"
    _write_csv(
        rej_path,
        ["index", *cfg["covariates"], "y", "p", "t_hat", "rejected"],
        [[i, *ds_raw.x[i].tolist(), ds.y[i], pvals.p[i], t_hat[i], rej_mask[i]]
         for i in range(ds.n)],
    )
    trace_path = out_dir / "trace.csv"
    _write_csv(trace_path,
               ["epoch", "R_sigma", "V_sigma", "FDP_sigma", "lambda2", "loss"],
               trace_rows)
    summary = {
        "R": result_r,
        "V_hat": result_vhat,
        "FDP_hat": result_fdp,
        "alpha": alpha,
        "n": ds.n,
        "pretrain_mse": pretrain_mse,
        "trace_path": str(trace_path),
        "config": {k: (list(v) if isinstance(v, (list, tuple)) else v)
                   for k, v in cfg.items()},
    }
    summary_path = out_dir / "summary.json"
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
    _write_manifest(out_dir, "test", cfg,
                    [rej_path, trace_path, summary_path], started)
    return 0


def cmd_simulate(cfg: dict) -> int:
    started = time.perf_counter()
    if cfg["scenario"] is None:
        raise ValidationError("a scenario id (1-4) is required (--scenario)")
    spec = scenario(int(cfg["scenario"]), n_null=int(cfg["n_null"]),
                    n_alt=int(cfg["n_alt"]), scale=cfg["scale"])
    out_dir = Path(cfg["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    table, failures = replicate(
        spec, reps=int(cfg["reps"]), alphas=cfg["alpha"], methods=cfg["method"],
        seed=int(cfg["seed"]), trim=_trim(cfg),
        train=_train(cfg, cfg["alpha"][0]), threads=int(cfg["threads"]))
    table_path = out_dir / "table.csv"
    _write_csv(
        table_path,
        ["method", "alpha", "R_mean", "R_std", "FDR_mean", "FDR_std",
         "TPR_mean", "TPR_std"],
        [[m.method, m.alpha, m.r_mean, m.r_std, m.fdr_mean, m.fdr_std,
          m.tpr_mean, m.tpr_std] for m in table],
    )
    cfg_echo = dict(cfg)
    cfg_echo["failures"] = failures
    _write_manifest(out_dir, "simulate", cfg_echo, [table_path], started)
    if failures:
        print(f"{len(failures)} replicate(s) failed and were excluded; "
              f"see manifest.json", file=sys.stderr)
    return 0


def cmd_bh(cfg: dict) -> int:
    started = time.perf_counter()
    if not cfg["input"]:
        raise ValidationError("an input CSV is required (--input)")
    if len(cfg["alpha"]) != 1:
        raise ValidationError("bh requires exactly one --alpha value")
    out_dir = Path(cfg["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(cfg["input"], newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or cfg["pcol"] not in reader.fieldnames:
            raise ValidationError(
                f"{cfg['input']}: missing p-value column {cfg['pcol']!r}")
        try:
            p = np.array([float(row[cfg["pcol"]]) for row in reader])
        except ValueError as exc:
            raise ValidationError(f"{cfg['input']}: unparseable p-value ({exc})")
    rejected = bh_procedure(p, cfg["alpha"][0])
    mask = np.zeros(p.size, dtype=int)
    mask[rejected] = 1
    out_path = out_dir / "bh_rejections.csv"
    _write_csv(out_path, ["index", "p", "rejected"],
               [[i, p[i], mask[i]] for i in range(p.size)])
    _write_manifest(out_dir, "bh", cfg, [out_path], started)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mirrorfdr",
        description="Covariate-adaptive FDR control on raw (covariate, response) data.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out", help=f"output directory (default {DEFAULTS['out']})")
    common.add_argument("--seed", type=int, help="master seed (default 0)")
    common.add_argument("--threads", type=int, help="worker cap (default 1)")
    common.add_argument("--alpha", help="nominal FDR level(s), comma-separated")
    common.add_argument("--delta", type=float,
                        help="neighborhood bandwidth on scaled covariates (default 0.05)")
    common.add_argument("--transform", choices=["identity", "log", "log_shift"],
                        help="response transform (default identity)")
    common.add_argument("--shift", type=float, help="shift c for log_shift")

    io_opts = argparse.ArgumentParser(add_help=False)
    io_opts.add_argument("--input", help="input CSV (UTF-8, header row)")
    io_opts.add_argument("--covariates", help="covariate column names, comma-separated")
    io_opts.add_argument("--response", help="response column name (default y)")
    io_opts.add_argument("--label", help="optional 0/1 truth label column")

    fit_opts = argparse.ArgumentParser(add_help=False)
    for name, kind in [("norm", str), ("min_size", int), ("z_crit", float),
                       ("batch_k", int), ("min_retained", int),
                       ("kde_bandwidth", float), ("pvalue_source", str),
                       ("lambda_sharp", float), ("lambda2_init", float),
                       ("rho", float), ("eta", float), ("epochs", int),
                       ("pretrain_epochs", int), ("learning_rate", float),
                       ("hidden_dim", int)]:
        fit_opts.add_argument(f"--{name.replace('_', '-')}", dest=name, type=kind)

    p_est = sub.add_parser("estimate", parents=[common, io_opts, fit_opts],
                           help="estimate per-hypothesis null centers (and p-values)")
    p_est.add_argument("--pvalues", action="store_const", const=True,
                       help="append a p_value column")
    p_est.set_defaults(func=cmd_estimate)

    p_test = sub.add_parser("test", parents=[common, io_opts, fit_opts],
                            help="full pipeline: centers, p-values, threshold, rejections")
    p_test.set_defaults(func=cmd_test)

    p_sim = sub.add_parser("simulate", parents=[common, fit_opts],
                           help="replicated scenario runs with R/FDR/TPR tables")
    p_sim.add_argument("--scenario", type=int, help="scenario id (1-4)")
    p_sim.add_argument("--reps", type=int, help="replication count (default 10)")
    p_sim.add_argument("--method", help="proposed,bh (comma-separated)")
    p_sim.add_argument("--n-null", dest="n_null", type=int)
    p_sim.add_argument("--n-alt", dest="n_alt", type=int)
    p_sim.add_argument("--scale", choices=["variance", "std"])
    p_sim.set_defaults(func=cmd_simulate)

    p_bh = sub.add_parser("bh", parents=[common],
                          help="Benjamini-Hochberg step-up on a p-value column")
    p_bh.add_argument("--input", help="CSV containing the p-value column")
    p_bh.add_argument("--pcol", help="p-value column name (default p_value)")
    p_bh.set_defaults(func=cmd_bh)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return args.func(cfg)
    except ValidationError as exc:
        print(json.dumps({"error": {"type": "validation", "message": str(exc)}},
                         sort_keys=True), file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(json.dumps({"error": {"type": "numerical", "message": str(exc)}},
                         sort_keys=True), file=sys.stderr)
        return 3
    except MirrorFdrError as exc:
        print(json.dumps({"error": {"type": "error", "message": str(exc)}},
                         sort_keys=True), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
