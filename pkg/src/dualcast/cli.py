"""Command-line entry point.

Subcommands: synth, train, eval, predict, ablate, sweep. Every command is
deterministic under a fixed --seed; errors exit nonzero with one
machine-parseable line on stderr.

Exit codes: 0 ok, 2 usage, 3 unreadable file, 4 config validation,
5 data parse error, 1 anything else.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from . import checkpoint as ckpt
from . import config as cfgmod
from .data import DataError, ParseError, RawDataset, gen_synthetic, load_csv
from .model import ConfigError, DagModel
from .tensor import ContractError
from .training import (
    AblationVariant,
    DagTrainable,
    config_fingerprint,
    evaluate,
    lookback_sweep,
    make_bundle,
    run_ablation,
    train,
)

EXIT_OK = 0
EXIT_FILE = 3
EXIT_CONFIG = 4
EXIT_DATA = 5


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _read_config(path):
    try:
        entries = cfgmod.parse_config_file(path)
    except OSError as exc:
        raise CliError(EXIT_FILE, f"cannot read config: {exc}") from exc
    cfgmod.validate_keys(entries)
    return entries


def _apply_overrides(entries, args):
    if getattr(args, "seed", None) is not None:
        for key in ("model.seed", "train.seed", "synth.seed"):
            entries[key] = str(args.seed)
    if getattr(args, "lambda1", None) is not None:
        entries["model.lambda1"] = str(args.lambda1)
    if getattr(args, "lambda2", None) is not None:
        entries["model.lambda2"] = str(args.lambda2)
    return entries


def _load_dataset(entries) -> RawDataset:
    path = entries.get("data.path")
    if path is None:
        return gen_synthetic(cfgmod.build_synthetic_spec(entries))
    endo_count = entries.get("data.endo_count")
    endo_names = entries.get("data.endo_names")
    try:
        return load_csv(
            path,
            endo_count=int(endo_count) if endo_count else None,
            endo_names=[n.strip() for n in endo_names.split(",")] if endo_names else None,
        )
    except OSError as exc:
        raise CliError(EXIT_FILE, f"cannot read dataset: {exc}") from exc


def _ratios(entries):
    return cfgmod.parse_split(entries.get("data.split", "7:1:2"))


def _write_metrics(path, rows):
    out = open(path, "w", newline="") if path else sys.stdout
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["run_id", "variant", "horizon", "mse", "mae"])
        for row in rows:
            writer.writerow(row)
    finally:
        if path:
            out.close()


def _report_rows(run_id, variant, report):
    rows = [
        [run_id, variant, str(step + 1), f"{mse:.10g}", f"{mae:.10g}"]
        for step, (mse, mae) in enumerate(zip(report.per_step_mse, report.per_step_mae))
    ]
    rows.append([run_id, variant, "avg", f"{report.mse:.10g}", f"{report.mae:.10g}"])
    return rows


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args):
    entries = _apply_overrides(_read_config(args.config), args)
    spec = cfgmod.build_synthetic_spec(entries)
    dataset = gen_synthetic(spec)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(dataset.channel_names)
        for t in range(dataset.length):
            writer.writerow([f"{v:.17g}" for v in dataset.values[:, t]])
    print(f"wrote {dataset.length} steps x {dataset.n_channels} channels to {args.out}")
    return EXIT_OK


def cmd_train(args):
    import os

    entries = _apply_overrides(_read_config(args.config), args)
    dataset = _load_dataset(entries)
    dag_cfg = cfgmod.build_dag_config(entries, dataset.endo_count, dataset.exo_count)
    train_cfg = cfgmod.build_train_config(entries)
    bundle = make_bundle(dataset, _ratios(entries), dag_cfg.lookback, dag_cfg.horizon)
    model = DagModel(dag_cfg)
    trace = train(DagTrainable(model), bundle.train, bundle.val, train_cfg)

    out_dir = args.out or entries.get("out.dir", ".")
    os.makedirs(out_dir, exist_ok=True)
    ckpt_path = os.path.join(out_dir, "checkpoint.bin")
    ckpt.save(ckpt_path, model, run_config=entries)
    trace_path = os.path.join(out_dir, "loss_trace.csv")
    keys = sorted({k for row in trace.rows for k in row})
    with open(trace_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch"] + keys)
        for i, row in enumerate(trace.rows, 1):
            writer.writerow([i] + [f"{row[k]:.10g}" if k in row else "" for k in keys])
    print(f"trained {trace.epochs_run} epochs, best val l_f {trace.best_val:.6g}")
    print(f"checkpoint: {ckpt_path}")
    print(f"loss trace: {trace_path}")
    return EXIT_OK


def _load_eval_parts(args):
    try:
        model, run_config = ckpt.load(args.checkpoint)
    except OSError as exc:
        raise CliError(EXIT_FILE, f"cannot read checkpoint: {exc}") from exc
    entries = dict(run_config)
    if args.data:
        entries["data.path"] = args.data
    if getattr(args, "endo_count", None):
        entries["data.endo_count"] = str(args.endo_count)
    if getattr(args, "split", None):
        entries["data.split"] = args.split
    dataset = _load_dataset(entries)
    cfg = model.config
    if dataset.endo_count != cfg.n_endo or dataset.exo_count != cfg.n_exo:
        raise CliError(
            EXIT_CONFIG,
            f"dataset channels (D={dataset.exo_count}, N={dataset.endo_count}) do not "
            f"match checkpoint (D={cfg.n_exo}, N={cfg.n_endo})",
        )
    bundle = make_bundle(dataset, _ratios(entries), cfg.lookback, cfg.horizon)
    return model, entries, bundle


def cmd_eval(args):
    model, entries, bundle = _load_eval_parts(args)
    windows = getattr(bundle, args.segment)
    if not windows:
        raise CliError(EXIT_DATA, f"no windows in segment {args.segment!r}")
    run_id = config_fingerprint(model.config, entries)
    report = evaluate(DagTrainable(model), windows, fingerprint=run_id)
    _write_metrics(args.out, _report_rows(run_id, "full", report))
    return EXIT_OK


def cmd_predict(args):
    model, entries, bundle = _load_eval_parts(args)
    windows = getattr(bundle, args.segment)
    if not windows:
        raise CliError(EXIT_DATA, f"no windows in segment {args.segment!r}")
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["window", "channel", "step", "value"])
        for w, sample in enumerate(windows):
            if args.no_future_exo:
                pred = model.predict_without_future_exo(sample)
            else:
                pred = model.predict(sample)
            for c in range(pred.shape[0]):
                for s in range(pred.shape[1]):
                    writer.writerow([w, c, s, f"{pred[c, s]:.17g}"])
    finally:
        if args.out:
            out.close()
    return EXIT_OK


def cmd_ablate(args):
    entries = _apply_overrides(_read_config(args.config), args)
    dataset = _load_dataset(entries)
    dag_cfg = cfgmod.build_dag_config(entries, dataset.endo_count, dataset.exo_count)
    train_cfg = cfgmod.build_train_config(entries)
    reports = run_ablation(dataset, _ratios(entries), dag_cfg, train_cfg)
    rows = []
    for variant in AblationVariant:
        report = reports[variant]
        rows.append([report.fingerprint, variant.value, "avg",
                     f"{report.mse:.10g}", f"{report.mae:.10g}"])
    _write_metrics(args.out, rows)
    return EXIT_OK


def cmd_sweep(args):
    entries = _apply_overrides(_read_config(args.config), args)
    dataset = _load_dataset(entries)
    dag_cfg = cfgmod.build_dag_config(entries, dataset.endo_count, dataset.exo_count)
    train_cfg = cfgmod.build_train_config(entries)
    lookbacks = [int(x) for x in args.lookbacks.split(",")]
    rows = []
    results = lookback_sweep(dataset, _ratios(entries), lookbacks,
                             dag_cfg.horizon, dag_cfg, train_cfg)
    for entry in results:
        h = entry["lookback"]
        if "skipped" in entry:
            print(f"skipped H={h}: {entry['skipped']}", file=sys.stderr)
            continue
        report = entry["report"]
        rows.append([report.fingerprint, f"H{h}", "avg",
                     f"{report.mse:.10g}", f"{report.mae:.10g}"])
    _write_metrics(args.out, rows)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dualcast",
        description="Dual-path causal forecasting with exogenous variables",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="flat key=value run config")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)

    p = sub.add_parser("synth", help="generate a synthetic CSV dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    common(p)
    p.add_argument("--lambda1", type=float, default=None)
    p.add_argument("--lambda2", type=float, default=None)
    p.set_defaults(func=cmd_train)

    def eval_like(p):
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--data", default=None, help="dataset CSV (default: from checkpoint)")
        p.add_argument("--endo-count", type=int, default=None, dest="endo_count")
        p.add_argument("--split", default=None)
        p.add_argument("--segment", default="test", choices=["train", "val", "test"])
        p.add_argument("--out", default=None)

    p = sub.add_parser("eval", help="compute MSE/MAE metrics for a checkpoint")
    eval_like(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="emit per-window predictions")
    eval_like(p)
    p.add_argument("--no-future-exo", action="store_true",
                   help="replace future exogenous input with the model's own forecast")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("ablate", help="train and score all ablation variants")
    common(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("sweep", help="train one model per lookback length")
    common(p)
    p.add_argument("--lookbacks", required=True, help="comma-separated lookbacks")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, DataError) as exc:
        print(f"error: data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ContractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
