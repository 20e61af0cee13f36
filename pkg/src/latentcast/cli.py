"""Command-line driver: run, factorize, rank-sweep, cv, evaluate, benchmark."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import m4io, pipeline, rank_selection, selection, trmf
from .metrics import evaluate_panel
from .panel import SplitSpec, split


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML run configuration (see FORMATS.md)")
    parser.add_argument("--data", help="M4-format CSV of series (overrides the config)")
    parser.add_argument("--metadata", help="optional id,category CSV for report grouping")
    parser.add_argument("--output", help="output directory")
    parser.add_argument("--seed", type=int, help="random seed for the factorization")
    parser.add_argument("--threads", type=int, help="worker threads for independent fits")
    parser.add_argument("--period", type=int, help="seasonal period of the data (default 12)")
    parser.add_argument("--max-train", type=int, help="training window cap per series")
    parser.add_argument("--horizon", type=int, help="test/forecast horizon")
    parser.add_argument("--rank", type=int, help="fixed latent dimension")
    parser.add_argument("--rank-mode", choices=["fixed", "elbow"], help="how to choose the latent dimension")


def _build_config(args) -> pipeline.RunConfig:
    if args.config:
        config = pipeline.RunConfig.from_yaml(args.config)
    elif args.data:
        config = pipeline.RunConfig(data_path=args.data)
    else:
        raise pipeline.ConfigError("provide --config or --data")
    updates: dict = {}
    if args.data:
        updates["data_path"] = args.data
    if args.metadata:
        updates["metadata_path"] = args.metadata
    if args.output:
        updates["output_dir"] = args.output
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.threads is not None:
        updates["workers"] = args.threads
    if args.period is not None:
        updates["period"] = args.period
    if args.max_train is not None or args.horizon is not None:
        updates["split"] = SplitSpec(
            max_train=args.max_train if args.max_train is not None else config.split.max_train,
            horizon=args.horizon if args.horizon is not None else config.split.horizon,
        )
    if args.rank is not None:
        updates["trmf"] = config.trmf.replace(rank=args.rank)
    if args.rank_mode:
        updates["rank_mode"] = args.rank_mode
    import dataclasses

    return dataclasses.replace(config, **updates) if updates else config


def _load_train_test(config: pipeline.RunConfig):
    config.validate_paths()
    panel = m4io.load_m4_csv(config.data_path, period=config.period).align_ends()
    panel, excluded = pipeline._evaluable(panel, config.split)
    train, test = split(panel, config.split)
    return train, test, excluded


def _cmd_run(args) -> int:
    config = _build_config(args)
    result = pipeline.run(config, benchmark=not args.no_benchmark)
    agg = result.eval_report.aggregate
    print(f"rank: {result.selected_rank}")
    print(f"series evaluated: {len(result.eval_report.scores)}  excluded: {len(result.excluded)}  "
          f"degraded: {len(result.degraded)}")
    print(f"sMAPE: {agg.smape_method:.4f}  MASE: {agg.mase_method:.4f}  OWA: {agg.owa:.4f}")
    if result.benchmark is not None:
        best = result.benchmark.best_direct
        print(f"best direct method: {best}  OWA: {result.benchmark.direct[best].owa:.4f}")
    print(f"artifacts in {result.output_dir}")
    return 0


def _cmd_benchmark(args) -> int:
    config = _build_config(args)
    result = pipeline.run(config, benchmark=True)
    report = result.benchmark
    width = max(len(n) for n in report.direct)
    print(f"{'method':<{width}}  {'sMAPE':>8}  {'MASE':>7}  {'OWA':>7}")
    for name, row in sorted(report.direct.items(), key=lambda kv: kv[1].owa):
        print(f"{name:<{width}}  {row.smape_method:8.4f}  {row.mase_method:7.4f}  {row.owa:7.4f}")
    lp = report.latent_pipeline
    print(f"{'latent-pipeline':<{width}}  {lp.smape_method:8.4f}  {lp.mase_method:7.4f}  {lp.owa:7.4f}")
    print(f"artifacts in {result.output_dir}")
    return 0


def _cmd_factorize(args) -> int:
    config = _build_config(args)
    train, _test, excluded = _load_train_test(config)
    scaled, _scales = pipeline.normalize_train(train)
    model = trmf.fit(scaled, config.trmf.replace(seed=config.seed))
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    model.save(out / "model.npz")
    recon = trmf.reconstruction_error(model, scaled)
    print(f"fitted rank {model.rank} on {train.n_series} series "
          f"({len(excluded)} excluded), {len(model.objective_trace) - 1} iterations")
    print(f"reconstruction error (scaled): {recon.aggregate:.6f}")
    print(f"model written to {out / 'model.npz'}")
    return 0


def _cmd_rank_sweep(args) -> int:
    config = _build_config(args)
    train, _test, _excluded = _load_train_test(config)
    scaled, _scales = pipeline.normalize_train(train)
    curve = rank_selection.sweep(scaled, config.rank_grid, config.trmf.replace(seed=config.seed),
                                 workers=config.workers)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    curve.to_csv(out / "elbow.csv")
    chosen = rank_selection.pick_elbow(curve)
    for k, e in zip(curve.ranks, curve.errors):
        print(f"k={k:>3}  error={e:.6f}")
    print(f"elbow: k={chosen}")
    print(f"curve written to {out / 'elbow.csv'}")
    return 0


def _cmd_cv(args) -> int:
    config = _build_config(args)
    train, _test, _excluded = _load_train_test(config)
    scaled, _scales = pipeline.normalize_train(train)
    model = trmf.fit(scaled, config.trmf.replace(seed=config.seed))
    panel_fc = selection.forecast_panel(
        model, config.menu(), config.split.horizon,
        fold_length=config.fold_length, min_train=config.min_train,
        ids=train.ids, period=config.period, workers=config.workers,
    )
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    selection.write_cv_csv(panel_fc.reports, out / "cv_folds.csv")
    selection.write_cv_summary_json(panel_fc.reports, panel_fc.latent_forecasts, out / "cv_summary.json")
    for report in panel_fc.reports:
        print(f"{report.latent_id}: top3 = {', '.join(report.top)}")
    print(f"reports written to {out}")
    return 0


def _cmd_evaluate(args) -> int:
    config = _build_config(args)
    train, test, excluded = _load_train_test(config)
    ids, matrix = m4io.read_forecast_csv(args.forecasts)
    by_id = {sid: row for sid, row in zip(ids, matrix)}
    missing = [sid for sid in train.ids if sid not in by_id]
    if missing:
        raise pipeline.ConfigError(f"forecast file lacks series: {missing[:5]}{'...' if len(missing) > 5 else ''}")
    forecasts = np.vstack([by_id[sid] for sid in train.ids])
    categories = m4io.load_metadata_csv(config.metadata_path) if config.metadata_path else None
    report = evaluate_panel(train, test, forecasts, categories=categories)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = report.as_dict()
    payload["excluded"] = excluded
    with open(out / "eval_report.json", "w") as fh:
        json.dump(payload, fh, indent=2)
    agg = report.aggregate
    print(f"sMAPE: {agg.smape_method:.4f}  MASE: {agg.mase_method:.4f}  OWA: {agg.owa:.4f}")
    print(f"report written to {out / 'eval_report.json'}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="latentcast",
        description="Forecast large panels of short series through a factorized latent space.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="full pipeline: ingest, factorize, select, forecast, evaluate")
    p_run.add_argument("--no-benchmark", action="store_true", help="skip the direct-vs-latent comparison")
    p_bench = sub.add_parser("benchmark", help="direct per-series methods versus the latent pipeline")
    p_fact = sub.add_parser("factorize", help="fit the factor model and save it")
    p_sweep = sub.add_parser("rank-sweep", help="reconstruction error across candidate ranks")
    p_cv = sub.add_parser("cv", help="cross-validated method ranking per latent series")
    p_eval = sub.add_parser("evaluate", help="score an existing forecast CSV against a dataset")
    p_eval.add_argument("--forecasts", required=True, help="forecast CSV (id,F1..Fh)")

    for p in (p_run, p_bench, p_fact, p_sweep, p_cv, p_eval):
        _add_common(p)

    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "benchmark": _cmd_benchmark,
        "factorize": _cmd_factorize,
        "rank-sweep": _cmd_rank_sweep,
        "cv": _cmd_cv,
        "evaluate": _cmd_evaluate,
    }
    try:
        return handlers[args.command](args)
    except (pipeline.ConfigError, m4io.IngestError, trmf.TrmfError, selection.SelectionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
