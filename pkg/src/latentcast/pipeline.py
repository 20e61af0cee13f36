"""End-to-end batch pipeline: ingest, split, factorize, select, forecast, evaluate.

The run configuration is a versioned YAML file (see FORMATS.md); every stage
writes its artifacts into the run's output directory and reports its runtime.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import m4io, rank_selection, selection, trmf
from .audit import AccessAudit, serve
from .forecasters import DEFAULT_METHODS, MethodInapplicable, MethodMenu, fit_predict
from .metrics import EvalReport, OwaReport, evaluate_panel, naive2, owa
from .panel import SeriesMatrix, SplitSpec, split

__all__ = ["RunConfig", "RunResult", "BenchmarkReport", "run", "ConfigError", "CONFIG_VERSION"]

CONFIG_VERSION = 1


class ConfigError(ValueError):
    """A run configuration is malformed or references missing files."""


@dataclass(frozen=True)
class RunConfig:
    """Everything a pipeline run needs; mirrors the YAML config file."""

    data_path: str
    metadata_path: str | None = None
    period: int = 12
    split: SplitSpec = field(default_factory=SplitSpec)
    trmf: trmf.TrmfConfig = field(default_factory=trmf.TrmfConfig)
    fold_length: int = 6
    min_train: int = 24
    methods: tuple[str, ...] = DEFAULT_METHODS
    method_overrides: tuple = ()
    rank_mode: str = "fixed"
    rank_grid: tuple[int, ...] = rank_selection.DEFAULT_RANK_GRID
    output_dir: str = "latentcast-out"
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.rank_mode not in ("fixed", "elbow"):
            raise ConfigError(f"rank_mode must be 'fixed' or 'elbow', got {self.rank_mode!r}")
        if self.period < 1:
            raise ConfigError(f"period must be positive, got {self.period}")

    def menu(self) -> MethodMenu:
        return MethodMenu.from_names(self.methods, dict(self.method_overrides))

    def validate_paths(self) -> None:
        if not Path(self.data_path).exists():
            raise ConfigError(f"data file not found: {self.data_path}")
        if self.metadata_path and not Path(self.metadata_path).exists():
            raise ConfigError(f"metadata file not found: {self.metadata_path}")

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        raw = dict(raw)
        version = raw.pop("config_version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ConfigError(f"unsupported config_version {version}; this build reads {CONFIG_VERSION}")
        known = {
            "data", "metadata", "period", "split", "trmf", "folds", "methods",
            "method_overrides", "rank_mode", "rank_grid", "output", "seed", "workers",
        }
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw: dict = {}
        if "data" not in raw:
            raise ConfigError("config needs a 'data' entry")
        kw["data_path"] = str(raw["data"])
        if raw.get("metadata"):
            kw["metadata_path"] = str(raw["metadata"])
        if "period" in raw:
            kw["period"] = int(raw["period"])
        if "split" in raw:
            kw["split"] = SplitSpec(**{k: int(v) for k, v in raw["split"].items()})
        if "trmf" in raw:
            t = dict(raw["trmf"])
            if "lags" in t:
                t["lags"] = tuple(int(l) for l in t["lags"])
            kw["trmf"] = trmf.TrmfConfig(**t)
        if "folds" in raw:
            kw["fold_length"] = int(raw["folds"].get("length", 6))
            kw["min_train"] = int(raw["folds"].get("min_train", 24))
        if "methods" in raw:
            kw["methods"] = tuple(raw["methods"])
        if "method_overrides" in raw:
            kw["method_overrides"] = tuple((k, dict(v)) for k, v in raw["method_overrides"].items())
        if "rank_mode" in raw:
            kw["rank_mode"] = str(raw["rank_mode"])
        if "rank_grid" in raw:
            kw["rank_grid"] = tuple(int(k) for k in raw["rank_grid"])
        if "output" in raw:
            kw["output_dir"] = str(raw["output"])
        if "seed" in raw:
            kw["seed"] = int(raw["seed"])
        if "workers" in raw:
            kw["workers"] = int(raw["workers"])
        return cls(**kw)

    @classmethod
    def from_yaml(cls, path) -> "RunConfig":
        with open(path) as fh:
            raw = yaml.safe_load(fh)
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: config must be a mapping")
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return {
            "config_version": CONFIG_VERSION,
            "data": self.data_path,
            "metadata": self.metadata_path,
            "period": self.period,
            "split": {"max_train": self.split.max_train, "horizon": self.split.horizon},
            "trmf": dataclasses.asdict(self.trmf) | {"lags": list(self.trmf.lags)},
            "folds": {"length": self.fold_length, "min_train": self.min_train},
            "methods": list(self.methods),
            "method_overrides": {k: dict(v) for k, v in self.method_overrides},
            "rank_mode": self.rank_mode,
            "rank_grid": list(self.rank_grid),
            "output": self.output_dir,
            "seed": self.seed,
            "workers": self.workers,
        }


@dataclass(frozen=True)
class BenchmarkReport:
    """Direct per-series application of every menu method versus the latent pipeline."""

    latent_pipeline: OwaReport
    direct: dict[str, OwaReport]
    direct_fallbacks: dict[str, int]
    best_direct: str
    stage_seconds: dict[str, float]

    def as_dict(self) -> dict:
        return {
            "latent_pipeline": self.latent_pipeline.as_dict(),
            "direct": {
                name: {**report.as_dict(), "naive2_fallbacks": self.direct_fallbacks[name]}
                for name, report in self.direct.items()
            },
            "best_direct": self.best_direct,
            "best_direct_owa": self.direct[self.best_direct].owa,
            "stage_seconds": self.stage_seconds,
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.as_dict(), fh, indent=2)


@dataclass
class RunResult:
    eval_report: EvalReport
    benchmark: BenchmarkReport | None
    forecasts: SeriesMatrix
    model: trmf.TrmfModel
    selected_rank: int
    excluded: dict[str, str]
    degraded: dict[str, str]
    stage_seconds: dict[str, float]
    output_dir: Path


class _StageClock:
    def __init__(self):
        self.seconds: dict[str, float] = {}
        self._t0 = time.perf_counter()

    def stage(self, name):
        clock = self

        class _Timer:
            def __enter__(self):
                self.start = time.perf_counter()

            def __exit__(self, *exc):
                clock.seconds[name] = clock.seconds.get(name, 0.0) + time.perf_counter() - self.start

        return _Timer()

    @property
    def total(self) -> float:
        return time.perf_counter() - self._t0


def normalize_train(train: SeriesMatrix) -> tuple[SeriesMatrix, np.ndarray]:
    """Scale each series by the mean magnitude of its observed training values.

    Panels mix series whose levels differ by orders of magnitude; factorizing
    the raw matrix would let the largest series dominate every latent solve and
    unbalance the factor regularization.  Returns the scaled panel and the
    per-series scales (1.0 where a series has no usable scale).
    """
    scales = np.ones(train.n_series)
    for i in range(train.n_series):
        obs = train.row(i).observed_values()
        if len(obs):
            s = float(np.mean(np.abs(obs)))
            if s > 0:
                scales[i] = s
    return (
        SeriesMatrix(train.values / scales[:, None], train.mask, train.ids, train.period),
        scales,
    )


def _evaluable(panel: SeriesMatrix, spec: SplitSpec) -> tuple[SeriesMatrix, dict[str, str]]:
    """Drop series the protocol cannot evaluate, with a reason per id.

    A series needs a fully observed test window and at least period + 1
    observed training points so the seasonal-naive scale and the reference
    forecast exist.
    """
    h = spec.horizon
    need = h + panel.period + 1
    keep, excluded = [], {}
    for i in range(panel.n_series):
        observed = int(panel.mask[i].sum())
        if observed < need:
            excluded[panel.ids[i]] = f"{observed} observed points; need {need}"
        elif not panel.mask[i, panel.n_time - h :].all():
            excluded[panel.ids[i]] = "missing values inside the test window"
        else:
            keep.append(i)
    if not keep:
        raise ConfigError("no evaluable series in the dataset")
    if excluded:
        kept = SeriesMatrix(
            panel.values[keep], panel.mask[keep], tuple(panel.ids[i] for i in keep), panel.period
        )
        return kept, excluded
    return panel, excluded


def _sanitize_forecasts(forecasts: np.ndarray, train: SeriesMatrix) -> tuple[np.ndarray, dict[str, str]]:
    """Replace non-finite forecast rows with the Naive2 reference, flagged by id."""
    degraded = {}
    out = forecasts.copy()
    h = forecasts.shape[1]
    for i in range(train.n_series):
        if not np.all(np.isfinite(out[i])):
            out[i] = naive2(train.row(i).observed_values(), train.period, h)
            degraded[train.ids[i]] = "non-finite forecast; degraded to the reference forecast"
    return out, degraded


def _direct_forecasts(train: SeriesMatrix, name: str, menu: MethodMenu, horizon: int,
                      audit: AccessAudit | None = None) -> tuple[np.ndarray, int]:
    """Apply one method to every series directly; Naive2 fills in where it fails."""
    out = np.empty((train.n_series, horizon))
    fallbacks = 0
    for i in range(train.n_series):
        insample = train.row(i).observed_values()
        history = serve(audit, f"direct:{train.ids[i]}:{name}", insample, len(insample), len(insample))
        try:
            out[i] = fit_predict(menu.make(name), history, horizon, train.period)
        except MethodInapplicable:
            out[i] = naive2(insample, train.period, horizon)
            fallbacks += 1
    return out, fallbacks


def run_benchmark(train: SeriesMatrix, test: SeriesMatrix, menu: MethodMenu,
                  pipeline_report: EvalReport, stage_seconds: dict[str, float],
                  categories: dict[str, str] | None = None,
                  audit: AccessAudit | None = None) -> BenchmarkReport:
    """Score each menu method applied per-series against the latent pipeline.

    All rows share one Naive2 reference forecast computed once for the dataset.
    """
    h = test.n_time
    reference = np.vstack([
        naive2(train.row(i).observed_values(), train.period, h) for i in range(train.n_series)
    ])
    direct: dict[str, OwaReport] = {}
    fallbacks: dict[str, int] = {}
    for name in menu.names:
        fc, nfall = _direct_forecasts(train, name, menu, h, audit=audit)
        report = evaluate_panel(train, test, fc, categories=categories, reference=reference)
        direct[name] = report.aggregate
        fallbacks[name] = nfall
    best = min(direct, key=lambda name: direct[name].owa)
    return BenchmarkReport(
        latent_pipeline=pipeline_report.aggregate,
        direct=direct,
        direct_fallbacks=fallbacks,
        best_direct=best,
        stage_seconds=stage_seconds,
    )


def _write_latent_csv(model: trmf.TrmfModel, latent_matrix: np.ndarray, path) -> None:
    K, T = model.X.shape
    h = latent_matrix.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["latent_id"] + [f"X{t + 1}" for t in range(T)] + [f"F{k + 1}" for k in range(h)])
        for k in range(K):
            writer.writerow(
                [f"z{k + 1}"]
                + [repr(float(v)) for v in model.X[k]]
                + [repr(float(v)) for v in latent_matrix[k]]
            )


def run(config: RunConfig, benchmark: bool = True, audit: AccessAudit | None = None) -> RunResult:
    """Execute the full pipeline and write all artifacts to the output directory."""
    config.validate_paths()
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    clock = _StageClock()

    with clock.stage("ingest"):
        panel = m4io.load_m4_csv(config.data_path, period=config.period)
        categories = m4io.load_metadata_csv(config.metadata_path) if config.metadata_path else None
        panel = panel.align_ends()

    with clock.stage("split"):
        panel, excluded = _evaluable(panel, config.split)
        train, test = split(panel, config.split)

    with clock.stage("factorize"):
        if audit is not None:
            audit.note("factorize:train", train.n_time, train.n_time)
        scaled_train, scales = normalize_train(train)
        selected_rank = config.trmf.rank
        curve = None
        if config.rank_mode == "elbow":
            curve = rank_selection.sweep(scaled_train, config.rank_grid, config.trmf.replace(seed=config.seed),
                                         workers=config.workers)
            selected_rank = rank_selection.pick_elbow(curve)
        model = trmf.fit(scaled_train, config.trmf.replace(rank=selected_rank, seed=config.seed))

    with clock.stage("select_forecast"):
        panel_fc = selection.forecast_panel(
            model, config.menu(), config.split.horizon,
            fold_length=config.fold_length, min_train=config.min_train,
            ids=train.ids, period=config.period, workers=config.workers, audit=audit,
        )
        forecasts, degraded = _sanitize_forecasts(panel_fc.forecasts.values * scales[:, None], train)

    with clock.stage("evaluate"):
        notes = dict(degraded)
        eval_report = evaluate_panel(train, test, forecasts, categories=categories, notes=notes)

    bench = None
    if benchmark:
        with clock.stage("benchmark"):
            bench = run_benchmark(train, test, config.menu(), eval_report,
                                  dict(clock.seconds), categories=categories, audit=audit)

    with clock.stage("write"):
        m4io.write_forecast_csv(train.ids, forecasts, out / "forecasts.csv")
        with open(out / "scales.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "scale"])
            for sid, s in zip(train.ids, scales):
                writer.writerow([sid, repr(float(s))])
        selection.write_cv_csv(panel_fc.reports, out / "cv_folds.csv")
        selection.write_cv_summary_json(panel_fc.reports, panel_fc.latent_forecasts, out / "cv_summary.json")
        _write_latent_csv(model, panel_fc.latent_matrix, out / "latent_series.csv")
        model.save(out / "model.npz")
        if curve is not None:
            curve.to_csv(out / "elbow.csv")
        payload = eval_report.as_dict()
        payload["excluded"] = excluded
        with open(out / "eval_report.json", "w") as fh:
            json.dump(payload, fh, indent=2)
        if bench is not None:
            bench = dataclasses.replace(bench, stage_seconds=dict(clock.seconds))
            bench.save(out / "benchmark_report.json")
        with open(out / "run_config.yaml", "w") as fh:
            yaml.safe_dump(config.to_dict(), fh, sort_keys=False)

    return RunResult(
        eval_report=eval_report,
        benchmark=bench,
        forecasts=SeriesMatrix.fully_observed(forecasts, ids=train.ids, period=config.period),
        model=model,
        selected_rank=selected_rank,
        excluded=excluded,
        degraded=degraded,
        stage_seconds=dict(clock.seconds),
        output_dir=out,
    )
