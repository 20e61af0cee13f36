"""Forward-chaining cross-validation on the latent series, method ranking,
median-of-top-3 ensembling and reconstruction of full panel forecasts."""

from __future__ import annotations

import csv
import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .audit import AccessAudit, serve
from .forecasters import MethodInapplicable, MethodMenu, fit_predict
from .metrics import smape
from .panel import SeriesMatrix, SeriesView, reconstruct
from .trmf import TrmfModel

__all__ = [
    "Fold",
    "FoldPlan",
    "plan_folds",
    "MethodCv",
    "LatentCvReport",
    "LatentForecast",
    "PanelForecast",
    "rank_methods",
    "ensemble_forecast",
    "forecast_panel",
    "SelectionError",
    "write_cv_csv",
    "write_cv_summary_json",
]


class SelectionError(RuntimeError):
    """No method could produce a forecast for a latent series."""


@dataclass(frozen=True)
class Fold:
    """Train on [0, train_end), validate on [val_start, val_stop)."""

    train_end: int
    val_start: int
    val_stop: int


@dataclass(frozen=True)
class FoldPlan:
    fold_length: int
    min_train: int
    folds: tuple[Fold, ...]

    def __post_init__(self):
        prev_stop = None
        for f in self.folds:
            if f.train_end != f.val_start or f.val_stop <= f.val_start:
                raise ValueError(f"malformed fold {f}")
            if prev_stop is not None and f.val_start != prev_stop:
                raise ValueError("validation ranges must be consecutive and disjoint")
            prev_stop = f.val_stop


def plan_folds(n: int, fold_length: int = 6, min_train: int = 24) -> FoldPlan:
    """Expanding-window folds: validate each successive ``fold_length`` block
    on all data strictly before it, starting once ``min_train`` points exist.

    When not even one full block fits, falls back to a single shortened
    validation block (with a warning) if at least one point remains, else
    raises.
    """
    if fold_length < 1 or min_train < 1:
        raise ValueError("fold_length and min_train must be positive")
    folds = []
    train_end = min_train
    while train_end + fold_length <= n:
        folds.append(Fold(train_end, train_end, train_end + fold_length))
        train_end += fold_length
    if not folds:
        if n >= min_train + 1:
            warnings.warn(
                f"series length {n} fits no full fold of {fold_length}; "
                f"using one shortened validation block of {n - min_train}",
                stacklevel=2,
            )
            folds = [Fold(min_train, min_train, n)]
        else:
            raise ValueError(f"series length {n} cannot be validated with min_train={min_train}")
    return FoldPlan(fold_length, min_train, tuple(folds))


@dataclass(frozen=True)
class MethodCv:
    """One method's fold scores on one latent series (None = inapplicable fold)."""

    method: str
    fold_smapes: tuple
    mean_smape: float | None
    rank: int

    @property
    def applicable(self) -> bool:
        return self.mean_smape is not None


@dataclass(frozen=True)
class LatentCvReport:
    latent_id: str
    results: tuple[MethodCv, ...]
    top: tuple[str, ...]


@dataclass(frozen=True)
class LatentForecast:
    latent_id: str
    values: np.ndarray
    contributors: tuple[str, ...]


@dataclass(frozen=True)
class PanelForecast:
    """Full-dimensional forecasts with their latent provenance."""

    forecasts: SeriesMatrix
    latent_matrix: np.ndarray
    latent_forecasts: tuple[LatentForecast, ...]
    reports: tuple[LatentCvReport, ...]


def rank_methods(latent: SeriesView, menu: MethodMenu, plan: FoldPlan,
                 audit: AccessAudit | None = None) -> LatentCvReport:
    """Score every menu method on every fold and rank by mean validation sMAPE.

    Each fold fits on the fold's training prefix only and scores the forecast
    of the validation block.  Ties break by menu order; methods inapplicable on
    every fold rank strictly below all applicable ones and are barred from the
    top-3.
    """
    y = latent.values
    if plan.folds[-1].val_stop > len(y):
        raise ValueError(f"plan extends to {plan.folds[-1].val_stop} but series has {len(y)} points")
    rows = []
    for position, (name, _) in enumerate(menu.entries):
        scores = []
        for fold in plan.folds:
            history = serve(audit, f"cv:{latent.id}:fold@{fold.val_start}:{name}",
                            y, fold.train_end, fold.val_start)
            try:
                fc = fit_predict(menu.make(name), history, fold.val_stop - fold.val_start, latent.period)
            except MethodInapplicable:
                scores.append(None)
                continue
            scores.append(smape(y[fold.val_start : fold.val_stop], fc))
        usable = [s for s in scores if s is not None]
        mean = float(np.mean(usable)) if usable else None
        rows.append((name, position, tuple(scores), mean))

    applicable = sorted((r for r in rows if r[3] is not None), key=lambda r: (r[3], r[1]))
    inapplicable = [r for r in rows if r[3] is None]
    ranked = {name: i + 1 for i, (name, *_rest) in enumerate(applicable)}
    ranked.update({name: len(applicable) + i + 1 for i, (name, *_rest) in enumerate(inapplicable)})

    results = tuple(
        MethodCv(method=name, fold_smapes=scores, mean_smape=mean, rank=ranked[name])
        for name, _pos, scores, mean in rows
    )
    top = tuple(name for name, *_rest in applicable[:3])
    return LatentCvReport(latent_id=latent.id, results=results, top=top)


def ensemble_forecast(latent: SeriesView, report: LatentCvReport, menu: MethodMenu,
                      horizon: int, audit: AccessAudit | None = None) -> LatentForecast:
    """Refit the top-ranked methods on the full training series and take the
    elementwise median of the best three forecasts.

    A top method that fails on the full series is replaced by the next rank.
    With fewer than three applicable methods the median runs over what exists
    (the median of two is their mean).
    """
    y = latent.values
    n = len(y)
    by_rank = sorted((r for r in report.results if r.applicable), key=lambda r: r.rank)
    chosen: list[str] = []
    forecasts: list[np.ndarray] = []
    for row in by_rank:
        if len(chosen) == 3:
            break
        history = serve(audit, f"ensemble:{latent.id}:{row.method}", y, n, n)
        try:
            fc = fit_predict(menu.make(row.method), history, horizon, latent.period)
        except MethodInapplicable:
            continue
        chosen.append(row.method)
        forecasts.append(fc)
    if not forecasts:
        raise SelectionError(f"no applicable method for latent series {latent.id}")
    return LatentForecast(
        latent_id=latent.id,
        values=np.median(np.vstack(forecasts), axis=0),
        contributors=tuple(chosen),
    )


def _forecast_one_latent(k, model, menu, plan, horizon, period, audit, stabilize):
    x = model.X[k]
    shift = 0.0
    if stabilize:
        # Latent series hover around zero, where sMAPE saturates and fold
        # ranking degenerates into noise.  Ranking and refitting happen on a
        # positively shifted copy (a train-window constant, so no leakage);
        # the shift is removed from the final forecast.
        span = float(x.max() - x.min())
        if span > 0:
            shift = span - float(x.min())
    view = SeriesView(
        id=f"z{k + 1}",
        values=x + shift,
        mask=np.ones(model.X.shape[1], dtype=bool),
        period=period,
    )
    report = rank_methods(view, menu, plan, audit=audit)
    latent_fc = ensemble_forecast(view, report, menu, horizon, audit=audit)
    if shift:
        latent_fc = LatentForecast(
            latent_id=latent_fc.latent_id,
            values=latent_fc.values - shift,
            contributors=latent_fc.contributors,
        )
    return report, latent_fc


def forecast_panel(model: TrmfModel, menu: MethodMenu, horizon: int,
                   fold_length: int = 6, min_train: int = 24,
                   ids=None, period: int = 1, workers: int = 1,
                   audit: AccessAudit | None = None, stabilize: bool = True) -> PanelForecast:
    """Forecast every latent series by its own CV-selected ensemble, then
    compose the N x horizon panel forecast through the loadings."""
    K, T = model.X.shape
    plan = plan_folds(T, fold_length, min_train)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(
                lambda k: _forecast_one_latent(k, model, menu, plan, horizon, period, audit, stabilize),
                range(K),
            ))
    else:
        outcomes = [
            _forecast_one_latent(k, model, menu, plan, horizon, period, audit, stabilize) for k in range(K)
        ]

    reports = tuple(r for r, _ in outcomes)
    latent_forecasts = tuple(f for _, f in outcomes)
    latent_matrix = np.vstack([f.values for f in latent_forecasts])
    panel = reconstruct(model.F, latent_matrix, ids=ids, period=period)
    return PanelForecast(
        forecasts=panel,
        latent_matrix=latent_matrix,
        latent_forecasts=latent_forecasts,
        reports=reports,
    )


def write_cv_csv(reports, path) -> None:
    """Long-format fold scores: latent_id, method, fold, smape (empty = inapplicable)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["latent_id", "method", "fold", "smape"])
        for report in reports:
            for row in report.results:
                for fold_index, score in enumerate(row.fold_smapes):
                    writer.writerow([
                        report.latent_id,
                        row.method,
                        fold_index,
                        "" if score is None else repr(float(score)),
                    ])


def write_cv_summary_json(reports, latent_forecasts, path) -> None:
    payload = {}
    for report in reports:
        entry = {
            "ranking": [
                {
                    "method": r.method,
                    "rank": r.rank,
                    "mean_smape": r.mean_smape,
                    "applicable": r.applicable,
                }
                for r in sorted(report.results, key=lambda r: r.rank)
            ],
            "top3": list(report.top),
        }
        payload[report.latent_id] = entry
    for lf in latent_forecasts or ():
        payload[lf.latent_id]["ensemble_contributors"] = list(lf.contributors)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
