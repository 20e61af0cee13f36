"""Forecast accuracy metrics: sMAPE, MASE, the Naive2 reference and their OWA combination.

All functions are pure and operate on plain 1-D arrays; panel-level evaluation
lives in :func:`evaluate_panel`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "smape",
    "mase",
    "seasonal_naive_scale",
    "acf",
    "seasonality_test",
    "seasonal_indices",
    "naive2",
    "owa",
    "OwaReport",
    "SeriesScore",
    "EvalReport",
    "evaluate_panel",
    "DegenerateScaleError",
]


class DegenerateScaleError(ValueError):
    """The in-sample seasonal-naive error is exactly zero; MASE is undefined."""


def _check_pair(actual, forecast) -> tuple[np.ndarray, np.ndarray]:
    actual = np.asarray(actual, dtype=np.float64)
    forecast = np.asarray(forecast, dtype=np.float64)
    if actual.shape != forecast.shape:
        raise ValueError(f"length mismatch: {actual.shape} vs {forecast.shape}")
    if actual.size == 0:
        raise ValueError("empty input")
    return actual, forecast


def smape(actual, forecast) -> float:
    """Symmetric MAPE in percent: (2/h) * sum |Y - Yhat| / |Y + Yhat| * 100.

    A term where actual and forecast are both zero contributes 0 (the only
    finite continuous extension).
    """
    actual, forecast = _check_pair(actual, forecast)
    num = np.abs(actual - forecast)
    den = np.abs(actual + forecast)
    terms = np.divide(num, den, out=np.zeros_like(num), where=den != 0)
    # A zero denominator with a nonzero numerator (Y = -Yhat != 0) is kept
    # infinite rather than silently capped.
    terms[(den == 0) & (num != 0)] = np.inf
    return float(2.0 / len(actual) * terms.sum() * 100.0)


def seasonal_naive_scale(insample, period: int) -> float:
    """Mean absolute in-sample seasonal difference: the MASE denominator."""
    insample = np.asarray(insample, dtype=np.float64)
    n = len(insample)
    if n <= period:
        raise ValueError(f"need more than period={period} in-sample points, got {n}")
    return float(np.mean(np.abs(insample[period:] - insample[:-period])))


def mase(actual, forecast, insample, period: int) -> float:
    """Mean absolute scaled error against the in-sample seasonal-naive error.

    Raises :class:`DegenerateScaleError` when the scale is exactly zero
    (a constant seasonal series); callers exclude such series from aggregates.
    """
    actual, forecast = _check_pair(actual, forecast)
    scale = seasonal_naive_scale(insample, period)
    if scale == 0.0:
        raise DegenerateScaleError("in-sample seasonal differences are all zero")
    return float(np.mean(np.abs(actual - forecast)) / scale)


def acf(y, nlags: int) -> np.ndarray:
    """Sample autocorrelations r_0..r_nlags (r_0 = 1); NaN for a constant series."""
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    dev = y - y.mean()
    c0 = np.dot(dev, dev)
    out = np.empty(nlags + 1)
    for lag in range(nlags + 1):
        if lag >= n:
            out[lag] = np.nan
        else:
            out[lag] = np.dot(dev[: n - lag], dev[lag:]) / c0 if c0 > 0 else np.nan
    return out


def seasonality_test(y, period: int) -> bool:
    """90% autocorrelation test for seasonality at the given lag.

    Requires at least three full cycles; the lag-m autocorrelation must exceed
    1.645 * sqrt((1 + 2 * sum of squared lower-lag autocorrelations) / n).
    """
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    if period <= 1 or n < 3 * period:
        return False
    r = acf(y, period)
    if not np.all(np.isfinite(r)):
        return False
    crit = 1.645 * np.sqrt((1.0 + 2.0 * np.sum(r[1:period] ** 2)) / n)
    return bool(abs(r[period]) > crit)


def seasonal_indices(y, period: int) -> np.ndarray:
    """Multiplicative classical-decomposition seasonal indices, mean-normalized to 1.

    Index j is the seasonal factor of phase j counted from the start of ``y``.
    The trend is a centered moving average (2 x m for even periods); detrended
    ratios are averaged per phase over the cycles where they exist.
    """
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    if n < 2 * period:
        raise ValueError(f"need at least two cycles ({2 * period}), got {n}")
    if period % 2 == 0:
        weights = np.r_[0.5, np.ones(period - 1), 0.5] / period
    else:
        weights = np.ones(period) / period
    half = len(weights) // 2
    trend = np.full(n, np.nan)
    for t in range(half, n - half):
        trend[t] = np.dot(weights, y[t - half : t + half + 1])
    with np.errstate(divide="ignore", invalid="ignore"):
        detrended = y / trend
    figure = np.empty(period)
    for j in range(period):
        vals = detrended[j::period]
        vals = vals[np.isfinite(vals)]
        figure[j] = vals.mean() if len(vals) else np.nan
    return figure / figure.mean()


def naive2(insample, period: int, horizon: int) -> np.ndarray:
    """The M4 reference forecast: seasonally adjusted last-value naive.

    If the series passes :func:`seasonality_test`, it is deseasonalized by
    multiplicative classical decomposition, continued with its last adjusted
    value, and reseasonalized; otherwise the forecast is the plain last value.
    Series whose decomposition degenerates (non-finite or non-positive
    indices) fall back to the plain naive branch.
    """
    y = np.asarray(insample, dtype=np.float64)
    n = len(y)
    if n < 2:
        raise ValueError(f"need at least 2 in-sample points, got {n}")
    if not np.all(np.isfinite(y)):
        raise ValueError("non-finite in-sample values")
    if horizon < 1:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if seasonality_test(y, period):
        si = seasonal_indices(y, period)
        if np.all(np.isfinite(si)) and np.all(si > 0):
            last_adjusted = y[-1] / si[(n - 1) % period]
            future_phase = np.arange(n, n + horizon) % period
            return last_adjusted * si[future_phase]
    return np.full(horizon, y[-1])


@dataclass(frozen=True)
class OwaReport:
    """A method's aggregate sMAPE/MASE with the Naive2 reference and their OWA."""

    smape_method: float
    mase_method: float
    smape_naive2: float
    mase_naive2: float

    @property
    def owa(self) -> float:
        return 0.5 * (self.smape_method / self.smape_naive2 + self.mase_method / self.mase_naive2)

    def as_dict(self) -> dict:
        return {
            "smape": self.smape_method,
            "mase": self.mase_method,
            "smape_naive2": self.smape_naive2,
            "mase_naive2": self.mase_naive2,
            "owa": self.owa,
        }


def owa(smape_method: float, mase_method: float, smape_naive2: float, mase_naive2: float) -> OwaReport:
    """Overall weighted average of aggregate sMAPE and MASE ratios against Naive2.

    Aggregation is ratio-of-means: per-series metrics are averaged first and
    the ratios taken on the aggregates.
    """
    if smape_naive2 <= 0 or mase_naive2 <= 0:
        raise ValueError("reference aggregates must be positive")
    return OwaReport(smape_method, mase_method, smape_naive2, mase_naive2)


@dataclass(frozen=True)
class SeriesScore:
    id: str
    smape: float
    mase: float | None
    degenerate: bool
    category: str | None = None
    note: str | None = None


@dataclass(frozen=True)
class EvalReport:
    """Per-series scores and their aggregate OWA block."""

    scores: tuple[SeriesScore, ...]
    aggregate: OwaReport
    n_degenerate: int
    by_category: dict[str, OwaReport] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "aggregate": {**self.aggregate.as_dict(), "n_series": len(self.scores), "n_degenerate": self.n_degenerate},
            "by_category": {c: r.as_dict() for c, r in sorted(self.by_category.items())},
            "series": [
                {
                    "id": s.id,
                    "smape": s.smape,
                    "mase": s.mase,
                    "degenerate": s.degenerate,
                    **({"category": s.category} if s.category is not None else {}),
                    **({"note": s.note} if s.note is not None else {}),
                }
                for s in self.scores
            ],
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.as_dict(), fh, indent=2)


def _aggregate(rows) -> OwaReport:
    smapes = [r["smape"] for r in rows]
    naive_smapes = [r["smape_naive2"] for r in rows]
    mases = [r["mase"] for r in rows if not r["degenerate"]]
    naive_mases = [r["mase_naive2"] for r in rows if not r["degenerate"]]
    if not mases:
        raise DegenerateScaleError("every series has a degenerate MASE scale; OWA undefined")
    return owa(
        float(np.mean(smapes)),
        float(np.mean(mases)),
        float(np.mean(naive_smapes)),
        float(np.mean(naive_mases)),
    )


def evaluate_panel(train, test, forecasts, categories: dict[str, str] | None = None,
                   notes: dict[str, str] | None = None, reference=None) -> EvalReport:
    """Score an N x h forecast matrix against the test panel.

    ``train`` supplies each series' in-sample values (its observed entries, in
    time order) for the MASE scale and the Naive2 reference.  Series with a
    zero seasonal-naive scale are flagged degenerate and excluded from the
    aggregate MASE and OWA but keep their sMAPE.  When ``categories`` maps ids
    to group names, per-category aggregates are included.  ``reference``
    optionally supplies precomputed Naive2 forecasts so several evaluations can
    share one reference.
    """
    forecasts = np.asarray(forecasts, dtype=np.float64)
    if forecasts.shape[0] != train.n_series:
        raise ValueError(f"{forecasts.shape[0]} forecast rows for {train.n_series} series")
    m = train.period
    scores: list[SeriesScore] = []
    rows: list[dict] = []
    for i in range(train.n_series):
        sid = train.ids[i]
        insample = train.row(i).observed_values()
        actual = test.values[i]
        fc = forecasts[i]
        ref = naive2(insample, m, len(actual)) if reference is None else np.asarray(reference[i], dtype=np.float64)
        row = {
            "smape": smape(actual, fc),
            "smape_naive2": smape(actual, ref),
            "degenerate": False,
            "mase": None,
            "mase_naive2": None,
        }
        try:
            row["mase"] = mase(actual, fc, insample, m)
            row["mase_naive2"] = mase(actual, ref, insample, m)
        except DegenerateScaleError:
            row["degenerate"] = True
        rows.append(row)
        scores.append(
            SeriesScore(
                id=sid,
                smape=row["smape"],
                mase=row["mase"],
                degenerate=row["degenerate"],
                category=(categories or {}).get(sid),
                note=(notes or {}).get(sid),
            )
        )

    by_category: dict[str, OwaReport] = {}
    if categories:
        for cat in sorted({s.category for s in scores if s.category is not None}):
            cat_rows = [r for r, s in zip(rows, scores) if s.category == cat]
            if any(not r["degenerate"] for r in cat_rows):
                by_category[cat] = _aggregate(cat_rows)

    return EvalReport(
        scores=tuple(scores),
        aggregate=_aggregate(rows),
        n_degenerate=sum(r["degenerate"] for r in rows),
        by_category=by_category,
    )
