"""Univariate forecasting methods behind one fit/predict contract.

Every method declares its minimum history and whether it needs positive data;
violations surface as :class:`MethodInapplicable` so that batch ranking can
demote a method instead of aborting.  Fitting is deterministic: smoothing
parameters come from fixed grids, never from random restarts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import optimize

__all__ = [
    "Forecaster",
    "MethodInapplicable",
    "MethodMenu",
    "fit_predict",
    "boxcox_lambda",
    "boxcox_transform",
    "boxcox_inverse",
    "METHOD_CATALOG",
    "default_menu",
]

SMOOTHING_GRID = np.arange(0.05, 0.951, 0.05)
DAMPING_GRID = np.array([0.80, 0.85, 0.90, 0.95, 0.98])


class MethodInapplicable(Exception):
    """The method cannot produce a forecast for this history (too short, wrong sign, ...)."""


class Forecaster:
    """Base contract: ``fit(y, period)`` then ``predict(h)``.

    Subclasses set ``name``, ``min_history`` and optionally
    ``requires_positive``; ``fit`` must store whatever ``predict`` needs and
    return ``self``.
    """

    name = "base"
    min_history = 1
    requires_positive = False

    def __init__(self):
        self._fitted = False

    def fit(self, y: np.ndarray, period: int = 1) -> "Forecaster":
        raise NotImplementedError

    def predict(self, horizon: int) -> np.ndarray:
        raise NotImplementedError

    def _check_fitted(self):
        if not self._fitted:
            raise RuntimeError(f"{self.name}: predict() before fit()")

    def seasonal_min_history(self, period: int) -> int:
        """Minimum history for the given period; seasonal methods override."""
        return self.min_history


def fit_predict(method: Forecaster, history, horizon: int, period: int = 1) -> np.ndarray:
    """Fit ``method`` on ``history`` and return exactly ``horizon`` finite values.

    Raises :class:`MethodInapplicable` when the history is shorter than the
    method's minimum, violates a positivity requirement, or the fit degenerates
    into non-finite output.
    """
    y = np.asarray(history, dtype=np.float64)
    if horizon < 1:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if y.ndim != 1 or not np.all(np.isfinite(y)):
        raise ValueError("history must be a finite 1-D array")
    min_history = max(method.min_history, method.seasonal_min_history(period))
    if len(y) < min_history:
        raise MethodInapplicable(f"{method.name}: needs {min_history} points, got {len(y)}")
    if method.requires_positive and y.min() <= 0:
        raise MethodInapplicable(f"{method.name}: requires strictly positive history")
    forecast = np.asarray(method.fit(y, period).predict(horizon), dtype=np.float64)
    if forecast.shape != (horizon,) or not np.all(np.isfinite(forecast)):
        raise MethodInapplicable(f"{method.name}: produced a non-finite forecast")
    return forecast


class MeanForecaster(Forecaster):
    """Flat forecast at the historical average."""

    name = "mean"
    min_history = 1

    def fit(self, y, period=1):
        self.level_ = float(y.mean())
        self._fitted = True
        return self

    def predict(self, horizon):
        self._check_fitted()
        return np.full(horizon, self.level_)


class NaiveForecaster(Forecaster):
    """Flat forecast at the last observation."""

    name = "naive"
    min_history = 1

    def fit(self, y, period=1):
        self.level_ = float(y[-1])
        self._fitted = True
        return self

    def predict(self, horizon):
        self._check_fitted()
        return np.full(horizon, self.level_)


class DriftForecaster(Forecaster):
    """Last value plus the average historical increment per step."""

    name = "drift"
    min_history = 2

    def fit(self, y, period=1):
        self.level_ = float(y[-1])
        self.slope_ = float((y[-1] - y[0]) / (len(y) - 1))
        self._fitted = True
        return self

    def predict(self, horizon):
        self._check_fitted()
        return self.level_ + self.slope_ * np.arange(1, horizon + 1)


class SeasonalNaiveForecaster(Forecaster):
    """Repeat the final seasonal cycle."""

    name = "seasonal_naive"
    min_history = 1

    def seasonal_min_history(self, period):
        return max(period, 1)

    def fit(self, y, period=1):
        self.cycle_ = y[-max(period, 1):].copy()
        self._fitted = True
        return self

    def predict(self, horizon):
        self._check_fitted()
        m = len(self.cycle_)
        return self.cycle_[np.arange(horizon) % m]


def _ses_level(y: np.ndarray, alphas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Run SES for every alpha at once; returns (final levels, one-step SSEs)."""
    level = np.full(len(alphas), y[0])
    sse = np.zeros(len(alphas))
    for t in range(1, len(y)):
        sse += (y[t] - level) ** 2
        level = alphas * y[t] + (1.0 - alphas) * level
    return level, sse


class SesForecaster(Forecaster):
    """Simple exponential smoothing; alpha picked on a fixed grid by one-step SSE."""

    name = "ses"
    min_history = 2

    def fit(self, y, period=1):
        levels, sse = _ses_level(y, SMOOTHING_GRID)
        best = int(np.argmin(sse))
        self.alpha_ = float(SMOOTHING_GRID[best])
        self.level_ = float(levels[best])
        self._fitted = True
        return self

    def predict(self, horizon):
        self._check_fitted()
        return np.full(horizon, self.level_)


def _ols_slope(y: np.ndarray) -> float:
    t = np.arange(len(y), dtype=np.float64)
    t -= t.mean()
    denom = np.dot(t, t)
    return float(np.dot(t, y - y.mean()) / denom) if denom > 0 else 0.0


class HoltForecaster(Forecaster):
    """Holt's linear trend, optionally damped; parameters grid-searched on one-step SSE.

    Initial level is the first observation and the initial trend the
    least-squares slope of the history, so a constant series forecasts itself.
    """

    min_history = 4

    def __init__(self, damped: bool = False):
        super().__init__()
        self.damped = damped
        self.name = "holt_damped" if damped else "holt"

    def fit(self, y, period=1):
        alphas, betas, phis = np.meshgrid(
            SMOOTHING_GRID, SMOOTHING_GRID, DAMPING_GRID if self.damped else [1.0], indexing="ij"
        )
        a, b, phi = alphas.ravel(), betas.ravel(), phis.ravel()
        level = np.full(a.shape, y[0])
        trend = np.full(a.shape, _ols_slope(y))
        sse = np.zeros(a.shape)
        for t in range(1, len(y)):
            pred = level + phi * trend
            sse += (y[t] - pred) ** 2
            new_level = a * y[t] + (1.0 - a) * pred
            trend = b * (new_level - level) + (1.0 - b) * phi * trend
            level = new_level
        best = int(np.argmin(sse))
        self.alpha_, self.beta_, self.phi_ = float(a[best]), float(b[best]), float(phi[best])
        self.level_, self.trend_ = float(level[best]), float(trend[best])
        self._fitted = True
        return self

    def predict(self, horizon):
        self._check_fitted()
        damp = np.cumsum(self.phi_ ** np.arange(1, horizon + 1))
        return self.level_ + damp * self.trend_


class HoltWintersForecaster(Forecaster):
    """Holt-Winters with additive or multiplicative seasonality.

    Level starts at the first-season average, seasonals at the first season's
    deviations (differences or ratios) from it, trend at the least-squares
    slope; alpha/beta/gamma come from a grid search minimizing one-step SSE.
    """

    min_history = 4

    def __init__(self, seasonal: str = "additive"):
        super().__init__()
        if seasonal not in ("additive", "multiplicative"):
            raise ValueError(f"unknown seasonal mode {seasonal!r}")
        self.seasonal = seasonal
        self.requires_positive = seasonal == "multiplicative"
        self.name = "hw_additive" if seasonal == "additive" else "hw_multiplicative"

    def seasonal_min_history(self, period):
        return 2 * max(period, 2)

    def fit(self, y, period=1):
        m = max(period, 2)
        mul = self.seasonal == "multiplicative"
        grids = np.meshgrid(SMOOTHING_GRID, SMOOTHING_GRID, SMOOTHING_GRID, indexing="ij")
        a, b, g = (x.ravel() for x in grids)
        n_combo = len(a)

        trend0 = _ols_slope(y)
        # The first-season average is the level at the season's midpoint;
        # recenter it to the last initialization step and take the seasonal
        # starts as deviations from the fitted line so a trending series does
        # not leak its ramp into the seasonal state.
        level0 = y[:m].mean() + trend0 * (m - 1) / 2.0
        baseline = level0 + trend0 * (np.arange(m) - (m - 1.0))
        if mul:
            if level0 <= 0 or np.any(baseline <= 0):
                raise MethodInapplicable(f"{self.name}: non-positive first-season baseline")
            season0 = y[:m] / baseline
        else:
            season0 = y[:m] - baseline

        level = np.full(n_combo, level0)
        trend = np.full(n_combo, trend0)
        seasons = np.tile(season0, (n_combo, 1))  # circular buffer, position t % m
        sse = np.zeros(n_combo)
        # Some multiplicative combinations can blow up (division by a level
        # that crossed zero); they pick up inf/nan SSE and lose the argmin.
        with np.errstate(all="ignore"):
            for t in range(m, len(y)):
                s_prev = seasons[:, t % m]
                base = level + trend
                pred = base * s_prev if mul else base + s_prev
                sse += (y[t] - pred) ** 2
                if mul:
                    new_level = a * (y[t] / s_prev) + (1.0 - a) * base
                    seasons[:, t % m] = g * (y[t] / base) + (1.0 - g) * s_prev
                else:
                    new_level = a * (y[t] - s_prev) + (1.0 - a) * base
                    seasons[:, t % m] = g * (y[t] - base) + (1.0 - g) * s_prev
                trend = b * (new_level - level) + (1.0 - b) * trend
                level = new_level
        sse[~np.isfinite(sse)] = np.inf
        best = int(np.argmin(sse))
        if not np.isfinite(sse[best]):
            raise MethodInapplicable(f"{self.name}: smoothing recursion diverged")
        self.alpha_, self.beta_, self.gamma_ = float(a[best]), float(b[best]), float(g[best])
        self.level_, self.trend_ = float(level[best]), float(trend[best])
        self.season_ = seasons[best].copy()
        self._period = m
        self._n = len(y)
        self._fitted = True
        return self

    def predict(self, horizon):
        self._check_fitted()
        steps = np.arange(1, horizon + 1)
        base = self.level_ + steps * self.trend_
        phase = (self._n + steps - 1) % self._period
        s = self.season_[phase]
        return base * s if self.seasonal == "multiplicative" else base + s


class AutoArForecaster(Forecaster):
    """Autoregression by least squares with the order chosen by AICc.

    Orders 0..max_order are fitted with an intercept on their own effective
    samples; order 0 degenerates to the historical mean.  Unlike Yule-Walker,
    least squares can return an explosive lag polynomial whose recursion blows
    up over the horizon, so non-stationary fits are discarded before the AICc
    comparison.  Forecasts are recursive, feeding predictions back in.
    """

    name = "ar"
    min_history = 4

    def __init__(self, max_order: int = 6):
        super().__init__()
        self.max_order = max_order

    @staticmethod
    def _stationary(lag_coef: np.ndarray) -> bool:
        p = len(lag_coef)
        if p == 0:
            return True
        companion = np.zeros((p, p))
        companion[0] = lag_coef
        if p > 1:
            companion[np.arange(1, p), np.arange(p - 1)] = 1.0
        return bool(np.max(np.abs(np.linalg.eigvals(companion))) < 1.0)

    def fit(self, y, period=1):
        n = len(y)
        best = None
        for p in range(0, self.max_order + 1):
            rows = n - p
            k = p + 2  # lag coefficients + intercept + noise variance
            if rows - k - 1 <= 0:
                continue
            X = np.ones((rows, p + 1))
            for j in range(1, p + 1):
                X[:, j] = y[p - j : n - j]
            target = y[p:]
            coef, *_ = np.linalg.lstsq(X, target, rcond=None)
            if not self._stationary(coef[1:]):
                continue
            sse = float(np.sum((X @ coef - target) ** 2))
            aicc = rows * np.log(max(sse, 1e-300) / rows) + 2 * k + 2 * k * (k + 1) / (rows - k - 1)
            if best is None or aicc < best[0]:
                best = (aicc, p, coef)
        if best is None:
            raise MethodInapplicable(f"{self.name}: no stationary fit at any usable order")
        _, self.order_, self.coef_ = best
        self._tail = y[-self.order_:].copy() if self.order_ else np.empty(0)
        self._fitted = True
        return self

    def predict(self, horizon):
        self._check_fitted()
        out = np.empty(horizon)
        state = list(self._tail)
        for k in range(horizon):
            value = self.coef_[0]
            for j in range(1, self.order_ + 1):
                value += self.coef_[j] * state[-j]
            out[k] = value
            state.append(value)
        return out


class ThetaForecaster(Forecaster):
    """Classic two-line theta: average of the trend line and an SES of the
    double-curvature line (2y minus the trend line)."""

    name = "theta"
    min_history = 3

    def fit(self, y, period=1):
        n = len(y)
        t = np.arange(n, dtype=np.float64)
        self.slope_ = _ols_slope(y)
        self.intercept_ = float(y.mean() - self.slope_ * t.mean())
        line = self.intercept_ + self.slope_ * t
        theta2 = 2.0 * y - line
        levels, sse = _ses_level(theta2, SMOOTHING_GRID)
        self.ses_level_ = float(levels[int(np.argmin(sse))])
        self._n = n
        self._fitted = True
        return self

    def predict(self, horizon):
        self._check_fitted()
        steps = self._n - 1 + np.arange(1, horizon + 1)
        line = self.intercept_ + self.slope_ * steps
        return 0.5 * (self.ses_level_ + line)


def boxcox_transform(y: np.ndarray, lam: float) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if np.any(y <= 0):
        raise ValueError("Box-Cox requires strictly positive values")
    return np.log(y) if lam == 0.0 else (np.power(y, lam) - 1.0) / lam


def boxcox_inverse(x: np.ndarray, lam: float) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if lam == 0.0:
        return np.exp(x)
    # Values below the transform's range boundary are clamped so the inverse
    # stays finite (forecasts of a transformed series can drift below it).
    return np.power(np.maximum(lam * x + 1.0, 1e-12), 1.0 / lam)


def boxcox_lambda(y, period: int = 1, bounds: tuple[float, float] = (-1.0, 2.0)) -> float:
    """Guerrero's lambda: minimize the coefficient of variation of block
    std / mean^(1-lambda) over non-overlapping blocks (seasonal length when
    two full cycles exist, else pairs)."""
    y = np.asarray(y, dtype=np.float64)
    if np.any(y <= 0):
        raise ValueError("Box-Cox requires strictly positive values")
    block = period if period >= 2 and len(y) >= 2 * period else 2
    n_blocks = len(y) // block
    if n_blocks < 2:
        return 1.0
    trimmed = y[len(y) - n_blocks * block :].reshape(n_blocks, block)
    means = trimmed.mean(axis=1)
    stds = trimmed.std(axis=1, ddof=1)
    if np.all(stds == 0):
        return 1.0

    def cv(lam: float) -> float:
        ratios = stds / np.power(means, 1.0 - lam)
        mean_ratio = ratios.mean()
        if mean_ratio == 0:
            return 0.0
        return float(ratios.std(ddof=1) / mean_ratio)

    res = optimize.minimize_scalar(cv, bounds=bounds, method="bounded")
    return float(res.x)


class BoxCoxForecaster(Forecaster):
    """Wrap any method in a Box-Cox transform (lambda automatic unless fixed)."""

    requires_positive = True

    def __init__(self, inner: Forecaster, lam: float | None = None):
        super().__init__()
        self.inner = inner
        self.fixed_lambda = lam
        self.name = f"{inner.name}_boxcox"
        self.min_history = max(inner.min_history, 4)

    def seasonal_min_history(self, period):
        return max(self.min_history, self.inner.seasonal_min_history(period))

    def fit(self, y, period=1):
        if y.min() <= 0:
            raise MethodInapplicable(f"{self.name}: requires strictly positive history")
        self.lambda_ = self.fixed_lambda if self.fixed_lambda is not None else boxcox_lambda(y, period)
        self.inner.fit(boxcox_transform(y, self.lambda_), period)
        self._fitted = True
        return self

    def predict(self, horizon):
        self._check_fitted()
        return boxcox_inverse(self.inner.predict(horizon), self.lambda_)


METHOD_CATALOG: dict[str, Callable[..., Forecaster]] = {
    "mean": MeanForecaster,
    "naive": NaiveForecaster,
    "drift": DriftForecaster,
    "seasonal_naive": SeasonalNaiveForecaster,
    "ses": SesForecaster,
    "holt": lambda **kw: HoltForecaster(damped=False, **kw),
    "holt_damped": lambda **kw: HoltForecaster(damped=True, **kw),
    "hw_additive": lambda **kw: HoltWintersForecaster(seasonal="additive", **kw),
    "hw_multiplicative": lambda **kw: HoltWintersForecaster(seasonal="multiplicative", **kw),
    "ar": AutoArForecaster,
    "ar_short": lambda **kw: AutoArForecaster(max_order=3, **kw),
    "theta": ThetaForecaster,
    "ar_boxcox": lambda **kw: BoxCoxForecaster(AutoArForecaster(), **kw),
    "theta_boxcox": lambda **kw: BoxCoxForecaster(ThetaForecaster(), **kw),
    "ses_boxcox": lambda **kw: BoxCoxForecaster(SesForecaster(), **kw),
}

# The Box-Cox-wrapped variants stay out of the default menu: a wrapped method
# tracks its base method closely, so a median-of-3 holding both would let two
# votes collude, and the inverse transform can amplify an already-wrong swing.
# The order-capped AR variant gives oscillatory series a second, bounded vote.
DEFAULT_METHODS = (
    "mean",
    "naive",
    "drift",
    "seasonal_naive",
    "ses",
    "holt",
    "holt_damped",
    "hw_additive",
    "hw_multiplicative",
    "ar",
    "ar_short",
    "theta",
)


@dataclass(frozen=True)
class MethodMenu:
    """An ordered set of named forecaster factories; order breaks ranking ties."""

    entries: tuple[tuple[str, Callable[[], Forecaster]], ...]

    def __post_init__(self):
        if len(self.entries) < 4:
            raise ValueError(f"menu needs at least 4 methods, got {len(self.entries)}")
        names = [n for n, _ in self.entries]
        if len(set(names)) != len(names):
            raise ValueError("menu method names must be unique")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.entries)

    def make(self, name: str) -> Forecaster:
        for n, factory in self.entries:
            if n == name:
                return factory()
        raise KeyError(name)

    @classmethod
    def from_names(cls, names, overrides: dict[str, dict] | None = None) -> "MethodMenu":
        overrides = overrides or {}
        entries = []
        for name in names:
            if name not in METHOD_CATALOG:
                raise KeyError(f"unknown method {name!r}; known: {sorted(METHOD_CATALOG)}")
            params = dict(overrides.get(name, {}))
            factory = METHOD_CATALOG[name]
            entries.append((name, (lambda f=factory, p=params: f(**p))))
        return cls(tuple(entries))

    def with_method(self, name: str, factory: Callable[[], Forecaster]) -> "MethodMenu":
        """Register an external method at the end of the menu."""
        return MethodMenu(self.entries + ((name, factory),))


def default_menu() -> MethodMenu:
    return MethodMenu.from_names(DEFAULT_METHODS)
