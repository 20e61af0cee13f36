"""Temporally regularized matrix factorization by block coordinate descent.

The objective couples a masked squared reconstruction loss with a ridge
penalty on the loadings and an autoregressive penalty on the temporal factor:

    sum_{(i,t) observed} (Y_it - f_i . x_t)^2
      + lambda_f ||F||^2
      + lambda_x ( sum_k sum_{t > max lag} (x_kt - sum_l theta_kl x_k,t-l)^2
                   + eta ||X||^2 )
      + lambda_theta ||theta||^2

Each outer iteration exactly minimizes the objective in F (per-series ridge),
then in X (a cyclic per-time-step sweep), then in theta (per-dimension ridge
autoregression), so the objective never increases.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .metrics import seasonal_naive_scale
from .panel import SeriesMatrix

__all__ = ["TrmfConfig", "TrmfModel", "TrmfError", "fit", "ar_forecast", "reconstruction_error", "ReconstructionReport"]

DEFAULT_LAGS = (1, 2, 3, 4, 5, 6)


class TrmfError(RuntimeError):
    """Solver failure: singular unregularized system or non-finite objective."""


@dataclass(frozen=True)
class TrmfConfig:
    """Solver hyperparameters; the defaults are tuned for monthly panels."""

    rank: int = 18
    lags: tuple[int, ...] = DEFAULT_LAGS
    lambda_f: float = 5e-4
    lambda_x: float = 5e1
    lambda_theta: float = 1e-4
    eta: float = 0.25
    max_iterations: int = 1000
    tolerance: float = 1e-5
    nonnegative_factors: bool = False
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "lags", tuple(int(l) for l in self.lags))
        if self.rank < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")
        if any(l < 1 for l in self.lags) or sorted(set(self.lags)) != list(self.lags):
            raise ValueError(f"lags must be ascending unique positive integers, got {self.lags}")
        if min(self.lambda_f, self.lambda_x, self.lambda_theta, self.eta) < 0:
            raise ValueError("regularization weights must be nonnegative")
        if self.tolerance <= 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")

    @property
    def max_lag(self) -> int:
        return max(self.lags, default=0)

    def replace(self, **kw) -> "TrmfConfig":
        return dataclasses.replace(self, **kw)


@dataclass(frozen=True)
class TrmfModel:
    """Fitted factors: loadings F (K x N), temporal factor X (K x T), AR weights theta (K x |lags|)."""

    F: np.ndarray
    X: np.ndarray
    theta: np.ndarray
    config: TrmfConfig
    objective_trace: np.ndarray

    @property
    def rank(self) -> int:
        return self.F.shape[0]

    def reconstruction(self) -> np.ndarray:
        return self.F.T @ self.X

    def save(self, path) -> None:
        np.savez(
            path,
            F=self.F,
            X=self.X,
            theta=self.theta,
            objective_trace=self.objective_trace,
            config=json.dumps(dataclasses.asdict(self.config)),
        )

    @classmethod
    def load(cls, path) -> "TrmfModel":
        with np.load(path, allow_pickle=False) as d:
            raw = json.loads(str(d["config"]))
            raw["lags"] = tuple(raw["lags"])
            return cls(d["F"], d["X"], d["theta"], TrmfConfig(**raw), d["objective_trace"])


def _objective(Y, W, F, X, theta, cfg: TrmfConfig) -> float:
    resid = (Y - F.T @ X)[W]
    value = float(np.dot(resid, resid))
    value += cfg.lambda_f * float(np.sum(F * F))
    ar = 0.0
    if cfg.lags:
        pred = np.zeros_like(X[:, cfg.max_lag :])
        for j, lag in enumerate(cfg.lags):
            pred += theta[:, j : j + 1] * X[:, cfg.max_lag - lag : X.shape[1] - lag]
        diff = X[:, cfg.max_lag :] - pred
        ar = float(np.sum(diff * diff))
    value += cfg.lambda_x * (ar + cfg.eta * float(np.sum(X * X)))
    value += cfg.lambda_theta * float(np.sum(theta * theta))
    return value


def _ridge_solve(G, rhs, context: str):
    try:
        return np.linalg.solve(G, rhs)
    except np.linalg.LinAlgError:
        raise TrmfError(f"singular unregularized solve in {context}; increase the ridge weights") from None


def _nonneg_solve(G, rhs):
    # min x'Gx/2 - rhs'x over x >= 0, via nnls on the Cholesky square root.
    L = np.linalg.cholesky(G)
    c = np.linalg.solve(L, rhs)
    x, _ = optimize.nnls(L.T, c)
    return x


def _update_loadings(Y, W, F, X, cfg, fully_observed):
    K = F.shape[0]
    lam = cfg.lambda_f * np.eye(K)
    if fully_observed and not cfg.nonnegative_factors:
        G = X @ X.T + lam
        F[:] = _ridge_solve(G, X @ Y.T, "loading update")
        return
    for i in range(Y.shape[0]):
        obs = W[i]
        if not obs.any():
            F[:, i] = 0.0  # loadings of a fully missing series are pinned at zero
            continue
        Xo = X[:, obs]
        G = Xo @ Xo.T + lam
        rhs = Xo @ Y[i, obs]
        if cfg.nonnegative_factors:
            F[:, i] = _nonneg_solve(G, rhs)
        else:
            F[:, i] = _ridge_solve(G, rhs, f"loading update (series {i})")


def _update_temporal(Y, W, F, X, theta, cfg, fully_observed):
    """One cyclic sweep over t; each step exactly minimizes the objective in x_t."""
    K, T = X.shape
    lags = cfg.lags
    Lmax = cfg.max_lag
    G0 = F @ F.T if fully_observed else None
    for t in range(T):
        if fully_observed:
            G = G0.copy()
            rhs = F @ Y[:, t]
        else:
            obs = W[:, t]
            if obs.any():
                Fo = F[:, obs]
                G = Fo @ Fo.T
                rhs = Fo @ Y[obs, t]
            else:
                G = np.zeros((K, K))
                rhs = np.zeros(K)
        diag = np.full(K, cfg.eta)
        lin = np.zeros(K)
        if lags:
            if t >= Lmax:
                # x_t is the target of one AR residual.
                diag += 1.0
                for j, lag in enumerate(lags):
                    lin += theta[:, j] * X[:, t - lag]
            for j, lag in enumerate(lags):
                # x_t is a regressor of the residual at s = t + lag.
                s = t + lag
                if Lmax <= s < T:
                    ar_pred = np.zeros(K)
                    for j2, lag2 in enumerate(lags):
                        ar_pred += theta[:, j2] * X[:, s - lag2]
                    resid_excl = X[:, s] - ar_pred + theta[:, j] * X[:, t]
                    lin += theta[:, j] * resid_excl
                    diag += theta[:, j] ** 2
        G[np.diag_indices(K)] += cfg.lambda_x * diag
        rhs = rhs + cfg.lambda_x * lin
        if cfg.nonnegative_factors:
            X[:, t] = _nonneg_solve(G, rhs)
        else:
            X[:, t] = _ridge_solve(G, rhs, f"temporal update (t={t})")


def _update_ar_weights(X, theta, cfg):
    if not cfg.lags:
        return
    K, T = X.shape
    Lmax = cfg.max_lag
    nL = len(cfg.lags)
    if cfg.lambda_x == 0.0:
        if cfg.lambda_theta > 0.0:
            theta[:] = 0.0
        return
    for k in range(K):
        A = np.column_stack([X[k, Lmax - lag : T - lag] for lag in cfg.lags])
        v = X[k, Lmax:]
        G = cfg.lambda_x * (A.T @ A) + cfg.lambda_theta * np.eye(nL)
        rhs = cfg.lambda_x * (A.T @ v)
        try:
            theta[k] = np.linalg.solve(G, rhs)
        except np.linalg.LinAlgError:
            pass  # degenerate design; keeping the current weights never increases the objective


def fit(train: SeriesMatrix, config: TrmfConfig, debug: bool = False) -> TrmfModel:
    """Fit factors and AR weights by cyclic block minimization.

    Stops when the relative objective decrease drops below the configured
    tolerance or after ``max_iterations``.  With ``debug`` every block update
    is checked to not increase the objective.
    """
    Y, W = train.values, train.mask
    N, T = Y.shape
    K = config.rank
    if T < config.max_lag + 2:
        raise TrmfError(f"need at least max_lag + 2 = {config.max_lag + 2} columns, got {T}")

    rng = np.random.default_rng(config.seed)
    F = 0.1 * rng.standard_normal((K, N))
    X = 0.1 * rng.standard_normal((K, T))
    if config.nonnegative_factors:
        F, X = np.abs(F), np.abs(X)
    nL = len(config.lags)
    theta = np.full((K, nL), 1.0 / nL) if nL else np.zeros((K, 0))

    fully_observed = bool(W.all())
    trace = [_objective(Y, W, F, X, theta, config)]

    def check(stage, before):
        after = _objective(Y, W, F, X, theta, config)
        if after > before * (1 + 1e-9) + 1e-12:
            raise AssertionError(f"{stage} increased the objective: {before} -> {after}")
        return after

    for iteration in range(1, config.max_iterations + 1):
        current = trace[-1]
        _update_loadings(Y, W, F, X, config, fully_observed)
        if debug:
            current = check("loading update", current)
        _update_temporal(Y, W, F, X, theta, config, fully_observed)
        if debug:
            current = check("temporal update", current)
        _update_ar_weights(X, theta, config)
        if debug:
            current = check("AR weight update", current)
        value = _objective(Y, W, F, X, theta, config)
        if not np.isfinite(value):
            raise TrmfError(f"non-finite objective at iteration {iteration}")
        previous = trace[-1]
        trace.append(value)
        if previous - value < config.tolerance * max(abs(previous), 1e-300):
            break

    return TrmfModel(F=F, X=X, theta=theta, config=config, objective_trace=np.array(trace))


def ar_forecast(model: TrmfModel, horizon: int) -> np.ndarray:
    """Continue each latent series with its fitted AR recursion, feeding
    forecasts back in for multi-step horizons.  Returns K x horizon."""
    if horizon < 1:
        raise ValueError(f"horizon must be positive, got {horizon}")
    K, T = model.X.shape
    lags = model.config.lags
    extended = np.hstack([model.X, np.zeros((K, horizon))])
    for s in range(T, T + horizon):
        step = np.zeros(K)
        for j, lag in enumerate(lags):
            step += model.theta[:, j] * extended[:, s - lag]
        extended[:, s] = step
    return extended[:, T:]


@dataclass(frozen=True)
class ReconstructionReport:
    """Scaled reconstruction error per series (NaN where the scale degenerates)."""

    per_series: np.ndarray
    degenerate_ids: tuple[str, ...]

    @property
    def aggregate(self) -> float:
        valid = self.per_series[np.isfinite(self.per_series)]
        return float(valid.mean()) if len(valid) else float("nan")


def reconstruction_error(model: TrmfModel, train: SeriesMatrix) -> ReconstructionReport:
    """Mean absolute reconstruction error over observed entries, scaled per
    series by its in-sample seasonal-naive error (the MASE denominator).

    With missing entries the scale averages over the (t, t-m) pairs that are
    both observed.  Series with no usable pairs or a zero scale are reported
    degenerate and excluded from the aggregate.
    """
    R = model.reconstruction()
    if R.shape != train.values.shape:
        raise ValueError(f"model reconstructs {R.shape}, train is {train.values.shape}")
    m = train.period
    out = np.full(train.n_series, np.nan)
    degenerate = []
    for i in range(train.n_series):
        obs = train.mask[i]
        if not obs.any():
            degenerate.append(train.ids[i])
            continue
        err = float(np.mean(np.abs(train.values[i, obs] - R[i, obs])))
        if obs.all():
            scale = seasonal_naive_scale(train.values[i], m) if train.n_time > m else 0.0
        else:
            pair = obs[m:] & obs[:-m] if train.n_time > m else np.zeros(0, dtype=bool)
            diffs = np.abs(train.values[i, m:][pair] - train.values[i, :-m][pair])
            scale = float(diffs.mean()) if pair.any() else 0.0
        if scale == 0.0:
            degenerate.append(train.ids[i])
            continue
        out[i] = err / scale
    return ReconstructionReport(per_series=out, degenerate_ids=tuple(degenerate))
