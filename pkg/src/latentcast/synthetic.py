"""Seeded synthetic panels: structured latent processes mixed into many noisy series.

Used by the experiment scripts and the test suite as ground-truth data whose
rank, seasonality and forecastability are known by construction.
"""

from __future__ import annotations

import numpy as np

from .panel import SeriesMatrix

__all__ = ["latent_processes", "mixture_panel", "exact_rank_panel"]


def latent_processes(n_processes: int, T: int, period: int = 12, seed: int = 0) -> np.ndarray:
    """A bank of forecastable zero-mean unit-scale processes, one per row.

    Process 0 is the constant level carrier.  The rest split evenly between
    exact seasonal cycles and pure tones whose periods do not divide the
    seasonal one, topped up with one linear trend and a couple of saturating
    ramps.  Cycles suit the seasonal methods, tones suit low-order
    autoregression, trends the linear-trend family: no single method covers
    the whole bank, while every member is exactly extrapolatable.

    Trends (and ramps) of different slopes are collinear after scaling, so the
    bank holds few of them; distinct random cycles and distinct tone periods
    are mutually near-orthogonal, which keeps the bank's rank at
    ``n_processes``.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(T, dtype=np.float64)
    X = np.zeros((n_processes, T))
    X[0] = 1.0  # level carrier
    kinds = ["trend", "ramp", "ramp"] + ["seasonal", "tone"] * n_processes
    tone_periods = [7.0, 8.0, 9.0, 10.0, 7.5, 8.5, 9.5, 10.5]
    n_tones = 0
    for k in range(1, n_processes):
        kind = kinds[k - 1]
        if kind == "seasonal":
            cycle = rng.normal(0.0, 1.0, size=period)
            cycle -= cycle.mean()
            x = np.tile(cycle, T // period + 1)[:T]
        elif kind == "trend":
            x = t - t.mean()
            x = rng.choice([-1.0, 1.0]) * x
        elif kind == "tone":
            p = tone_periods[n_tones % len(tone_periods)]
            n_tones += 1
            phase = rng.uniform(0, 2 * np.pi)
            x = np.sin(2 * np.pi * t / p + phase)
            x = x - x.mean()
        else:  # saturating ramp (damped trend)
            tau = rng.uniform(0.2, 0.5) * T
            x = 1.0 - np.exp(-t / tau)
            x = rng.choice([-1.0, 1.0]) * (x - x.mean())
        X[k] = x / x.std()
    return X


def mixture_panel(n_series: int, T: int, n_processes: int = 18, period: int = 12,
                  noise: float = 0.08, seed: int = 0) -> tuple[SeriesMatrix, np.ndarray]:
    """Mix the process bank into ``n_series`` positive series plus white noise.

    Every series carries its own level on the constant process, one seasonal
    cycle AND one tone (drawn independently, with independent weights), and
    occasionally a trend or ramp.  Mixing both hard families into each series
    is what defeats any single directly-applied method, while the independent
    sparse weights keep the factorization identifiable.  Weights scale with
    the level so the signal-to-noise geometry is level-free.  Returns the
    panel and the true process bank.
    """
    rng = np.random.default_rng(seed)
    X = latent_processes(n_processes, T, period, seed=int(rng.integers(2**31)))
    kinds = ["trend", "ramp", "ramp"] + ["seasonal", "tone"] * n_processes
    seasonal_ids = [k for k in range(1, n_processes) if kinds[k - 1] == "seasonal"]
    tone_ids = [k for k in range(1, n_processes) if kinds[k - 1] == "tone"]
    other_ids = [k for k in range(1, n_processes) if kinds[k - 1] in ("trend", "ramp")]

    F = np.zeros((n_processes, n_series))
    levels = rng.uniform(80.0, 200.0, size=n_series)
    F[0] = levels
    for i in range(n_series):
        F[rng.choice(seasonal_ids), i] = rng.uniform(0.25, 0.45) * levels[i]
        F[rng.choice(tone_ids), i] = rng.uniform(0.18, 0.38) * levels[i]
        if other_ids and rng.random() < 0.5:
            F[rng.choice(other_ids), i] = rng.uniform(0.08, 0.20) * levels[i]
    values = F.T @ X
    values += rng.normal(0.0, noise, size=values.shape) * levels[:, None]
    values = np.maximum(values, 1.0)  # keep the panel strictly positive, M4-like
    ids = tuple(f"S{i + 1}" for i in range(n_series))
    return SeriesMatrix.fully_observed(values, ids=ids, period=period), X


def exact_rank_panel(n_series: int, T: int, rank: int, noise: float = 0.0,
                     seed: int = 0) -> SeriesMatrix:
    """A panel of known exact rank: random loadings times smooth processes,
    plus optional white noise scaled to the panel's standard deviation."""
    rng = np.random.default_rng(seed)
    t = np.arange(T, dtype=np.float64)
    X = np.empty((rank, T))
    for k in range(rank):
        p = rng.uniform(6, 18)
        phase = rng.uniform(0, 2 * np.pi)
        slope = rng.normal(0.0, 0.5)
        X[k] = np.sin(2 * np.pi * t / p + phase) + slope * t / T
    F = rng.normal(0.0, 1.0, size=(rank, n_series))
    values = F.T @ X
    if noise > 0:
        values = values + rng.normal(0.0, noise * values.std(), size=values.shape)
    return SeriesMatrix.fully_observed(values, period=12)
