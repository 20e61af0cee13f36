"""Panels of time series: the observation matrix, masking, and the train/test split."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SeriesMatrix",
    "SeriesView",
    "SplitSpec",
    "split",
    "reconstruct",
    "PanelError",
]


class PanelError(ValueError):
    """Raised when a panel violates its structural contract."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SeriesView:
    """One row of a panel: a single series with its mask and seasonal period."""

    id: str
    values: np.ndarray
    mask: np.ndarray
    period: int

    def __post_init__(self):
        if self.values.ndim != 1 or self.values.shape != self.mask.shape:
            raise PanelError("series values and mask must be 1-D and the same length")
        if len(self.values) < 1:
            raise PanelError("empty series")

    @property
    def n_observed(self) -> int:
        return int(self.mask.sum())

    def observed_values(self) -> np.ndarray:
        """The observed entries, in time order."""
        return self.values[self.mask]


@dataclass(frozen=True)
class SeriesMatrix:
    """An N x T panel of real observations with an observation mask.

    ``values[i, t]`` is meaningful only where ``mask[i, t]`` is True.  The time
    index is purely positional; ``period`` is the seasonal period of the rows
    (12 for monthly data).  Instances are immutable and safe to share across
    workers.
    """

    values: np.ndarray
    mask: np.ndarray
    ids: tuple[str, ...]
    period: int = 1

    def __post_init__(self):
        values = _frozen(np.asarray(self.values, dtype=np.float64))
        mask = _frozen(np.asarray(self.mask, dtype=bool))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "ids", tuple(str(i) for i in self.ids))
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise PanelError(f"values must be a non-empty 2-D matrix, got shape {values.shape}")
        if mask.shape != values.shape:
            raise PanelError(f"mask shape {mask.shape} != values shape {values.shape}")
        if len(self.ids) != values.shape[0]:
            raise PanelError(f"{len(self.ids)} ids for {values.shape[0]} series")
        if len(set(self.ids)) != len(self.ids):
            raise PanelError("series ids must be unique")
        if self.period < 1:
            raise PanelError(f"period must be positive, got {self.period}")
        if not np.all(np.isfinite(values[mask])):
            bad = [self.ids[i] for i in np.unique(np.nonzero(~np.isfinite(values) & mask)[0])]
            raise PanelError(f"non-finite observed values in series {bad}")

    @classmethod
    def fully_observed(cls, values: np.ndarray, ids=None, period: int = 1) -> "SeriesMatrix":
        values = np.asarray(values, dtype=np.float64)
        if ids is None:
            ids = tuple(f"s{i + 1}" for i in range(values.shape[0]))
        return cls(values, np.ones(values.shape, dtype=bool), tuple(ids), period)

    @property
    def n_series(self) -> int:
        return self.values.shape[0]

    @property
    def n_time(self) -> int:
        return self.values.shape[1]

    def row(self, i: int) -> SeriesView:
        return SeriesView(self.ids[i], self.values[i], self.mask[i], self.period)

    def rows(self):
        return (self.row(i) for i in range(self.n_series))

    def align_ends(self) -> "SeriesMatrix":
        """Shift each row right so its last observed point sits in the final column.

        Ragged panels (series of different lengths) need this before the
        positional train/test split so that "the latest points" of every series
        occupy the same trailing columns.
        """
        values = np.zeros_like(self.values)
        mask = np.zeros_like(self.mask)
        for i in range(self.n_series):
            obs = np.nonzero(self.mask[i])[0]
            if len(obs) == 0:
                continue
            shift = self.n_time - 1 - obs[-1]
            values[i, shift:] = self.values[i, : self.n_time - shift]
            mask[i, shift:] = self.mask[i, : self.n_time - shift]
        return SeriesMatrix(values, mask, self.ids, self.period)

    def slice_time(self, start: int, stop: int) -> "SeriesMatrix":
        return SeriesMatrix(self.values[:, start:stop], self.mask[:, start:stop], self.ids, self.period)

    def concat_time(self, other: "SeriesMatrix") -> "SeriesMatrix":
        if other.ids != self.ids:
            raise PanelError("cannot concatenate panels with different series ids")
        return SeriesMatrix(
            np.hstack([self.values, other.values]),
            np.hstack([self.mask, other.mask]),
            self.ids,
            self.period,
        )

    def save(self, path) -> None:
        """Binary dump; round-trips values, mask, ids and period bit-exactly."""
        np.savez(
            path,
            values=self.values,
            mask=self.mask,
            ids=np.array(self.ids, dtype=object),
            period=np.int64(self.period),
        )

    @classmethod
    def load(cls, path) -> "SeriesMatrix":
        with np.load(path, allow_pickle=True) as d:
            return cls(d["values"], d["mask"], tuple(d["ids"].tolist()), int(d["period"]))


@dataclass(frozen=True)
class SplitSpec:
    """Holdout protocol: up to ``max_train`` trailing training points, then ``horizon`` test points."""

    max_train: int = 60
    horizon: int = 12

    def __post_init__(self):
        if self.max_train < 1:
            raise PanelError(f"max_train must be positive, got {self.max_train}")
        if self.horizon < 1:
            raise PanelError(f"horizon must be positive, got {self.horizon}")


def split(matrix: SeriesMatrix, spec: SplitSpec) -> tuple[SeriesMatrix, SeriesMatrix]:
    """Split a panel into (train, test) along the time axis.

    The test block is exactly the final ``horizon`` columns; the train block is
    the (at most) ``max_train`` columns immediately before it.  Panels shorter
    than ``max_train + horizon`` keep all pre-test columns in train.  Every
    series must have more than ``horizon`` observed points and a fully observed
    test block; offenders are rejected by id (align ragged panels with
    :meth:`SeriesMatrix.align_ends` first).
    """
    h = spec.horizon
    T = matrix.n_time
    if T <= h:
        raise PanelError(f"panel has {T} columns, need more than horizon={h}")

    too_short = [matrix.ids[i] for i in range(matrix.n_series) if matrix.mask[i].sum() <= h]
    if too_short:
        raise PanelError(f"series with <= {h} observed points cannot be split: {too_short}")
    holes = [matrix.ids[i] for i in range(matrix.n_series) if not matrix.mask[i, T - h :].all()]
    if holes:
        raise PanelError(f"test window not fully observed for series {holes}")

    if matrix.period > 1 and spec.max_train < 2 * matrix.period:
        warnings.warn(
            f"max_train={spec.max_train} is below two seasonal cycles "
            f"(period {matrix.period}); seasonality-aware methods may be inapplicable",
            stacklevel=2,
        )

    train_start = max(0, T - h - spec.max_train)
    return matrix.slice_time(train_start, T - h), matrix.slice_time(T - h, T)


def reconstruct(F: np.ndarray, X: np.ndarray, ids=None, period: int = 1) -> SeriesMatrix:
    """Compose series from factors: output[i, t] = f_i . x_t, fully observed.

    ``F`` is K x N (column i holds the loadings of series i), ``X`` is K x T.
    """
    F = np.asarray(F, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if F.ndim != 2 or X.ndim != 2:
        raise PanelError("F and X must be 2-D")
    if F.shape[0] != X.shape[0]:
        raise PanelError(f"inner dimensions disagree: F is {F.shape}, X is {X.shape}")
    return SeriesMatrix.fully_observed(F.T @ X, ids=ids, period=period)
