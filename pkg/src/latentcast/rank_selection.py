"""Pick the latent dimension from the reconstruction-error-vs-rank curve."""

from __future__ import annotations

import csv
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import trmf
from .panel import SeriesMatrix

__all__ = ["ElbowCurve", "sweep", "pick_elbow", "DEFAULT_RANK_GRID"]

DEFAULT_RANK_GRID = tuple(range(2, 31, 2))


@dataclass(frozen=True)
class ElbowCurve:
    """Aggregate reconstruction error at each candidate rank."""

    ranks: tuple[int, ...]
    errors: tuple[float, ...]

    def __post_init__(self):
        if len(self.ranks) != len(self.errors):
            raise ValueError("ranks and errors must have matching lengths")
        if list(self.ranks) != sorted(set(self.ranks)):
            raise ValueError(f"ranks must be strictly ascending, got {self.ranks}")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "mase"])
            for k, e in zip(self.ranks, self.errors):
                writer.writerow([k, repr(float(e))])

    @classmethod
    def from_csv(cls, path) -> "ElbowCurve":
        ranks, errors = [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            for row in reader:
                ranks.append(int(row[0]))
                errors.append(float(row[1]))
        return cls(tuple(ranks), tuple(errors))


def sweep(train: SeriesMatrix, ranks, config: trmf.TrmfConfig, workers: int = 1) -> ElbowCurve:
    """Fit one model per candidate rank (same seed and solver settings) and
    collect the aggregate scaled reconstruction error of each."""
    ranks = tuple(int(k) for k in ranks)
    for k in ranks:
        if k >= min(train.n_series, train.n_time):
            raise ValueError(f"rank {k} must be < min(N, T) = {min(train.n_series, train.n_time)}")

    def one(k: int) -> float:
        try:
            model = trmf.fit(train, config.replace(rank=k))
            return trmf.reconstruction_error(model, train).aggregate
        except Exception as exc:
            raise trmf.TrmfError(f"sweep failed at rank {k}: {exc}") from exc

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            errors = tuple(pool.map(one, ranks))
    else:
        errors = tuple(one(k) for k in ranks)
    return ElbowCurve(ranks, errors)


def pick_elbow(curve: ElbowCurve) -> int:
    """The candidate rank farthest (perpendicularly) from the chord joining the
    curve's endpoints; ties and flat curves resolve to the smallest rank.

    The arg-max of the chord distance is invariant under affine rescaling of
    the error axis, so no normalization is needed.
    """
    if len(curve.ranks) < 3:
        raise ValueError(f"elbow detection needs >= 3 points, got {len(curve.ranks)}")
    ks = np.asarray(curve.ranks, dtype=np.float64)
    es = np.asarray(curve.errors, dtype=np.float64)
    if np.all(es == es[0]):
        warnings.warn("flat error curve: no elbow, returning the smallest rank", stacklevel=2)
        return int(curve.ranks[0])
    dk, de = ks[-1] - ks[0], es[-1] - es[0]
    distance = np.abs(dk * (es - es[0]) - de * (ks - ks[0]))
    if np.allclose(distance, 0.0):
        warnings.warn("error curve is a straight line: no elbow, returning the smallest rank", stacklevel=2)
        return int(curve.ranks[0])
    return int(curve.ranks[int(np.argmax(distance))])
