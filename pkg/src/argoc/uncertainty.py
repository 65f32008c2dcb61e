"""Stationary-bootstrap prediction intervals and coverage accounting."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import EmptyOverlapError, SchemaError
from .nowcast import NowcastRun
from .timeseries import WeekStamp, inverse_logit_array

DEFAULT_BLOCK = 8.0
DEFAULT_REPS = 2000
DEFAULT_LEVEL = 0.95


def stationary_bootstrap_indices(L: int, q: float, reps: int, rng) -> np.ndarray:
    """``reps x L`` index paths of the Politis-Romano stationary bootstrap.

    Each path starts at a uniform index; at every later step it restarts at a
    fresh uniform index with probability ``1/q`` and otherwise moves to the
    next index, wrapping circularly.
    """
    if L < 2:
        raise ValueError("need at least 2 residuals")
    if not q > 1:
        raise ValueError("mean block length must exceed 1")
    starts = rng.integers(0, L, size=(reps, L))
    restart = rng.random((reps, L)) < 1.0 / q
    restart[:, 0] = True
    t = np.arange(L)
    last = np.maximum.accumulate(np.where(restart, t, 0), axis=1)
    base = np.take_along_axis(starts, last, axis=1)
    return (base + t - last) % L


def stationary_bootstrap_last(L: int, q: float, reps: int, rng) -> np.ndarray:
    """Final index of ``reps`` stationary-bootstrap paths of length ``L``.

    Same law as ``stationary_bootstrap_indices(...)[:, -1]`` without building
    the paths: the last block began ``D = min(Geometric(1/q) - 1, L - 1)``
    steps before the end at a uniform index.
    """
    if L < 2:
        raise ValueError("need at least 2 residuals")
    if not q > 1:
        raise ValueError("mean block length must exceed 1")
    back = np.minimum(rng.geometric(1.0 / q, size=reps) - 1, L - 1)
    return (rng.integers(0, L, size=reps) + back) % L


def stationary_bootstrap_resample(residuals, q: float, rng) -> np.ndarray:
    r = np.asarray(residuals, dtype=float)
    return r[stationary_bootstrap_indices(len(r), q, 1, rng)[0]]


@dataclass(frozen=True)
class IntervalRun:
    weeks: tuple[WeekStamp, ...]
    lower: np.ndarray
    prediction: np.ndarray
    upper: np.ndarray
    level: float
    reps: int
    mean_block_length: float
    seed: int
    degenerate: tuple[WeekStamp, ...] = ()

    def as_dict(self) -> dict[WeekStamp, tuple[float, float]]:
        return {w: (lo, hi) for w, lo, hi in zip(self.weeks, self.lower, self.upper)}


def week_rng(seed: int, week: WeekStamp) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(week.ordinal)])


def residual_quantiles(residuals, level: float, reps: int, q: float, rng):
    """Type-7 quantiles of next-step residual draws from stationary-bootstrap paths."""
    r = np.asarray(residuals, dtype=float)
    draws = r[stationary_bootstrap_last(len(r), q, reps, rng)]
    a = 1.0 - level
    lo, hi = np.quantile(draws, [a / 2, 1 - a / 2], method="linear")
    return float(lo), float(hi)


def build_intervals(run: NowcastRun, level: float = DEFAULT_LEVEL, reps: int = DEFAULT_REPS,
                    q: float = DEFAULT_BLOCK, seed: int = 0) -> IntervalRun:
    """Percent-scale intervals from each week's own training residuals.

    Each week draws from its own RNG stream keyed by ``(seed, week)``, so
    results do not depend on which other weeks are in the run.
    """
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    if len(run.residuals_logit) != len(run.weeks):
        raise ValueError("run carries no training residuals")
    lows, highs, degenerate = [], [], []
    for wk, pred, res in zip(run.weeks, run.predictions_logit, run.residuals_logit):
        lo, hi = residual_quantiles(res, level, reps, q, week_rng(seed, wk))
        if hi - lo <= 0:
            degenerate.append(wk)
        lows.append(pred + lo)
        highs.append(pred + hi)
    return IntervalRun(run.weeks, inverse_logit_array(lows), run.predictions,
                       inverse_logit_array(highs), level, reps, q, seed, tuple(degenerate))


def coverage(intervals: IntervalRun, truth: Mapping[WeekStamp, float]) -> float:
    inside = [lo <= truth[w] <= hi for w, lo, hi in
              zip(intervals.weeks, intervals.lower, intervals.upper)
              if w in truth and not np.isnan(truth[w])]
    if not inside:
        raise EmptyOverlapError("no week has both an interval and a truth value")
    return float(np.mean(inside))


def write_interval_csv(path, iv: IntervalRun) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "lower", "prediction", "upper", "level"])
        for wk, lo, p, hi in zip(iv.weeks, iv.lower, iv.prediction, iv.upper):
            w.writerow([str(wk), repr(float(lo)), repr(float(p)), repr(float(hi)), repr(iv.level)])


def read_interval_csv(path) -> IntervalRun:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["date", "lower", "prediction", "upper", "level"]:
        raise SchemaError(path, [(1, "expected header 'date,lower,prediction,upper,level'")])
    weeks, lo, p, hi, level = [], [], [], [], None
    for ln, row in enumerate(rows[1:], start=2):
        try:
            weeks.append(WeekStamp.parse(row[0]))
            lo.append(float(row[1]))
            p.append(float(row[2]))
            hi.append(float(row[3]))
            level = float(row[4])
        except (ValueError, IndexError) as exc:
            raise SchemaError(path, [(ln, str(exc))]) from None
    return IntervalRun(tuple(weeks), np.array(lo), np.array(p), np.array(hi),
                       level if level is not None else DEFAULT_LEVEL, 0, 0.0, 0)
