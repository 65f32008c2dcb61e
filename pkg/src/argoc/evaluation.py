"""Accuracy metrics, flu-season slices and method comparison tables."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ConstantSeriesError, EmptyOverlapError
from .nowcast import NowcastRun
from .timeseries import WeekStamp

METRICS = ("RMSE", "MAE", "Correlation")
VAR_FLOOR = 1e-12


def _pair(pred, truth):
    p = np.asarray(pred, dtype=float)
    t = np.asarray(truth, dtype=float)
    if p.shape != t.shape:
        raise ValueError("prediction and truth must be aligned")
    if p.size == 0:
        raise EmptyOverlapError("no aligned weeks")
    return p, t


def rmse(pred, truth) -> float:
    p, t = _pair(pred, truth)
    e = np.abs(p - t)
    scale = e.max()
    if scale == 0.0:
        return 0.0
    # scaled like hypot so tiny errors do not underflow when squared
    return float(scale * np.sqrt(np.mean((e / scale) ** 2)))


def mae(pred, truth) -> float:
    p, t = _pair(pred, truth)
    return float(np.mean(np.abs(p - t)))


def pearson(pred, truth) -> float:
    p, t = _pair(pred, truth)
    if p.size < 3:
        raise ValueError("correlation needs at least 3 weeks")
    if p.var() < VAR_FLOOR or t.var() < VAR_FLOOR:
        raise ConstantSeriesError("correlation undefined for a constant series")
    pc, tc = p - p.mean(), t - t.mean()
    return float(np.clip(pc @ tc / math.sqrt((pc @ pc) * (tc @ tc)), -1.0, 1.0))


@dataclass(frozen=True)
class PeriodSlice:
    name: str
    start: WeekStamp
    end: WeekStamp

    def __post_init__(self):
        if self.end < self.start:
            raise ValueError(f"slice {self.name!r} ends before it starts")

    def __contains__(self, week: WeekStamp) -> bool:
        return self.start <= week <= self.end


def season_name(year: int) -> str:
    return f"'{year % 100:02d}-'{(year + 1) % 100:02d}"


def season_slices(first_year: int, last_year: int,
                  extra: Sequence[PeriodSlice] = ()) -> list[PeriodSlice]:
    """Flu seasons (week 40 through week 20 of the next year) starting in
    ``first_year..last_year``, followed by ``extra``."""
    out = [PeriodSlice(season_name(y), WeekStamp(y, 40), WeekStamp(y + 1, 20))
           for y in range(first_year, last_year + 1)]
    return out + list(extra)


def seasons_covering(weeks: Sequence[WeekStamp]) -> list[PeriodSlice]:
    """Every season that overlaps ``weeks``."""
    if not weeks:
        return []
    lo, hi = min(weeks), max(weeks)
    first = lo.iso_year - 1 if lo.iso_week <= 20 else lo.iso_year
    last = hi.iso_year if hi.iso_week >= 40 else hi.iso_year - 1
    return [s for s in season_slices(first, last) if any(w in s for w in weeks)]


@dataclass(frozen=True)
class Cell:
    rmse: float
    mae: float
    correlation: float | None
    n_weeks: int

    def get(self, metric: str):
        return {"RMSE": self.rmse, "MAE": self.mae, "Correlation": self.correlation}[metric]


@dataclass
class MetricReport:
    methods: list[str]
    slices: list[PeriodSlice]
    cells: dict[tuple[str, str], Cell | None]
    best: dict[tuple[str, str], set[str]] = field(default_factory=dict)

    def value(self, metric: str, method: str, slice_name: str):
        cell = self.cells.get((method, slice_name))
        return None if cell is None else cell.get(metric)


def _series(run) -> tuple[str, dict[WeekStamp, float]]:
    if isinstance(run, NowcastRun):
        return run.label, run.as_dict()
    label, preds = run
    return label, dict(preds)


def _cell(weeks, preds, truth) -> Cell | None:
    if not weeks:
        return None
    p = np.array([preds[w] for w in weeks])
    t = np.array([truth[w] for w in weeks])
    try:
        corr = pearson(p, t)
    except (ValueError, ConstantSeriesError):
        corr = None
    return Cell(rmse(p, t), mae(p, t), corr, len(weeks))


def build_report(runs, truth: Mapping[WeekStamp, float], slices: Sequence[PeriodSlice],
                 strict: bool = False) -> MetricReport:
    """Metric table per (method, slice) on the percent scale.

    Each method is scored on its own weeks that have truth; ``strict=True``
    restricts every method to weeks where all methods have predictions.
    """
    if not runs:
        raise ValueError("need at least one run")
    series = [_series(r) for r in runs]
    labels = [s[0] for s in series]
    if len(set(labels)) != len(labels):
        raise ValueError(f"duplicate method labels {labels}")
    truth = {w: v for w, v in truth.items() if v is not None and not np.isnan(v)}
    shared = None
    if strict:
        shared = set(truth)
        for _, preds in series:
            shared &= set(preds)
    cells = {}
    for label, preds in series:
        for sl in slices:
            weeks = sorted(w for w in preds if w in truth and w in sl
                           and (shared is None or w in shared))
            cells[(label, sl.name)] = _cell(weeks, preds, truth)
    report = MetricReport(labels, list(slices), cells)
    for metric in METRICS:
        for sl in slices:
            vals = {m: report.value(metric, m, sl.name) for m in labels}
            vals = {m: v for m, v in vals.items() if v is not None}
            if not vals:
                continue
            target = max(vals.values()) if metric == "Correlation" else min(vals.values())
            report.best[(metric, sl.name)] = {m for m, v in vals.items() if v == target}
    return report


def write_report_csv(path, report: MetricReport, digits: int | None = None) -> None:
    """Table-shaped report plus a ``*.best.csv`` companion of 0/1 flags."""
    path = Path(path)
    best_path = path.with_name(path.stem + ".best.csv")
    header = ["metric", "method", *(s.name for s in report.slices)]
    with path.open("w", newline="") as fh, best_path.open("w", newline="") as fb:
        w, wb = csv.writer(fh, lineterminator="\n"), csv.writer(fb, lineterminator="\n")
        w.writerow(header)
        wb.writerow(header)
        for metric in METRICS:
            for m in report.methods:
                row, brow = [metric, m], [metric, m]
                for sl in report.slices:
                    v = report.value(metric, m, sl.name)
                    if v is None:
                        row.append("--")
                        brow.append("--")
                    else:
                        row.append(repr(v) if digits is None else f"{v:.{digits}f}")
                        brow.append("1" if m in report.best.get((metric, sl.name), ()) else "0")
                w.writerow(row)
                wb.writerow(brow)
