"""Weekly panels, transforms, and rolling design windows.

Targets are %ILI on the percent scale, modelled on the logit scale.  Predictors
are nonnegative search volumes, modelled as ``ln(v + eps)``.
"""
from __future__ import annotations

import csv
import datetime as dt
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.special import expit

from .errors import DomainError, InsufficientHistoryError, SchemaError

DEFAULT_EPS = 0.5

_ISO_WEEK_RE = re.compile(r"^(\d{4})-W(\d{2})$")
_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")


@dataclass(frozen=True, order=True)
class WeekStamp:
    """An ISO calendar week."""

    iso_year: int
    iso_week: int

    def __post_init__(self):
        # raises ValueError for week 53 in a 52-week year, week 0, etc.
        dt.date.fromisocalendar(self.iso_year, self.iso_week, 1)

    @classmethod
    def from_date(cls, day: dt.date) -> "WeekStamp":
        y, w, _ = day.isocalendar()
        return cls(y, w)

    @classmethod
    def parse(cls, text: str) -> "WeekStamp":
        """Parse ``YYYY-Www`` or a ``YYYY-MM-DD`` week-ending date."""
        text = text.strip()
        m = _ISO_WEEK_RE.match(text)
        if m:
            return cls(int(m.group(1)), int(m.group(2)))
        if _DATE_RE.match(text):
            return cls.from_date(dt.date.fromisoformat(text))
        raise ValueError(f"unrecognised week/date {text!r}")

    def monday(self) -> dt.date:
        return dt.date.fromisocalendar(self.iso_year, self.iso_week, 1)

    def saturday(self) -> dt.date:
        return dt.date.fromisocalendar(self.iso_year, self.iso_week, 6)

    @property
    def ordinal(self) -> int:
        """Absolute week count; consecutive weeks differ by exactly one."""
        return self.monday().toordinal() // 7

    @classmethod
    def from_ordinal(cls, ordinal: int) -> "WeekStamp":
        return cls.from_date(dt.date.fromordinal(ordinal * 7 + 1))

    def shift(self, n: int) -> "WeekStamp":
        return WeekStamp.from_date(self.monday() + dt.timedelta(weeks=n))

    def next(self) -> "WeekStamp":
        return self.shift(1)

    def __str__(self) -> str:
        return f"{self.iso_year:04d}-W{self.iso_week:02d}"


def week_range(start: WeekStamp, end: WeekStamp) -> list[WeekStamp]:
    """Inclusive list of consecutive weeks from ``start`` to ``end``."""
    return [WeekStamp.from_ordinal(o) for o in range(start.ordinal, end.ordinal + 1)]


# --------------------------------------------------------------------------
# scalar transforms

def logit(p_percent: float) -> float:
    if not 0.0 < p_percent < 100.0:
        raise DomainError(f"%ILI must lie strictly inside (0, 100), got {p_percent!r}")
    q = p_percent / 100.0
    return math.log(q / (1.0 - q))


def inverse_logit(x: float) -> float:
    """Percent-scale inverse of :func:`logit`."""
    if x >= 0:
        return 100.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return 100.0 * e / (1.0 + e)


def logit_array(p_percent) -> np.ndarray:
    p = np.asarray(p_percent, dtype=float)
    ok = np.isnan(p) | ((p > 0.0) & (p < 100.0))
    if not np.all(ok):
        bad = p[~ok][0]
        raise DomainError(f"%ILI must lie strictly inside (0, 100), got {bad!r}")
    q = p / 100.0
    return np.log(q) - np.log1p(-q)


def inverse_logit_array(x) -> np.ndarray:
    return 100.0 * expit(np.asarray(x, dtype=float))


def log_volume(v: float, eps: float = DEFAULT_EPS) -> float:
    if v < 0:
        raise DomainError(f"search volume must be nonnegative, got {v!r}")
    if eps <= 0:
        raise ValueError("eps must be positive")
    return math.log(v + eps)


def log_volume_array(v, eps: float = DEFAULT_EPS) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise DomainError("search volumes must be nonnegative")
    if eps <= 0:
        raise ValueError("eps must be positive")
    return np.log(v + eps)


def inverse_log_volume_array(x, eps: float = DEFAULT_EPS) -> np.ndarray:
    return np.exp(np.asarray(x, dtype=float)) - eps


# --------------------------------------------------------------------------
# panel

def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class WeeklyPanel:
    """Contiguous weekly target series plus a matrix of named predictors.

    ``target`` may be NaN only in a trailing run (weeks not yet reported).
    """

    weeks: tuple[WeekStamp, ...]
    target: np.ndarray
    predictors: np.ndarray
    names: tuple[str, ...]
    state: str = "raw"
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        object.__setattr__(self, "weeks", tuple(self.weeks))
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "target", _frozen(self.target))
        X = np.asarray(self.predictors, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        object.__setattr__(self, "predictors", _frozen(X))
        self._validate()

    def _validate(self):
        n = len(self.weeks)
        if self.state not in ("raw", "transformed"):
            raise ValueError(f"unknown transform state {self.state!r}")
        if self.target.shape != (n,):
            raise ValueError("target length must match weeks")
        if self.predictors.shape[0] != n:
            raise ValueError("predictor rows must match weeks")
        if self.predictors.shape[1] < 1:
            raise ValueError("need at least one predictor")
        if len(self.names) != self.predictors.shape[1]:
            raise ValueError("one name per predictor column")
        if len(set(self.names)) != len(self.names):
            raise ValueError("predictor names must be unique")
        ords = [w.ordinal for w in self.weeks]
        if any(b - a != 1 for a, b in zip(ords, ords[1:])):
            raise ValueError("weeks must be strictly increasing with no gaps")
        missing = np.isnan(self.target)
        if missing.any():
            first = int(np.argmax(missing))
            if not missing[first:].all():
                raise ValueError("target may be missing only at the tail")
        if np.isnan(self.predictors).any():
            raise ValueError("predictors may not contain missing values")
        if self.state == "raw":
            t = self.target[~missing]
            if np.any((t <= 0) | (t >= 100)):
                raise DomainError("raw target values must lie in (0, 100)")
            if np.any(self.predictors < 0):
                raise DomainError("raw predictor values must be nonnegative")

    @property
    def n_weeks(self) -> int:
        return len(self.weeks)

    @property
    def p(self) -> int:
        return self.predictors.shape[1]

    def index(self, week: WeekStamp) -> int:
        i = week.ordinal - self.weeks[0].ordinal
        if not 0 <= i < len(self.weeks):
            raise KeyError(f"week {week} outside panel")
        return i

    def __contains__(self, week) -> bool:
        return 0 <= week.ordinal - self.weeks[0].ordinal < len(self.weeks)

    def transformed(self) -> "WeeklyPanel":
        if self.state == "transformed":
            return self
        return replace(self, target=logit_array(self.target),
                       predictors=log_volume_array(self.predictors, self.eps),
                       state="transformed")

    def restored(self) -> "WeeklyPanel":
        if self.state == "raw":
            return self
        return replace(self, target=inverse_logit_array(self.target),
                       predictors=inverse_log_volume_array(self.predictors, self.eps),
                       state="raw")

    def target_percent(self) -> np.ndarray:
        return self.target if self.state == "raw" else inverse_logit_array(self.target)

    def truncated(self, week: WeekStamp) -> "WeeklyPanel":
        """Panel as seen during ``week``: predictors through ``week``, target before it."""
        i = self.index(week)
        y = np.array(self.target[: i + 1])
        y[i] = np.nan
        return replace(self, weeks=self.weeks[: i + 1], target=y,
                       predictors=self.predictors[: i + 1])

    def select(self, names: Sequence[str]) -> "WeeklyPanel":
        cols = [self.names.index(n) for n in names]
        return replace(self, predictors=self.predictors[:, cols], names=tuple(names))

    def span(self, start: WeekStamp, end: WeekStamp) -> "WeeklyPanel":
        i, j = self.index(start), self.index(end)
        return replace(self, weeks=self.weeks[i: j + 1], target=self.target[i: j + 1],
                       predictors=self.predictors[i: j + 1])

    def last_observed(self) -> WeekStamp | None:
        ok = np.flatnonzero(~np.isnan(self.target))
        return self.weeks[ok[-1]] if len(ok) else None


# --------------------------------------------------------------------------
# design windows

@dataclass(frozen=True)
class DesignWindow:
    """Training rows and the prediction row for one nowcast week ``T``.

    ``ar_block[i, s-1]`` is the target ``s`` weeks before row ``i``'s
    response week; ``pred_ar`` holds weeks ``T-1 ... T-m`` in that order.
    """

    week: WeekStamp
    response: np.ndarray
    ar_block: np.ndarray
    exo_block: np.ndarray
    pred_ar: np.ndarray
    pred_exo: np.ndarray
    response_weeks: tuple[WeekStamp, ...]
    exo_names: tuple[str, ...] = ()
    constant_columns: tuple[int, ...] = ()

    @property
    def n(self) -> int:
        return self.response.shape[0]

    @property
    def m(self) -> int:
        return self.ar_block.shape[1]

    @property
    def p(self) -> int:
        return self.exo_block.shape[1]

    def design(self) -> np.ndarray:
        """Penalized columns, AR lags first."""
        return np.hstack([self.ar_block, self.exo_block])

    def prediction_row(self) -> np.ndarray:
        return np.concatenate([self.pred_ar, self.pred_exo])

    def rows(self, idx) -> "DesignWindow":
        idx = np.asarray(idx)
        return replace(self, response=self.response[idx], ar_block=self.ar_block[idx],
                       exo_block=self.exo_block[idx],
                       response_weeks=tuple(self.response_weeks[i] for i in idx))


def build_design_window(panel: WeeklyPanel, T: WeekStamp, N: int, m: int,
                        columns: Sequence[str] | None = None) -> DesignWindow:
    if panel.state != "transformed":
        raise ValueError("design windows are built from a transformed panel")
    if N < 1 or m < 0:
        raise ValueError("need N >= 1 and m >= 0")
    iT = panel.index(T)
    first = iT - N - m
    if first < 0:
        raise InsufficientHistoryError(
            f"{T}: need {N + m} target weeks before T, panel has {iT}")
    y = panel.target
    hist = y[first:iT]
    if np.isnan(hist).any():
        raise InsufficientHistoryError(f"{T}: target missing inside the training span")
    if columns is None:
        X, names = panel.predictors, panel.names
    else:
        cols = [panel.names.index(c) for c in columns]
        X, names = panel.predictors[:, cols], tuple(columns)
    rows = np.arange(iT - N, iT)
    response = y[rows].copy()
    ar = np.empty((N, m))
    for s in range(1, m + 1):
        ar[:, s - 1] = y[rows - s]
    pred_ar = np.array([y[iT - s] for s in range(1, m + 1)], dtype=float)
    return DesignWindow(week=T, response=response, ar_block=ar, exo_block=X[rows].copy(),
                        pred_ar=pred_ar, pred_exo=X[iT].copy(),
                        response_weeks=tuple(panel.weeks[i] for i in rows),
                        exo_names=tuple(names))


def standardize_columns(window: DesignWindow):
    """Center and scale every design column over the training rows.

    Uses the sample (n-1) standard deviation.  Constant columns become zero,
    keep scale 1 and are listed in ``constant_columns``.  Returns
    ``(window, centers, scales)`` over the concatenated AR + exo columns.
    """
    if window.n < 2:
        raise ValueError("standardization needs at least two rows")
    Z = window.design()
    centers = Z.mean(axis=0)
    scales = Z.std(axis=0, ddof=1)
    spread = np.ptp(Z, axis=0) if Z.shape[1] else np.zeros(0)
    constant = spread <= 1e-12 * np.maximum(1.0, np.abs(centers))
    scales = np.where(constant, 1.0, scales)
    Zs = (Z - centers) / scales
    Zs[:, constant] = 0.0
    row = (window.prediction_row() - centers) / scales
    m = window.m
    out = replace(window, ar_block=Zs[:, :m], exo_block=Zs[:, m:],
                  pred_ar=row[:m], pred_exo=row[m:],
                  constant_columns=tuple(int(i) for i in np.flatnonzero(constant)))
    return out, centers, scales


# --------------------------------------------------------------------------
# CSV ingestion

def _read_rows(path):
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(path, [(1, "file is empty")])
    return path, rows[0], rows[1:]


def _parse_weeks(path, body, problems):
    weeks = []
    for ln, row in enumerate(body, start=2):
        try:
            weeks.append(WeekStamp.parse(row[0]))
        except (ValueError, IndexError):
            problems.append((ln, f"bad date {row[0] if row else ''!r}"))
            weeks.append(None)
    good = [(ln, w) for ln, w in enumerate(weeks, start=2) if w is not None]
    for (l0, a), (l1, b) in zip(good, good[1:]):
        d = b.ordinal - a.ordinal
        if d <= 0:
            problems.append((l1, f"week {b} not after {a}"))
        elif d > 1:
            problems.append((l1, f"gap of {d - 1} week(s) before {b}"))
    return weeks


def read_target_csv(path):
    """Read a ``date,ili`` file.  Empty cells mark unreported weeks."""
    path, header, body = _read_rows(path)
    problems = []
    if [h.strip() for h in header] != ["date", "ili"]:
        problems.append((1, f"expected header 'date,ili', got {','.join(header)!r}"))
        raise SchemaError(path, problems)
    weeks = _parse_weeks(path, body, problems)
    vals = []
    for ln, row in enumerate(body, start=2):
        if len(row) != 2:
            problems.append((ln, f"expected 2 fields, got {len(row)}"))
            vals.append(np.nan)
            continue
        cell = row[1].strip()
        if cell == "":
            vals.append(np.nan)
            continue
        try:
            v = float(cell)
        except ValueError:
            problems.append((ln, f"non-numeric ili {cell!r}"))
            v = np.nan
        else:
            if not 0.0 < v < 100.0:
                problems.append((ln, f"ili {v} outside (0, 100)"))
        vals.append(v)
    y = np.array(vals, dtype=float)
    miss = np.isnan(y)
    if miss.any() and not problems:
        first = int(np.argmax(miss))
        if not miss[first:].all():
            problems.append((first + 2, "missing ili before the last reported week"))
    if problems:
        raise SchemaError(path, problems)
    return weeks, y


def read_predictor_csv(path):
    """Read a wide ``date,<term_1>,...,<term_p>`` search-volume file."""
    path, header, body = _read_rows(path)
    problems = []
    header = [h.strip() for h in header]
    if not header or header[0] != "date" or len(header) < 2:
        raise SchemaError(path, [(1, "expected header 'date,<term_1>,...'")])
    names = header[1:]
    dup = sorted({n for n in names if names.count(n) > 1})
    if dup:
        problems.append((1, f"duplicate term names {dup}"))
    weeks = _parse_weeks(path, body, problems)
    X = np.full((len(body), len(names)), np.nan)
    for ln, row in enumerate(body, start=2):
        if len(row) != len(header):
            problems.append((ln, f"expected {len(header)} fields, got {len(row)}"))
            continue
        for j, cell in enumerate(row[1:]):
            try:
                v = float(cell)
            except ValueError:
                problems.append((ln, f"non-numeric volume {cell!r} for {names[j]!r}"))
                continue
            if not v >= 0:
                problems.append((ln, f"negative or missing volume for {names[j]!r}"))
            X[ln - 2, j] = v
    if problems:
        raise SchemaError(path, problems)
    return weeks, names, X


def read_availability_csv(path) -> dict[str, WeekStamp]:
    """Read a ``term,first_usable_date`` sidecar."""
    path, header, body = _read_rows(path)
    if [h.strip() for h in header] != ["term", "first_usable_date"]:
        raise SchemaError(path, [(1, "expected header 'term,first_usable_date'")])
    problems, out = [], {}
    for ln, row in enumerate(body, start=2):
        if len(row) != 2:
            problems.append((ln, f"expected 2 fields, got {len(row)}"))
            continue
        term = row[0].strip()
        if term in out:
            problems.append((ln, f"duplicate term {term!r}"))
        try:
            out[term] = WeekStamp.parse(row[1])
        except ValueError:
            problems.append((ln, f"bad date {row[1]!r}"))
    if problems:
        raise SchemaError(path, problems)
    return out


def load_panel(target_path, predictor_path, eps: float = DEFAULT_EPS) -> WeeklyPanel:
    """Align a target file and a predictor file into a raw panel.

    The panel spans the predictor weeks from the first reported target week
    onward; target weeks past the predictor range are ignored.
    """
    tw, y = read_target_csv(target_path)
    pw, names, X = read_predictor_csv(predictor_path)
    if not tw or not pw:
        raise SchemaError(target_path if not tw else predictor_path, [(2, "no data rows")])
    start = max(tw[0], pw[0])
    if start > pw[-1]:
        raise SchemaError(target_path, [(2, "target and predictor weeks do not overlap")])
    pi = start.ordinal - pw[0].ordinal
    weeks = pw[pi:]
    target = np.full(len(weeks), np.nan)
    ti = {w.ordinal: k for k, w in enumerate(tw)}
    for k, w in enumerate(weeks):
        j = ti.get(w.ordinal)
        if j is not None:
            target[k] = y[j]
    miss = np.isnan(target)
    if miss.any():
        first = int(np.argmax(miss))
        if not miss[first:].all():
            raise SchemaError(target_path, [(0, "target has gaps inside the predictor range")])
    return WeeklyPanel(weeks=weeks, target=target, predictors=X[pi:], names=names, eps=eps)


def write_target_csv(path, weeks: Iterable[WeekStamp], values) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "ili"])
        for wk, v in zip(weeks, values):
            w.writerow([str(wk), "" if np.isnan(v) else repr(float(v))])


def write_predictor_csv(path, weeks, names, X) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *names])
        for wk, row in zip(weeks, X):
            w.writerow([str(wk), *(repr(float(v)) for v in row)])


def write_availability_csv(path, availability: dict[str, WeekStamp]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["term", "first_usable_date"])
        for term, wk in availability.items():
            w.writerow([term, str(wk)])
