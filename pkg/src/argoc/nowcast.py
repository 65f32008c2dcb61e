"""Rolling-window weekly nowcasts: ARGO-C, plain ARGO (lasso), naive and VAR1."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from joblib import Parallel, delayed

from . import sgl
from .clustering import ClusterPartition
from .errors import InsufficientHistoryError, SchemaError
from .timeseries import (WeeklyPanel, WeekStamp, build_design_window, inverse_logit_array,
                         logit_array, standardize_columns, week_range)

log = logging.getLogger(__name__)

KINDS = ("argo_c", "argo_lasso", "naive", "var1", "exo_only_argo_c", "external")
LABELS = {"argo_c": "ARGO-C", "argo_lasso": "ARGO", "naive": "naive", "var1": "VAR1",
          "exo_only_argo_c": "ARGO-C-raw", "external": "external"}


@dataclass(frozen=True)
class MethodSpec:
    kind: str
    m: int = 52
    N: int = 104
    alpha: float = sgl.DEFAULT_ALPHA
    folds: int = 10
    n_lambda: int = 50
    ratio: float = 1e-3
    tol: float = sgl.DEFAULT_TOL
    max_iter: int = sgl.DEFAULT_MAX_ITER
    cv_every: int = 1
    standardize: bool = True
    label: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown method kind {self.kind!r}")
        if self.kind == "exo_only_argo_c":
            object.__setattr__(self, "m", 0)
        if not self.label:
            object.__setattr__(self, "label", LABELS[self.kind])
        if self.N < 2 or self.m < 0 or self.cv_every < 1:
            raise ValueError("need N >= 2, m >= 0, cv_every >= 1")

    @property
    def penalized(self) -> bool:
        return self.kind in ("argo_c", "argo_lasso", "exo_only_argo_c")

    @property
    def grouped(self) -> bool:
        return self.kind in ("argo_c", "exo_only_argo_c")


@dataclass(frozen=True)
class PartitionSchedule:
    """Vocabulary vintages: each partition applies from its start week on."""

    entries: tuple[tuple[WeekStamp, ClusterPartition], ...]

    def __post_init__(self):
        ents = tuple(sorted(self.entries, key=lambda e: e[0]))
        object.__setattr__(self, "entries", ents)

    @classmethod
    def single(cls, partition: ClusterPartition, start: WeekStamp | None = None):
        return cls(((start or WeekStamp(1, 1), partition),))

    def for_week(self, week: WeekStamp) -> ClusterPartition | None:
        part = None
        for start, p in self.entries:
            if start <= week:
                part = p
        return part


def active_terms(panel: WeeklyPanel, week: WeekStamp,
                 availability: Mapping[str, WeekStamp] | None) -> tuple[str, ...]:
    if not availability:
        return panel.names
    return tuple(n for n in panel.names if availability.get(n, panel.weeks[0]) <= week)


@dataclass(frozen=True)
class NowcastRun:
    method: MethodSpec
    weeks: tuple[WeekStamp, ...]
    predictions_logit: np.ndarray
    lambdas: np.ndarray
    masks: tuple[np.ndarray, ...] = ()
    active: tuple[tuple[str, ...], ...] = ()
    residuals_logit: tuple[np.ndarray, ...] = ()   # df-adjusted training residuals
    skipped: tuple[tuple[WeekStamp, str], ...] = ()
    meta: dict = field(default_factory=dict)

    @property
    def predictions(self) -> np.ndarray:
        return inverse_logit_array(self.predictions_logit)

    @property
    def label(self) -> str:
        return self.method.label

    def as_dict(self) -> dict[WeekStamp, float]:
        return dict(zip(self.weeks, self.predictions))

    def index(self, week: WeekStamp) -> int:
        return self.weeks.index(week)


def config_hash(*parts) -> str:
    blob = json.dumps([_jsonable(p) for p in parts], sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _jsonable(x):
    if isinstance(x, MethodSpec):
        return asdict(x)
    if isinstance(x, WeekStamp):
        return str(x)
    if isinstance(x, PartitionSchedule):
        return [[str(s), list(p.labels), list(p.assignments)] for s, p in x.entries]
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in sorted(x.items(), key=lambda kv: str(kv[0]))}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


# --------------------------------------------------------------------------
# penalized rolling nowcasts

@dataclass(frozen=True)
class _WeekOut:
    week: WeekStamp
    pred: float
    lam: float
    mask: np.ndarray
    terms: tuple[str, ...]
    resid: np.ndarray


def _groups_for(spec: MethodSpec, terms, schedule: PartitionSchedule | None, week):
    if spec.kind == "argo_lasso":
        return tuple((j,) for j in range(len(terms)))
    part = schedule.for_week(week) if schedule is not None else None
    if part is None:
        raise ValueError(f"{week}: no partition covers this week")
    return tuple(tuple(g) for g in part.restricted(terms))


def _prepare(panel, week, spec, terms):
    W = build_design_window(panel, week, spec.N, spec.m, columns=terms)
    if spec.standardize:
        W, _, _ = standardize_columns(W)
    return W


def _select_lambda(W, pen, spec) -> float:
    path = sgl.lambda_path(W, pen, spec.n_lambda, spec.ratio)
    solver = "lasso" if spec.kind == "argo_lasso" else "sgl"
    return sgl.cross_validate(W, pen, spec.folds, path, spec.tol, spec.max_iter,
                              solver=solver).best_lambda


def _fit(W, pen, spec):
    if spec.kind == "argo_lasso":
        return sgl.fit_lasso(W, pen.lam, spec.tol, spec.max_iter)
    return sgl.fit(W, pen, spec.tol, spec.max_iter)


def _anchor(week: WeekStamp, every: int) -> WeekStamp:
    return WeekStamp.from_ordinal(week.ordinal - week.ordinal % every)


def df_adjusted(resid, df: int) -> np.ndarray:
    """Rescale in-sample residuals to the spread of a new-week prediction error.

    ``df`` is the number of nonzero coefficients (the lasso's unbiased degrees
    of freedom) and one more is added for the intercept.  The factor
    ``N / (N - df - 1)`` undoes the in-sample shrinkage of the residual
    variance and ``1 + (df + 1) / N`` adds the average leverage of a new row,
    as for least squares on the selected support.
    """
    r = np.asarray(resid, dtype=float)
    n = len(r)
    k = df + 1
    return r * np.sqrt(n / max(n - k, 1) * (1.0 + k / n))


def _penalized_week(panel, week, spec, schedule, availability, lam_cache) -> _WeekOut:
    terms = active_terms(panel, week, availability)
    W = _prepare(panel, week, spec, terms)
    groups = _groups_for(spec, terms, schedule, week)
    pen = sgl.PenaltySpec(spec.alpha if spec.kind != "argo_lasso" else 1.0, 0.0, groups, spec.m)
    lam = None
    if spec.cv_every > 1:
        anchor = _anchor(week, spec.cv_every)
        key = (anchor, terms)
        if key in lam_cache:
            lam = lam_cache[key]
        elif anchor in panel and anchor != week:
            try:
                Wa = _prepare(panel, anchor, spec, terms)
            except InsufficientHistoryError:
                Wa = None
            if Wa is not None and active_terms(panel, anchor, availability) == terms:
                lam = lam_cache[key] = _select_lambda(Wa, pen, spec)
    if lam is None:
        lam = _select_lambda(W, pen, spec)
        if spec.cv_every > 1 and _anchor(week, spec.cv_every) == week:
            lam_cache[(week, terms)] = lam
    model = _fit(W, pen.with_lambda(lam), spec)
    pred = model.predict(W.pred_ar, W.pred_exo)
    resid = df_adjusted(W.response - model.predict_rows(W), int(np.count_nonzero(model.coef())))
    return _WeekOut(week, pred, lam, model.coef() != 0, terms, resid)


def _run_chunk(panel, weeks, spec, schedule, availability):
    cache, outs, skipped = {}, [], []
    for wk in weeks:
        if wk not in panel:
            skipped.append((wk, "week outside panel"))
            continue
        try:
            outs.append(_penalized_week(panel, wk, spec, schedule, availability, cache))
        except InsufficientHistoryError as exc:
            skipped.append((wk, str(exc)))
    return outs, skipped


def _chunks(seq, n):
    n = max(1, min(n, len(seq)))
    return [list(c) for c in np.array_split(np.array(seq, dtype=object), n)] if seq else []


def nowcast_penalized(panel: WeeklyPanel, span: Sequence[WeekStamp], spec: MethodSpec,
                      schedule: PartitionSchedule | None = None,
                      availability: Mapping[str, WeekStamp] | None = None,
                      jobs: int = 1, seed: int = 0) -> NowcastRun:
    """Rolling penalized nowcasts for every week in ``span``.

    Week ``T`` only sees targets before ``T`` and predictors through ``T``.
    With ``cv_every = k > 1`` lambda is chosen at the most recent week whose
    absolute ordinal is a multiple of ``k`` and reused until the next one.
    """
    if not spec.penalized:
        raise ValueError(f"{spec.kind} is not a penalized method")
    if panel.state != "transformed":
        panel = panel.transformed()
    span = list(span)
    if jobs > 1 and len(span) > 1:
        parts = Parallel(n_jobs=jobs)(delayed(_run_chunk)(panel, c, spec, schedule, availability)
                                      for c in _chunks(span, jobs))
    else:
        parts = [_run_chunk(panel, span, spec, schedule, availability)]
    outs = [o for p in parts for o in p[0]]
    skipped = [s for p in parts for s in p[1]]
    for wk, why in skipped:
        log.info("skipped %s: %s", wk, why)
    return NowcastRun(
        method=spec,
        weeks=tuple(o.week for o in outs),
        predictions_logit=np.array([o.pred for o in outs]),
        lambdas=np.array([o.lam for o in outs]),
        masks=tuple(o.mask for o in outs),
        active=tuple(o.terms for o in outs),
        residuals_logit=tuple(o.resid for o in outs),
        skipped=tuple(skipped),
        meta={"seed": seed, "config_hash": config_hash(spec, schedule, availability or {},
                                                       [str(w) for w in span])},
    )


def nowcast_argo_c(panel, schedule, span, spec: MethodSpec | None = None,
                   availability=None, jobs=1, seed=0) -> NowcastRun:
    spec = spec or MethodSpec("argo_c")
    if not spec.grouped:
        raise ValueError("nowcast_argo_c needs an argo_c or exo_only_argo_c spec")
    return nowcast_penalized(panel, span, spec, schedule, availability, jobs, seed)


def nowcast_argo(panel, span, spec: MethodSpec | None = None, availability=None,
                 jobs=1, seed=0) -> NowcastRun:
    """Plain ARGO: lasso over AR lags and all usable terms."""
    spec = spec or MethodSpec("argo_lasso")
    if spec.kind != "argo_lasso":
        raise ValueError("nowcast_argo needs an argo_lasso spec")
    return nowcast_penalized(panel, span, spec, None, availability, jobs, seed)


# --------------------------------------------------------------------------
# benchmarks

def nowcast_naive(panel: WeeklyPanel, span: Sequence[WeekStamp]) -> NowcastRun:
    """Carry last week's %ILI forward."""
    if panel.state != "transformed":
        panel = panel.transformed()
    weeks, preds, skipped = [], [], []
    for wk in span:
        prev = wk.shift(-1)
        if prev not in panel or np.isnan(panel.target[panel.index(prev)]):
            skipped.append((wk, "previous week not reported"))
            continue
        weeks.append(wk)
        preds.append(panel.target[panel.index(prev)])
    return NowcastRun(MethodSpec("naive", m=1), tuple(weeks), np.array(preds),
                      np.full(len(weeks), np.nan), skipped=tuple(skipped))


@dataclass(frozen=True)
class Var1Fit:
    intercept: np.ndarray
    transition: np.ndarray      # A[i, j]: effect of series j at t-1 on series i at t
    std_errors: np.ndarray      # same shape as transition
    rank_deficient: bool


def fit_var1(Z) -> Var1Fit:
    """Least squares for ``Z_t = c + A Z_{t-1} + e_t`` over the rows of ``Z``.

    Rank-deficient designs get the minimum-norm (pseudo-inverse) solution.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    n, d = Z.shape
    X = np.hstack([np.ones((n - 1, 1)), Z[:-1]])
    Y = Z[1:]
    coef, _, rank, _ = np.linalg.lstsq(X, Y, rcond=None)
    deficient = rank < d + 1
    resid = Y - X @ coef
    dof = max(n - 1 - (d + 1), 1)
    sigma2 = (resid ** 2).sum(axis=0) / dof
    xtx_inv = np.linalg.pinv(X.T @ X)
    se = np.sqrt(np.outer(np.diag(xtx_inv)[1:], sigma2)).T
    return Var1Fit(coef[0], coef[1:].T, se, bool(deficient))


def nowcast_var1(panels: Mapping[str, WeeklyPanel], span: Sequence[WeekStamp],
                 N: int = 104) -> dict[str, NowcastRun]:
    """Joint VAR(1) on the logit targets of several aligned panels."""
    names = list(panels)
    if len(names) < 2:
        raise ValueError("VAR1 needs at least two jointly observed series")
    first = panels[names[0]]
    for nm in names[1:]:
        if panels[nm].weeks != first.weeks:
            raise ValueError("VAR1 panels must share the same weeks")
    if N < len(names) + 2:
        raise ValueError("need N >= dimension + 2")
    Z = np.column_stack([logit_array(panels[n].target_percent()) for n in names])
    weeks, preds, skipped, flags = [], [], [], []
    for wk in span:
        if wk not in first:
            skipped.append((wk, "week outside panel"))
            continue
        i = first.index(wk)
        hist = Z[i - N - 1: i] if i - N - 1 >= 0 else None
        if hist is None or np.isnan(hist).any():
            skipped.append((wk, f"need {N + 1} reported weeks before {wk}"))
            continue
        fitted = fit_var1(hist)
        weeks.append(wk)
        preds.append(fitted.intercept + fitted.transition @ Z[i - 1])
        if fitted.rank_deficient:
            flags.append(str(wk))
    preds = np.array(preds).reshape(len(weeks), len(names))
    spec = MethodSpec("var1", m=1, N=N)
    return {n: NowcastRun(spec, tuple(weeks), preds[:, k], np.full(len(weeks), np.nan),
                          skipped=tuple(skipped), meta={"rank_deficient_weeks": flags})
            for k, n in enumerate(names)}


def nowcast_regional(panels: Mapping[str, WeeklyPanel],
                     schedules: Mapping[str, PartitionSchedule], span,
                     spec: MethodSpec | None = None, availability=None, jobs=1
                     ) -> dict[str, NowcastRun]:
    """Per-region raw estimates from search data only (no AR terms)."""
    spec = spec or MethodSpec("exo_only_argo_c")
    if spec.kind != "exo_only_argo_c":
        raise ValueError("regional raw estimates use the exo_only_argo_c kind")
    return {r: nowcast_argo_c(p, schedules[r], span, spec, availability, jobs)
            for r, p in panels.items()}


# --------------------------------------------------------------------------
# traceplots

@dataclass(frozen=True)
class Traceplot:
    weeks: tuple[WeekStamp, ...]
    columns: tuple[str, ...]
    included: np.ndarray            # weeks x columns, bool
    available: np.ndarray           # weeks x columns, bool
    bands: tuple[tuple[int, int, int], ...]   # (group id, first col, stop col)


def extract_traceplot(run: NowcastRun, partition: ClusterPartition) -> Traceplot:
    """Inclusion matrix with AR lag columns first, then terms banded by group."""
    if not run.method.penalized:
        raise ValueError("traceplots need a penalized run")
    m = run.method.m
    order = sorted(range(partition.n), key=lambda i: (partition.assignments[i], i))
    terms = [partition.labels[i] for i in order]
    columns = [f"ar_{s}" for s in range(1, m + 1)] + terms
    bands, start = [], m
    for gid in range(1, partition.K + 1):
        size = partition.group_sizes[gid - 1]
        bands.append((gid, start, start + size))
        start += size
    inc = np.zeros((len(run.weeks), len(columns)), dtype=bool)
    avail = np.zeros_like(inc)
    col = {c: j for j, c in enumerate(columns)}
    for i, (mask, act) in enumerate(zip(run.masks, run.active)):
        inc[i, :m] = mask[:m]
        avail[i, :m] = True
        for name, on in zip(act, mask[m:]):
            j = col.get(name)
            if j is not None:
                inc[i, j] = on
                avail[i, j] = True
    return Traceplot(run.weeks, tuple(columns), inc, avail, tuple(bands))


# --------------------------------------------------------------------------
# artifacts

def _fmt(v) -> str:
    return "" if v is None or (isinstance(v, float) and np.isnan(v)) else repr(float(v))


def write_run_csv(path, run: NowcastRun, truth: Mapping[WeekStamp, float] | None = None):
    truth = truth or {}
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "prediction", "truth", "lambda", "method"])
        for wk, p, lam in zip(run.weeks, run.predictions, run.lambdas):
            w.writerow([str(wk), _fmt(p), _fmt(truth.get(wk)), _fmt(lam), run.label])


def read_run_csv(path, label: str | None = None) -> NowcastRun:
    """Read a run CSV (``date,prediction,...``) or an external ``date,prediction`` file."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0][:2]] != ["date", "prediction"]:
        raise SchemaError(path, [(1, "expected header starting 'date,prediction'")])
    header = [h.strip() for h in rows[0]]
    weeks, preds, lams, problems, name = [], [], [], [], label
    for ln, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            problems.append((ln, f"expected {len(header)} fields, got {len(row)}"))
            continue
        try:
            wk = WeekStamp.parse(row[0])
            p = float(row[1])
        except ValueError as exc:
            problems.append((ln, str(exc)))
            continue
        if not 0 < p < 100:
            problems.append((ln, f"prediction {p} outside (0, 100)"))
            continue
        weeks.append(wk)
        preds.append(p)
        if "lambda" in header:
            cell = row[header.index("lambda")]
            lams.append(float(cell) if cell else np.nan)
        if name is None and "method" in header:
            name = row[header.index("method")]
    if problems:
        raise SchemaError(path, problems)
    name = name or path.stem
    spec = MethodSpec("external", label=name)
    return NowcastRun(spec, tuple(weeks), logit_array(preds),
                      np.array(lams) if lams else np.full(len(weeks), np.nan))


def write_traceplot_csv(path, tp: Traceplot):
    """0/1 inclusion per week; empty cells mark terms outside that week's vocabulary."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *tp.columns])
        for wk, inc, av in zip(tp.weeks, tp.included, tp.available):
            w.writerow([str(wk), *(str(int(i)) if a else "" for i, a in zip(inc, av))])


def read_traceplot_csv(path, partition: ClusterPartition | None = None) -> Traceplot:
    """Inverse of :func:`write_traceplot_csv`; bands come from ``partition`` if given."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or not rows[0] or rows[0][0] != "date":
        raise SchemaError(path, [(1, "expected header 'date,<column>,...'")])
    columns = tuple(rows[0][1:])
    weeks, inc, av = [], [], []
    for ln, row in enumerate(rows[1:], start=2):
        if len(row) != len(columns) + 1 or any(c not in ("", "0", "1") for c in row[1:]):
            raise SchemaError(path, [(ln, "expected 0, 1 or empty cells")])
        try:
            weeks.append(WeekStamp.parse(row[0]))
        except ValueError as exc:
            raise SchemaError(path, [(ln, str(exc))]) from None
        inc.append([c == "1" for c in row[1:]])
        av.append([c != "" for c in row[1:]])
    bands = []
    if partition is not None:
        lookup = dict(zip(partition.labels, partition.assignments))
        for j, c in enumerate(columns):
            g = lookup.get(c)
            if g is None:
                continue
            if bands and bands[-1][0] == g and bands[-1][2] == j:
                bands[-1][2] = j + 1
            else:
                bands.append([g, j, j + 1])
    shape = (len(weeks), len(columns))
    return Traceplot(tuple(weeks), columns, np.array(inc, dtype=bool).reshape(shape),
                     np.array(av, dtype=bool).reshape(shape), tuple(tuple(b) for b in bands))


def write_residuals_csv(path, run: NowcastRun):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        n = max((len(r) for r in run.residuals_logit), default=0)
        w.writerow(["date", "prediction_logit", *(f"r{i}" for i in range(1, n + 1))])
        for wk, p, r in zip(run.weeks, run.predictions_logit, run.residuals_logit):
            w.writerow([str(wk), repr(float(p)), *(repr(float(v)) for v in r)])


def read_residuals_csv(path):
    """Returns ``(weeks, logit predictions, list of residual arrays)``."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:2] != ["date", "prediction_logit"]:
        raise SchemaError(path, [(1, "expected header 'date,prediction_logit,r1,...'")])
    weeks, preds, res = [], [], []
    for ln, row in enumerate(rows[1:], start=2):
        try:
            weeks.append(WeekStamp.parse(row[0]))
            preds.append(float(row[1]))
            res.append(np.array([float(v) for v in row[2:] if v != ""]))
        except (ValueError, IndexError) as exc:
            raise SchemaError(path, [(ln, str(exc))]) from None
    return weeks, np.array(preds), res


def write_model_csv(path, model: sgl.SglModel, exo_names: Sequence[str],
                    centers=None, scales=None):
    """Dump coefficients, mapped back to the unstandardized design when given."""
    intercept, coef = model.intercept, model.coef()
    if centers is not None:
        coef = coef / scales
        intercept = intercept - float(coef @ centers)
    m = model.penalty.m
    rows = [("intercept", intercept)]
    rows += [(f"ar_{s}", coef[s - 1]) for s in range(1, m + 1)]
    rows += list(zip(exo_names, coef[m:]))
    rows += [("lambda", model.penalty.lam), ("alpha", model.penalty.alpha),
             ("converged", int(model.converged)), ("objective", model.objective_value)]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["name", "value"])
        for k, v in rows:
            w.writerow([k, repr(float(v)) if isinstance(v, float) else v])


def span_weeks(start: WeekStamp, end: WeekStamp) -> list[WeekStamp]:
    return week_range(start, end)
