"""Cross-regional boosting by a best linear predictor (BLP).

This is a documented surrogate for the structured-covariance predictor of the
regional pipeline: sample-moment BLP over the features
``{raw regional estimates, national estimate, lagged regional truths}`` with
convex shrinkage of the joint covariance toward a region-block-diagonal
target.  Under full shrinkage each region's prediction uses only its own raw
estimate and its own lagged truth.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import SingularCovarianceError
from .nowcast import NowcastRun
from .timeseries import WeekStamp, inverse_logit_array, logit_array


@dataclass(frozen=True)
class BoostInputs:
    """Logit-scale inputs per week; row ``i`` of every array is ``weeks[i]``.

    ``lagged_truth[i]`` is the regional truth at ``weeks[i] - 1``.
    """

    weeks: tuple[WeekStamp, ...]
    raw_regional: np.ndarray        # weeks x R
    national_estimate: np.ndarray   # weeks
    lagged_truth: np.ndarray        # weeks x R
    regions: tuple[str, ...] = ()

    def __post_init__(self):
        n = len(self.weeks)
        R = np.asarray(self.raw_regional).shape[1]
        if np.asarray(self.raw_regional).shape != (n, R):
            raise ValueError("raw_regional must be weeks x regions")
        if np.asarray(self.national_estimate).shape != (n,):
            raise ValueError("national_estimate must have one value per week")
        if np.asarray(self.lagged_truth).shape != (n, R):
            raise ValueError("lagged_truth must be weeks x regions")
        if not self.regions:
            object.__setattr__(self, "regions", tuple(f"region{r + 1}" for r in range(R)))

    @property
    def n_regions(self) -> int:
        return self.raw_regional.shape[1]

    def features(self) -> np.ndarray:
        """``[raw_1..raw_R, lag_1..lag_R, national]`` per week."""
        return np.column_stack([self.raw_regional, self.lagged_truth, self.national_estimate])

    def rows(self, idx) -> "BoostInputs":
        idx = np.asarray(idx)
        return BoostInputs(tuple(self.weeks[i] for i in idx), self.raw_regional[idx],
                           self.national_estimate[idx], self.lagged_truth[idx], self.regions)


def _block_ids(R: int) -> np.ndarray:
    """Region id of each joint variable ``[target_1..R, raw_1..R, lag_1..R, national]``."""
    r = np.arange(R)
    return np.concatenate([r, r, r, [R]])


@dataclass(frozen=True)
class BlpModel:
    mean_target: np.ndarray
    mean_features: np.ndarray
    weights: np.ndarray             # R x F; prediction = mu_y + B (f - mu_f)
    covariance: np.ndarray          # shrunk joint covariance, targets first
    shrinkage: float


def fit_blp(inputs: BoostInputs, truth, shrinkage: float = 0.2,
            min_eig: float = 1e-10) -> BlpModel:
    """Fit the BLP of regional truth (weeks x R, logit) given the features."""
    if not 0.0 <= shrinkage <= 1.0:
        raise ValueError("shrinkage must lie in [0, 1]")
    F = inputs.features()
    Y = np.asarray(truth, dtype=float)
    R = inputs.n_regions
    if Y.shape != (F.shape[0], R):
        raise ValueError("truth must be weeks x regions")
    if F.shape[0] < 2 * F.shape[1]:
        raise ValueError(f"need at least {2 * F.shape[1]} training weeks, got {F.shape[0]}")
    J = np.column_stack([Y, F])
    mu = J.mean(axis=0)
    S = np.cov(J, rowvar=False)
    ids = _block_ids(R)
    same = ids[:, None] == ids[None, :]
    S = (1.0 - shrinkage) * S + shrinkage * np.where(same, S, 0.0)
    Sff = S[R:, R:]
    Syf = S[:R, R:]
    eig = np.linalg.eigvalsh(Sff)
    if eig[0] <= min_eig * max(eig[-1], 1e-300):
        raise SingularCovarianceError(
            f"feature covariance is singular (min eigenvalue {eig[0]:.3g}); "
            "increase the shrinkage weight")
    B = np.linalg.solve(Sff, Syf.T).T
    return BlpModel(mu[:R], mu[R:], B, S, shrinkage)


def boost_predict(model: BlpModel, features) -> np.ndarray:
    f = np.asarray(features, dtype=float)
    return model.mean_target + (f - model.mean_features) @ model.weights.T


@dataclass(frozen=True)
class BoostRun:
    weeks: tuple[WeekStamp, ...]
    regions: tuple[str, ...]
    raw: np.ndarray         # logit, weeks x R
    boosted: np.ndarray     # logit, weeks x R
    skipped: tuple[tuple[WeekStamp, str], ...] = ()

    def region_run(self, r: int) -> dict[WeekStamp, float]:
        pct = inverse_logit_array(self.boosted[:, r])
        return dict(zip(self.weeks, pct))


def boost_rolling(inputs: BoostInputs, truth, span: Sequence[WeekStamp], window: int = 104,
                  shrinkage: float = 0.2) -> BoostRun:
    """Refit the BLP every week on the previous ``window`` weeks with known truth.

    ``truth`` is weeks x R on the logit scale aligned with ``inputs.weeks``;
    week ``T`` is predicted using only rows dated before ``T``.
    """
    Y = np.asarray(truth, dtype=float)
    pos = {w: i for i, w in enumerate(inputs.weeks)}
    out_w, raw, boosted, skipped = [], [], [], []
    for wk in span:
        i = pos.get(wk)
        if i is None:
            skipped.append((wk, "no boost inputs for this week"))
            continue
        lo = i - window
        rows = np.arange(max(lo, 0), i)
        rows = rows[~np.isnan(Y[rows]).any(axis=1)] if len(rows) else rows
        if lo < 0 or len(rows) < window:
            skipped.append((wk, f"need {window} training weeks"))
            continue
        model = fit_blp(inputs.rows(rows), Y[rows], shrinkage)
        out_w.append(wk)
        raw.append(inputs.raw_regional[i])
        boosted.append(boost_predict(model, inputs.features()[i]))
    R = inputs.n_regions
    return BoostRun(tuple(out_w), inputs.regions, np.array(raw).reshape(-1, R),
                    np.array(boosted).reshape(-1, R), tuple(skipped))


def assemble_inputs(raw_runs: Mapping[str, NowcastRun], national: NowcastRun,
                    regional_truth: Mapping[str, Mapping[WeekStamp, float]]
                    ) -> tuple[BoostInputs, np.ndarray]:
    """Line up raw regional runs, the national run and lagged truths.

    ``regional_truth`` maps region -> week -> %ILI.  Returns the inputs and the
    logit regional truth for the same weeks (NaN where not yet reported);
    weeks lacking any lagged truth are dropped.
    """
    regions = tuple(raw_runs)
    common = set(national.weeks)
    for r in regions:
        common &= set(raw_runs[r].weeks)
    weeks = tuple(sorted(common))
    nat = national.as_dict()
    raw = np.array([[raw_runs[r].predictions_logit[raw_runs[r].index(w)] for r in regions]
                    for w in weeks]).reshape(len(weeks), len(regions))
    lag = np.full((len(weeks), len(regions)), np.nan)
    tru = np.full((len(weeks), len(regions)), np.nan)
    for k, r in enumerate(regions):
        y = {w: v for w, v in regional_truth[r].items() if v is not None and not np.isnan(v)}
        for i, w in enumerate(weeks):
            prev = w.shift(-1)
            if prev in y:
                lag[i, k] = logit_array([y[prev]])[0]
            if w in y:
                tru[i, k] = logit_array([y[w]])[0]
    keep = ~np.isnan(lag).any(axis=1)
    idx = np.flatnonzero(keep)
    natv = logit_array([nat[w] for w in weeks]) if weeks else np.zeros(0)
    inputs = BoostInputs(tuple(weeks[i] for i in idx), raw[idx], natv[idx], lag[idx], regions)
    return inputs, tru[idx]


def write_boost_csv(path, run: BoostRun, truth: Mapping[str, Mapping[WeekStamp, float]] | None = None):
    """``date,region,raw,boosted,truth`` on the percent scale."""
    truth = truth or {}
    raw = inverse_logit_array(run.raw)
    bst = inverse_logit_array(run.boosted)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "region", "raw", "boosted", "truth"])
        for i, wk in enumerate(run.weeks):
            for k, r in enumerate(run.regions):
                t = truth.get(r, {}).get(wk)
                w.writerow([str(wk), r, repr(float(raw[i, k])), repr(float(bst[i, k])),
                            "" if t is None or np.isnan(t) else repr(float(t))])
