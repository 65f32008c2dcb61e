"""Sparse group lasso with an unpenalized intercept and an L1-only AR block.

Minimizes, over intercept ``mu``, AR coefficients ``gamma`` and grouped
exogenous coefficients ``beta``::

    1/(2N) ||y - mu - A gamma - X beta||^2
        + alpha * lam * (||gamma||_1 + ||beta||_1)
        + (1 - alpha) * lam * sum_k sqrt(p_k) ||beta_k||_2

The intercept is profiled out by centering, the rest is solved by block
coordinate descent in Gram form: closed-form soft-threshold updates for AR
coordinates and single-term groups, a group-zero screen followed by
accelerated proximal gradient (with backtracking) for larger groups.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from numba import njit
from scipy.optimize import brentq

from .errors import DegenerateFoldError
from .timeseries import DesignWindow

DEFAULT_ALPHA = 0.95
DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 10_000


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty weights and structure.

    ``groups`` partition the exogenous columns ``0..p-1``; the first ``m``
    design columns (AR lags) get the L1 term only.
    """

    alpha: float
    lam: float
    groups: tuple[tuple[int, ...], ...]
    m: int = 0

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(tuple(int(i) for i in g) for g in self.groups))
        if not (0.0 <= self.alpha <= 1.0) or not math.isfinite(self.alpha):
            raise ValueError("alpha must lie in [0, 1]")
        if not (self.lam >= 0.0 and math.isfinite(self.lam)):
            raise ValueError("lambda must be finite and nonnegative")
        if self.m < 0:
            raise ValueError("m must be nonnegative")
        flat = sorted(i for g in self.groups for i in g)
        if any(len(g) == 0 for g in self.groups):
            raise ValueError("groups must be nonempty")
        if flat != list(range(len(flat))):
            raise ValueError("groups must partition the exogenous columns 0..p-1")

    @property
    def p(self) -> int:
        return sum(len(g) for g in self.groups)

    @property
    def group_sizes(self) -> tuple[int, ...]:
        return tuple(len(g) for g in self.groups)

    def with_lambda(self, lam: float) -> "PenaltySpec":
        return replace(self, lam=float(lam))

    @classmethod
    def singletons(cls, p: int, m: int = 0, alpha: float = 1.0, lam: float = 0.0):
        return cls(alpha, lam, tuple((j,) for j in range(p)), m)


@dataclass(frozen=True)
class SglModel:
    intercept: float
    ar_coef: np.ndarray
    exo_coef: np.ndarray
    penalty: PenaltySpec
    objective_value: float
    n_iterations: int
    converged: bool
    trace: np.ndarray | None = field(default=None, repr=False)

    def group_coef(self, k: int) -> np.ndarray:
        return self.exo_coef[list(self.penalty.groups[k])]

    def coef(self) -> np.ndarray:
        return np.concatenate([self.ar_coef, self.exo_coef])

    def predict(self, ar_terms, exo_terms) -> float:
        return float(self.intercept + np.dot(self.ar_coef, ar_terms)
                     + np.dot(self.exo_coef, exo_terms))

    def predict_rows(self, window: DesignWindow) -> np.ndarray:
        return self.intercept + window.design() @ self.coef()


# --------------------------------------------------------------------------
# elementary pieces

def soft_threshold(z, t):
    if np.any(np.asarray(t) < 0):
        raise ValueError("threshold must be nonnegative")
    out = np.sign(z) * np.maximum(np.abs(z) - t, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def penalty_value(ar_coef, exo_coef, penalty: PenaltySpec) -> float:
    a, lam = penalty.alpha, penalty.lam
    l1 = np.abs(ar_coef).sum() + np.abs(exo_coef).sum()
    grp = sum(math.sqrt(len(g)) * np.linalg.norm(exo_coef[list(g)]) for g in penalty.groups)
    return float(a * lam * l1 + (1.0 - a) * lam * grp)


def objective(window: DesignWindow, coefs, penalty: PenaltySpec) -> float:
    """Penalized loss at ``coefs = (intercept, ar_coef, exo_coef)``."""
    mu, gamma, beta = coefs
    gamma = np.asarray(gamma, dtype=float)
    beta = np.asarray(beta, dtype=float)
    r = window.response - mu - window.ar_block @ gamma - window.exo_block @ beta
    return float(r @ r / (2.0 * window.n)) + penalty_value(gamma, beta, penalty)


def group_is_zero(exo_block, residual, group, penalty: PenaltySpec) -> bool:
    """Whether group ``group`` is zero at a stationary point.

    ``residual`` must exclude the group's own contribution.
    """
    Xk = np.asarray(exo_block)[:, list(group)]
    z = Xk.T @ np.asarray(residual) / Xk.shape[0]
    a, lam = penalty.alpha, penalty.lam
    s = np.sign(z) * np.maximum(np.abs(z) - a * lam, 0.0)
    return bool(np.linalg.norm(s) <= (1.0 - a) * lam * math.sqrt(len(group)))


# --------------------------------------------------------------------------
# numba kernels (Gram form, centered data, permuted so groups are contiguous)

@njit(cache=True)
def _soft(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@njit(cache=True)
def _gram_objective(G, c, yy, beta, starts, sizes, kinds, alpha, lam):
    q = beta.shape[0]
    quad = 0.0
    for i in range(q):
        acc = 0.0
        for j in range(q):
            acc += G[i, j] * beta[j]
        quad += beta[i] * acc
    lin = 0.0
    l1 = 0.0
    for i in range(q):
        lin += c[i] * beta[i]
        l1 += abs(beta[i])
    grp = 0.0
    for k in range(starts.shape[0]):
        if kinds[k] == 1:
            s2 = 0.0
            for j in range(starts[k], starts[k] + sizes[k]):
                s2 += beta[j] * beta[j]
            grp += math.sqrt(sizes[k]) * math.sqrt(s2)
    return 0.5 * (yy - 2.0 * lin + quad) + alpha * lam * l1 + (1.0 - alpha) * lam * grp


@njit(cache=True)
def _block_change(Gkk, z, b0, b1, a1, a2):
    """Block objective at ``b1`` minus that at ``b0``, formed from ``d = b1 - b0``
    so the difference keeps relative accuracy when ``d`` is tiny."""
    n = b0.shape[0]
    smooth = 0.0
    l1 = 0.0
    ds = 0.0
    s0 = 0.0
    s1 = 0.0
    for i in range(n):
        d = b1[i] - b0[i]
        acc = 0.0
        for j in range(n):
            acc += Gkk[i, j] * (b0[j] + 0.5 * (b1[j] - b0[j]))
        smooth += d * (acc - z[i])
        if b0[i] > 0.0 and b1[i] > 0.0:
            l1 += d
        elif b0[i] < 0.0 and b1[i] < 0.0:
            l1 -= d
        else:
            l1 += abs(b1[i]) - abs(b0[i])
        ds += d * (b0[i] + b1[i])
        s0 += b0[i] * b0[i]
        s1 += b1[i] * b1[i]
    den = math.sqrt(s0) + math.sqrt(s1)
    grp = ds / den if den > 0.0 else 0.0
    return smooth + a1 * l1 + a2 * grp


@njit(cache=True)
def _prox(u, t, a1, a2, out):
    n = u.shape[0]
    nrm = 0.0
    for i in range(n):
        out[i] = _soft(u[i], t * a1)
        nrm += out[i] * out[i]
    nrm = math.sqrt(nrm)
    if nrm <= t * a2:
        for i in range(n):
            out[i] = 0.0
    else:
        f = 1.0 - t * a2 / nrm
        for i in range(n):
            out[i] *= f


@njit(cache=True)
def _group_update(Gkk, z, b0, a1, a2, L, inner_tol, max_inner):
    """Minimize 1/2 b'Gb - z'b + a1|b|_1 + a2|b|_2 by restarted FISTA."""
    n = b0.shape[0]
    x = b0.copy()
    y = b0.copy()
    xn = np.empty(n)
    grad = np.empty(n)
    u = np.empty(n)
    tk = 1.0
    step = 1.0 / L if L > 0 else 1.0
    for _ in range(max_inner):
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += Gkk[i, j] * y[j]
            grad[i] = acc - z[i]
        while True:
            for i in range(n):
                u[i] = y[i] - step * grad[i]
            _prox(u, step, a1, a2, xn)
            # quadratic loss: majorization holds iff d'Gd <= |d|^2 / step
            dgd = 0.0
            dd = 0.0
            for i in range(n):
                di = xn[i] - y[i]
                acc = 0.0
                for j in range(n):
                    acc += Gkk[i, j] * (xn[j] - y[j])
                dgd += di * acc
                dd += di * di
            if dgd <= dd / step * (1.0 + 1e-12) or dd == 0.0:
                break
            step *= 0.5
        delta = 0.0
        restart = 0.0
        for i in range(n):
            d = xn[i] - x[i]
            if abs(d) > delta:
                delta = abs(d)
            restart += (y[i] - xn[i]) * d
        tn = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * tk * tk))
        if restart > 0.0:
            tn = 1.0
            for i in range(n):
                y[i] = xn[i]
        else:
            mom = (tk - 1.0) / tn
            for i in range(n):
                y[i] = xn[i] + mom * (xn[i] - x[i])
        for i in range(n):
            x[i] = xn[i]
        tk = tn
        if delta < inner_tol:
            break
    if _block_change(Gkk, z, b0, x, a1, a2) > 0.0:
        return b0.copy()
    return x

_ANDERSON_K = 5


@njit(cache=True)
def _anderson_step(G, c, yy, beta, Gb, hist, nh, starts, sizes, kinds, alpha, lam):
    """Record ``beta``; every K+1 cycles try an Anderson extrapolation of the
    stored iterates and keep it only if it lowers the objective."""
    K = hist.shape[0] - 1
    q = beta.shape[0]
    hist[nh % (K + 1)] = beta
    nh += 1
    if nh % (K + 1) != 0:
        return nh
    U = np.empty((K, q))
    for i in range(K):
        U[i] = hist[i + 1] - hist[i]
    C = U @ U.T
    tr = 0.0
    for i in range(K):
        tr += C[i, i]
    if tr <= 0.0:
        return nh
    for i in range(K):
        C[i, i] += 1e-10 * tr
    z = np.linalg.solve(C, np.ones(K))
    sz = z.sum()
    if not np.isfinite(sz) or abs(sz) < 1e-300:
        return nh
    cand = np.zeros(q)
    for i in range(K):
        cand += (z[i] / sz) * hist[i + 1]
    f_new = _gram_objective(G, c, yy, cand, starts, sizes, kinds, alpha, lam)
    f_old = _gram_objective(G, c, yy, beta, starts, sizes, kinds, alpha, lam)
    if f_new < f_old:
        for j in range(q):
            beta[j] = cand[j]
        Gb[:] = G @ beta
    return nh


@njit(cache=True)
def _bcd(G, c, yy, beta, starts, sizes, kinds, Ls, alpha, lam, tol, max_iter,
         inner_tol, max_inner, trace):
    q = beta.shape[0]
    Gb = np.zeros(q)
    for i in range(q):
        acc = 0.0
        for j in range(q):
            acc += G[i, j] * beta[j]
        Gb[i] = acc
    nb = starts.shape[0]
    hist = np.zeros((_ANDERSON_K + 1, q))
    nh = 0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        max_delta = 0.0
        for k in range(nb):
            s = starts[k]
            sz = sizes[k]
            if sz == 1:
                j = s
                gjj = G[j, j]
                new = 0.0
                if gjj > 0.0:
                    z = c[j] - Gb[j] + gjj * beta[j]
                    if kinds[k] == 0:
                        thr = alpha * lam
                    else:
                        thr = alpha * lam + (1.0 - alpha) * lam
                    new = _soft(z, thr) / gjj
                d = new - beta[j]
                if d != 0.0:
                    for i in range(q):
                        Gb[i] += G[i, j] * d
                    beta[j] = new
                    if abs(d) > max_delta:
                        max_delta = abs(d)
                continue
            z = np.empty(sz)
            for a in range(sz):
                acc = c[s + a] - Gb[s + a]
                for b in range(sz):
                    acc += G[s + a, s + b] * beta[s + b]
                z[a] = acc
            a1 = alpha * lam
            a2 = (1.0 - alpha) * lam * math.sqrt(sz)
            nrm = 0.0
            for a in range(sz):
                v = _soft(z[a], a1)
                nrm += v * v
            if math.sqrt(nrm) <= a2:
                new = np.zeros(sz)
            else:
                Gkk = G[s:s + sz, s:s + sz].copy()
                new = _group_update(Gkk, z, beta[s:s + sz].copy(), a1, a2, Ls[k],
                                    inner_tol, max_inner)
            for a in range(sz):
                d = new[a] - beta[s + a]
                if d != 0.0:
                    for i in range(q):
                        Gb[i] += G[i, s + a] * d
                    beta[s + a] = new[a]
                    if abs(d) > max_delta:
                        max_delta = abs(d)
        if max_delta < tol:
            converged = True
        else:
            nh = _anderson_step(G, c, yy, beta, Gb, hist, nh, starts, sizes, kinds, alpha, lam)
        if trace.shape[0] > 0 and it <= trace.shape[0]:
            trace[it - 1] = _gram_objective(G, c, yy, beta, starts, sizes, kinds, alpha, lam)
        if converged:
            break
    return it, converged


@njit(cache=True)
def _lasso_cd(G, c, beta, lam, tol, max_iter):
    """Plain covariance-update coordinate descent for the lasso."""
    q = beta.shape[0]
    Gb = G @ beta
    starts = np.arange(q)
    ones = np.ones(q, dtype=np.int64)
    kinds = np.zeros(q, dtype=np.int64)
    yy = 0.0
    hist = np.zeros((_ANDERSON_K + 1, q))
    nh = 0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        max_delta = 0.0
        for j in range(q):
            gjj = G[j, j]
            new = 0.0
            if gjj > 0.0:
                new = _soft(c[j] - Gb[j] + gjj * beta[j], lam) / gjj
            d = new - beta[j]
            if d != 0.0:
                for i in range(q):
                    Gb[i] += G[i, j] * d
                beta[j] = new
                if abs(d) > max_delta:
                    max_delta = abs(d)
        if max_delta < tol:
            converged = True
            break
        nh = _anderson_step(G, c, yy, beta, Gb, hist, nh, starts, ones, kinds, 1.0, lam)
    return it, converged


# --------------------------------------------------------------------------
# problem setup

@dataclass
class _Gram:
    G: np.ndarray
    c: np.ndarray
    yy: float
    zbar: np.ndarray
    ybar: float
    n: int


def _gram(Z: np.ndarray, y: np.ndarray) -> _Gram:
    n = Z.shape[0]
    zbar = Z.mean(axis=0)
    ybar = float(y.mean())
    Zc = Z - zbar
    yc = y - ybar
    return _Gram(Zc.T @ Zc / n, Zc.T @ yc / n, float(yc @ yc / n), zbar, ybar, n)


@dataclass(frozen=True)
class _Layout:
    perm: np.ndarray        # permuted position -> design column
    starts: np.ndarray
    sizes: np.ndarray
    kinds: np.ndarray       # 0 = AR coordinate, 1 = exo group


def _layout(penalty: PenaltySpec) -> _Layout:
    m = penalty.m
    perm = list(range(m))
    starts, sizes, kinds = [], [], []
    for j in range(m):
        starts.append(j)
        sizes.append(1)
        kinds.append(0)
    for g in penalty.groups:
        starts.append(len(perm))
        sizes.append(len(g))
        kinds.append(1)
        perm.extend(m + i for i in g)
    return _Layout(np.array(perm, dtype=np.int64), np.array(starts, dtype=np.int64),
                   np.array(sizes, dtype=np.int64), np.array(kinds, dtype=np.int64))


def _group_lipschitz(G: np.ndarray, lay: _Layout) -> np.ndarray:
    Ls = np.zeros(len(lay.starts))
    for k, (s, sz) in enumerate(zip(lay.starts, lay.sizes)):
        if sz > 1:
            Ls[k] = float(np.linalg.eigvalsh(G[s:s + sz, s:s + sz])[-1])
    return Ls


def _solve_sgl(gram: _Gram, penalty: PenaltySpec, beta0=None, tol=DEFAULT_TOL,
               max_iter=DEFAULT_MAX_ITER, trace_len=0, lay=None, Gp=None, Ls=None):
    """Penalized coefficients (design-column order) for a centered Gram problem."""
    lay = lay or _layout(penalty)
    if Gp is None:
        Gp = np.ascontiguousarray(gram.G[np.ix_(lay.perm, lay.perm)])
    cp = np.ascontiguousarray(gram.c[lay.perm])
    if Ls is None:
        Ls = _group_lipschitz(Gp, lay)
    q = len(lay.perm)
    beta = np.zeros(q) if beta0 is None else np.asarray(beta0, dtype=float)[lay.perm].copy()
    trace = np.full(trace_len, np.nan)
    it, conv = _bcd(Gp, cp, gram.yy, beta, lay.starts, lay.sizes, lay.kinds, Ls,
                    float(penalty.alpha), float(penalty.lam), float(tol), int(max_iter),
                    float(tol) / 10.0, 100_000, trace)
    out = np.empty(q)
    out[lay.perm] = beta
    return out, int(it), bool(conv), trace[: min(it, trace_len)]


def _model(window: DesignWindow, penalty, gram: _Gram, coef, it, conv, trace=None):
    m = window.m
    intercept = gram.ybar - float(gram.zbar @ coef)
    ar, exo = coef[:m].copy(), coef[m:].copy()
    obj = objective(window, (intercept, ar, exo), penalty)
    return SglModel(intercept, ar, exo, penalty, obj, it, conv, trace)


def _check_dims(window: DesignWindow, penalty: PenaltySpec):
    if penalty.m != window.m or penalty.p != window.p:
        raise ValueError(f"penalty expects m={penalty.m}, p={penalty.p}; "
                         f"window has m={window.m}, p={window.p}")


def fit(window: DesignWindow, penalty: PenaltySpec, tol: float = DEFAULT_TOL,
        max_iter: int = DEFAULT_MAX_ITER, warm_start=None, trace: bool = False) -> SglModel:
    """Fit the sparse group lasso on ``window``.

    Hitting ``max_iter`` sets ``converged=False`` rather than raising.  With
    ``trace=True`` the objective after every outer cycle is kept on the model.
    """
    _check_dims(window, penalty)
    if tol <= 0:
        raise ValueError("tol must be positive")
    gram = _gram(window.design(), window.response)
    coef, it, conv, tr = _solve_sgl(gram, penalty, warm_start, tol, max_iter,
                                    trace_len=max_iter if trace else 0)
    return _model(window, penalty, gram, coef, it, conv, tr if trace else None)


def fit_lasso(window: DesignWindow, lam: float, tol: float = DEFAULT_TOL,
              max_iter: int = DEFAULT_MAX_ITER, warm_start=None) -> SglModel:
    """Plain lasso, ``lam * (||gamma||_1 + ||beta||_1)``, by coordinate descent."""
    penalty = PenaltySpec.singletons(window.p, window.m, alpha=1.0, lam=lam)
    gram = _gram(window.design(), window.response)
    beta = np.zeros(gram.c.shape[0]) if warm_start is None else np.array(warm_start, dtype=float)
    it, conv = _lasso_cd(gram.G, gram.c, beta, float(lam), float(tol), int(max_iter))
    return _model(window, penalty, gram, beta, int(it), bool(conv))


# --------------------------------------------------------------------------
# lambda path

def _group_zero_lambda(ck: np.ndarray, alpha: float) -> float:
    """Smallest lam with ||S(ck, alpha lam)||_2 <= (1-alpha) lam sqrt(p_k)."""
    amax = float(np.max(np.abs(ck))) if ck.size else 0.0
    if amax == 0.0:
        return 0.0
    w = math.sqrt(ck.size)
    if alpha == 0.0:
        return float(np.linalg.norm(ck)) / w
    if alpha == 1.0 or ck.size == 1:
        return amax if ck.size == 1 else amax / alpha

    def h(lam):
        return np.linalg.norm(np.maximum(np.abs(ck) - alpha * lam, 0.0)) - (1 - alpha) * lam * w

    # at either bound h <= 0: all entries thresholded, or the L2 term dominates
    hi = min(amax / alpha, float(np.linalg.norm(ck)) / ((1 - alpha) * w))
    if h(hi) > 0.0:
        return hi
    return brentq(h, 0.0, hi, xtol=1e-15 * hi, rtol=4 * np.finfo(float).eps, maxiter=500)


def lambda_max(window: DesignWindow, penalty: PenaltySpec) -> float:
    """Smallest lambda at which every penalized coefficient is zero.

    AR coordinates are unpenalized when ``alpha == 0``; the group conditions
    are then taken at the least-squares fit on the lags.
    """
    _check_dims(window, penalty)
    gram = _gram(window.design(), window.response)
    return _lambda_max_gram(gram, penalty)


def _lambda_max_gram(gram: _Gram, penalty: PenaltySpec) -> float:
    m, a = penalty.m, penalty.alpha
    c = gram.c
    lm = 0.0
    if m and a > 0:
        lm = float(np.max(np.abs(c[:m]))) / a
    elif m:
        # unpenalized lags: groups see the residual after least squares on the lags
        G = gram.G
        gamma = np.linalg.lstsq(G[:m, :m], c[:m], rcond=None)[0]
        c = c.copy()
        c[m:] -= G[m:, :m] @ gamma
    for g in penalty.groups:
        lm = max(lm, _group_zero_lambda(c[m + np.array(g)], a))
    if not math.isfinite(lm):
        raise ValueError("lambda_max overflows; alpha is too small to zero the AR block")
    # nudge so the zero conditions hold despite rounding at the boundary
    return lm * (1.0 + 1e-10)


def lambda_path(window: DesignWindow, penalty: PenaltySpec, n_lambda: int = 50,
                ratio: float = 1e-3) -> np.ndarray:
    if n_lambda < 2 or not 0.0 < ratio < 1.0:
        raise ValueError("need n_lambda >= 2 and 0 < ratio < 1")
    lm = lambda_max(window, penalty)
    if lm == 0.0:
        lm = 1e-12
    return np.geomspace(lm, ratio * lm, n_lambda)


# --------------------------------------------------------------------------
# cross-validation

@dataclass(frozen=True)
class CVResult:
    best_lambda: float
    best_index: int
    lambdas: np.ndarray
    mean_error: np.ndarray
    std_error: np.ndarray
    fold_errors: np.ndarray   # folds x lambdas, mean held-out squared error


def contiguous_folds(n: int, folds: int) -> list[np.ndarray]:
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if folds > n:
        raise DegenerateFoldError(f"{folds} folds for {n} rows")
    parts = np.array_split(np.arange(n), folds)
    for part in parts:
        if n - len(part) < 2:
            raise DegenerateFoldError("every training split needs at least 2 rows")
    return parts


def cross_validate(window: DesignWindow, penalty: PenaltySpec, folds: int = 10,
                   path=None, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                   solver: str = "sgl") -> CVResult:
    """Contiguous-block K-fold CV over a decreasing lambda path.

    Each fold is fit along the path with warm starts.  The selected lambda
    minimizes the pooled held-out mean squared error (ties go to the larger
    lambda).  ``solver="lasso"`` uses :func:`fit_lasso` semantics.
    """
    _check_dims(window, penalty)
    lambdas = np.asarray(path if path is not None else lambda_path(window, penalty), dtype=float)
    parts = contiguous_folds(window.n, folds)
    Z, y = window.design(), window.response
    sq = np.zeros((len(parts), len(lambdas)))
    sizes = np.array([len(p) for p in parts], dtype=float)
    for f, test in enumerate(parts):
        train = np.setdiff1d(np.arange(window.n), test)
        gram = _gram(Z[train], y[train])
        Zt, yt = Z[test], y[test]
        for li, lam, coef in _path_solutions(gram, penalty, lambdas, tol, max_iter, solver):
            pred = gram.ybar + (Zt - gram.zbar) @ coef
            sq[f, li] = float(np.mean((yt - pred) ** 2))
    mean = (sizes @ sq) / sizes.sum()
    se = sq.std(axis=0, ddof=1) / math.sqrt(len(parts))
    best = int(np.argmin(mean))
    return CVResult(float(lambdas[best]), best, lambdas, mean, se, sq)


def _path_solutions(gram: _Gram, penalty: PenaltySpec, lambdas, tol, max_iter, solver):
    q = gram.c.shape[0]
    coef = np.zeros(q)
    if solver == "lasso":
        for li, lam in enumerate(lambdas):
            _lasso_cd(gram.G, gram.c, coef, float(lam), float(tol), int(max_iter))
            yield li, lam, coef.copy()
        return
    lay = _layout(penalty)
    Gp = np.ascontiguousarray(gram.G[np.ix_(lay.perm, lay.perm)])
    Ls = _group_lipschitz(Gp, lay)
    for li, lam in enumerate(lambdas):
        coef, *_ = _solve_sgl(gram, penalty.with_lambda(lam), coef, tol, max_iter,
                              lay=lay, Gp=Gp, Ls=Ls)
        yield li, lam, coef


def fit_path(window: DesignWindow, penalty: PenaltySpec, lambdas, tol=DEFAULT_TOL,
             max_iter=DEFAULT_MAX_ITER) -> list[SglModel]:
    """Warm-started fits along ``lambdas`` (in the given order)."""
    _check_dims(window, penalty)
    gram = _gram(window.design(), window.response)
    models, coef = [], None
    lay = _layout(penalty)
    Gp = np.ascontiguousarray(gram.G[np.ix_(lay.perm, lay.perm)])
    Ls = _group_lipschitz(Gp, lay)
    for lam in lambdas:
        pen = penalty.with_lambda(lam)
        coef, it, conv, _ = _solve_sgl(gram, pen, coef, tol, max_iter, lay=lay, Gp=Gp, Ls=Ls)
        models.append(_model(window, pen, gram, coef, it, conv))
    return models


# --------------------------------------------------------------------------
# optimality certificate

@dataclass(frozen=True)
class KKTReport:
    max_residual: float          # worst subgradient violation over coordinates
    intercept_residual: float
    zero_groups_ok: bool
    group_violation: float

    def ok(self, tol: float = 1e-4) -> bool:
        return (self.max_residual <= tol and self.intercept_residual <= tol
                and self.group_violation <= tol)


def kkt_check(window: DesignWindow, model: SglModel) -> KKTReport:
    pen = model.penalty
    a, lam, m = pen.alpha, pen.lam, pen.m
    r = window.response - model.predict_rows(window)
    g = -(window.design().T @ r) / window.n
    worst = 0.0
    for j in range(m):
        gj, bj = g[j], model.ar_coef[j]
        v = abs(gj + a * lam * np.sign(bj)) if bj != 0 else max(abs(gj) - a * lam, 0.0)
        worst = max(worst, v)
    gviol = 0.0
    for grp in pen.groups:
        idx = np.array(grp)
        b = model.exo_coef[idx]
        gk = g[m + idx]
        w = math.sqrt(len(grp))
        nb = np.linalg.norm(b)
        if nb == 0:
            s = np.maximum(np.abs(gk) - a * lam, 0.0)
            gviol = max(gviol, float(np.linalg.norm(s)) - (1 - a) * lam * w)
            continue
        for gj, bj in zip(gk, b):
            if bj != 0:
                v = abs(gj + a * lam * np.sign(bj) + (1 - a) * lam * w * bj / nb)
            else:
                v = max(abs(gj) - a * lam, 0.0)
            worst = max(worst, v)
    return KKTReport(float(worst), float(abs(r.mean())), gviol <= 1e-4, max(gviol, 0.0))
