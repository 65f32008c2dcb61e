import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from argoc import sgl
from argoc.errors import DegenerateFoldError
from argoc.nowcast import write_model_csv
from argoc.timeseries import DesignWindow, WeekStamp, standardize_columns
from oracles import group_zero_by_grid, lasso_cd, ols_normal_equations, sgl_objective

W0 = WeekStamp(2010, 1)


def window(X, y, m=0):
    X = np.asarray(X, float)
    n = X.shape[0]
    return DesignWindow(W0.shift(n), np.asarray(y, float), X[:, :m], X[:, m:],
                        np.zeros(m), np.zeros(X.shape[1] - m),
                        tuple(W0.shift(i) for i in range(n)))


def random_instance(rng, n=50, p=10, noise=1.0):
    X = rng.normal(size=(n, p))
    beta = rng.normal(size=p)
    return X, 0.7 + X @ beta + noise * rng.normal(size=n)


# -- elementary pieces ---------------------------------------------------------

def test_soft_threshold_examples():
    assert sgl.soft_threshold(3.0, 1.0) == 2.0
    assert sgl.soft_threshold(-0.5, 1.0) == 0.0
    assert sgl.soft_threshold(0.0, 5.0) == 0.0
    assert sgl.soft_threshold(-3.0, 1.0) == -2.0
    with pytest.raises(ValueError):
        sgl.soft_threshold(1.0, -1.0)


def test_penalty_spec_validation():
    with pytest.raises(ValueError):
        sgl.PenaltySpec(1.5, 0.1, ((0,),))
    with pytest.raises(ValueError):
        sgl.PenaltySpec(0.5, -0.1, ((0,),))
    with pytest.raises(ValueError):
        sgl.PenaltySpec(0.5, 0.1, ((0, 2),))
    with pytest.raises(ValueError):
        sgl.PenaltySpec(0.5, float("inf"), ((0,),))
    pen = sgl.PenaltySpec(0.5, 0.1, ((1, 2), (0,)), m=2)
    assert pen.p == 3 and pen.group_sizes == (2, 1)


def test_objective_examples(rng):
    X, y = random_instance(rng, n=12, p=5)
    y = y - y.mean()
    W = window(X, y, m=1)
    pen = sgl.PenaltySpec(0.95, 0.3, ((0, 1), (2, 3)), m=1)
    assert sgl.objective(W, (0.0, np.zeros(1), np.zeros(4)), pen) == pytest.approx(
        (y @ y) / (2 * 12), abs=1e-15)
    coef = rng.normal(size=5)
    mu = 0.2
    r = y - mu - X @ coef
    assert sgl.objective(W, (mu, coef[:1], coef[1:]), pen.with_lambda(0.0)) == pytest.approx(
        r @ r / 24, abs=1e-14)
    for _ in range(20):
        coef = rng.normal(size=5)
        lam, a = rng.uniform(0, 2), rng.uniform(0, 1)
        pen = sgl.PenaltySpec(a, lam, ((0, 1), (2, 3)), m=1)
        got = sgl.objective(W, (mu, coef[:1], coef[1:]), pen)
        assert got == pytest.approx(sgl_objective(X, y, mu, coef, a, lam, pen.groups, 1),
                                    abs=1e-12)


def test_group_is_zero_trivial(rng):
    X, y = random_instance(rng, n=20, p=4)
    y = y - y.mean()
    X = X - X.mean(0)
    big = sgl.PenaltySpec(0.5, 1e6, ((0, 1), (2, 3)))
    assert all(sgl.group_is_zero(X, y, g, big) for g in big.groups)
    zero = big.with_lambda(0.0)
    assert not any(sgl.group_is_zero(X, y, g, zero) for g in zero.groups)


def test_group_is_zero_matches_grid(rng):
    agree = 0
    for _ in range(12):
        Xk = rng.normal(size=(6, 2))
        r = rng.normal(size=6)
        z = np.abs(Xk.T @ r / 6)
        a = float(rng.uniform(0.2, 0.95))
        # place lambda near the group-zero boundary so both outcomes occur
        lam = float(np.linalg.norm(z)) * rng.uniform(0.4, 1.6) / (a + (1 - a) * math.sqrt(2))
        pen = sgl.PenaltySpec(a, lam, ((0, 1),))
        assert sgl.group_is_zero(Xk, r, (0, 1), pen) == group_zero_by_grid(Xk, r, a, lam)
        agree += 1
    assert agree == 12


# -- fit --------------------------------------------------------------------------

def test_lambda_zero_matches_ols(rng):
    for _ in range(5):
        X, y = random_instance(rng)
        W = window(X, y, m=3)
        pen = sgl.PenaltySpec(0.95, 0.0, ((0, 1, 2), (3, 4), (5, 6)), m=3)
        model = sgl.fit(W, pen, tol=1e-12)
        b0, b = ols_normal_equations(X, y)
        assert model.converged
        assert np.max(np.abs(model.coef() - b)) < 1e-6
        assert abs(model.intercept - b0) < 1e-6


def test_alpha_one_matches_lasso_oracle(rng):
    X, y = random_instance(rng, n=60, p=12, noise=2.0)
    W = window(X, y, m=2)
    pen = sgl.PenaltySpec(1.0, 0.0, ((0, 1, 2), (3, 4, 5, 6), (7, 8, 9)), m=2)
    for lam in sgl.lambda_path(W, pen, 10, 1e-2):
        model = sgl.fit(W, pen.with_lambda(lam), tol=1e-12)
        _, ref = lasso_cd(X, y, lam)
        assert np.max(np.abs(model.coef() - ref)) < 1e-6
        las = sgl.fit_lasso(W, lam, tol=1e-12)
        assert np.max(np.abs(las.coef() - ref)) < 1e-6


def test_lambda_max_zeroes_everything(rng):
    X, y = random_instance(rng, n=40, p=8)
    W = window(X, y, m=2)
    for a in (0.0, 0.5, 0.95, 1.0):
        pen = sgl.PenaltySpec(a, 0.0, ((0, 1, 2), (3, 4), (5,)), m=2)
        lm = sgl.lambda_max(W, pen)
        model = sgl.fit(W, pen.with_lambda(lm))
        exo_zero = not np.any(model.exo_coef)
        assert exo_zero
        if a > 0:
            assert not np.any(model.ar_coef)
            assert model.intercept == pytest.approx(y.mean(), abs=1e-12)
        # slightly below lambda_max something enters
        below = sgl.fit(W, pen.with_lambda(0.95 * lm), tol=1e-10)
        assert np.any(below.coef())


def test_lambda_max_single_predictor_closed_form(rng):
    x = rng.normal(size=30)
    y = 2 * x + rng.normal(size=30)
    W = window(x[:, None], y)
    pen = sgl.PenaltySpec.singletons(1, alpha=1.0)
    xc, yc = x - x.mean(), y - y.mean()
    assert sgl.lambda_max(W, pen) == pytest.approx(abs(xc @ yc) / 30, rel=1e-9)


def test_lambda_path_shape(rng):
    X, y = random_instance(rng, n=30, p=4)
    W = window(X, y)
    path = sgl.lambda_path(W, sgl.PenaltySpec.singletons(4), 7, 1e-2)
    assert len(path) == 7 and np.all(np.diff(path) < 0)
    assert path[-1] == pytest.approx(1e-2 * path[0])
    with pytest.raises(ValueError):
        sgl.lambda_path(W, sgl.PenaltySpec.singletons(4), 1)


def test_objective_trace_monotone(rng):
    X, y = random_instance(rng, n=50, p=12, noise=0.5)
    X[:, 1] = X[:, 0] + 0.05 * rng.normal(size=50)      # correlated pair slows descent
    W = window(X, y, m=2)
    pen = sgl.PenaltySpec(0.5, 0.02, ((0, 1, 2), (3, 4, 5, 6), (7, 8, 9)), m=2)
    model = sgl.fit(W, pen, tol=1e-10, trace=True)
    tr = model.trace
    assert len(tr) == model.n_iterations >= 2
    assert np.all(np.diff(tr) <= 1e-13 * np.abs(tr[:-1]))
    recomputed = sgl.objective(W, (model.intercept, model.ar_coef, model.exo_coef), pen)
    assert model.objective_value == pytest.approx(recomputed, abs=1e-8)


def test_max_iter_flags_nonconvergence(rng):
    X, y = random_instance(rng, n=50, p=10)
    W = window(X, y)
    pen = sgl.PenaltySpec(0.5, 1e-3, ((0, 1, 2, 3, 4), (5, 6, 7, 8, 9)))
    model = sgl.fit(W, pen, tol=1e-14, max_iter=1)
    assert not model.converged and model.n_iterations == 1


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 0.5))
def test_group_lasso_single_group_all_or_nothing(seed, frac):
    rng = np.random.default_rng(seed)
    X, y = random_instance(rng, n=30, p=4)
    W = window(X, y)
    pen = sgl.PenaltySpec(0.0, 0.0, ((0, 1, 2, 3),))
    lam = frac * sgl.lambda_max(W, pen) * 2
    model = sgl.fit(W, pen.with_lambda(lam), tol=1e-10)
    nz = np.count_nonzero(model.exo_coef)
    assert nz in (0, 4)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.lists(st.floats(0.01, 100), min_size=6, max_size=6),
       st.lists(st.floats(-50, 50), min_size=6, max_size=6))
def test_standardized_fit_invariant_to_column_scaling(seed, scale, shift):
    rng = np.random.default_rng(seed)
    X, y = random_instance(rng, n=40, p=6)
    W1, *_ = standardize_columns(window(X, y, m=1))
    W2, *_ = standardize_columns(window(X * scale + shift, y, m=1))
    pen = sgl.PenaltySpec(0.95, 0.05, ((0, 1), (2, 3, 4)), m=1)
    a = sgl.fit(W1, pen, tol=1e-12)
    b = sgl.fit(W2, pen, tol=1e-12)
    assert np.allclose(a.coef(), b.coef(), atol=1e-7)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.one_of(st.just(0.0), st.floats(1e-3, 1.0)),
       st.floats(0.01, 1.0))
def test_fit_satisfies_kkt(seed, alpha, frac):
    # the autouse fixture certifies KKT on every converged fit
    rng = np.random.default_rng(seed)
    X, y = random_instance(rng, n=30, p=8, noise=1.0)
    W = window(X, y, m=2)
    pen = sgl.PenaltySpec(alpha, 0.0, ((0, 1), (2, 3, 4), (5,)), m=2)
    lam = frac * max(sgl.lambda_max(W, pen), 1e-8)
    model = sgl.fit(W, pen.with_lambda(lam), tol=1e-9)
    assert model.converged


def test_group_exclusion_along_path(rng):
    n = 120
    X = rng.normal(size=(n, 6))
    y = 3 * X[:, 0] + 0.2 * X[:, 1] + rng.normal(size=n)
    W = window(X, y)
    pen = sgl.PenaltySpec(0.95, 0.0, ((0, 1, 2), (3, 4, 5)))
    models = sgl.fit_path(W, pen, sgl.lambda_path(W, pen, 30, 1e-3), tol=1e-10)
    found = False
    for mdl in models:
        g0, g1 = mdl.group_coef(0), mdl.group_coef(1)
        if not np.any(g1) and np.any(g0) and not np.all(g0):
            found = True
    assert found


def test_warm_start_reaches_same_solution(rng):
    X, y = random_instance(rng, n=50, p=9)
    W = window(X, y, m=1)
    pen = sgl.PenaltySpec(0.9, 0.05, ((0, 1, 2, 3), (4, 5, 6, 7)), m=1)
    cold = sgl.fit(W, pen, tol=1e-12)
    warm = sgl.fit(W, pen, tol=1e-12, warm_start=rng.normal(size=9))
    assert np.allclose(cold.coef(), warm.coef(), atol=1e-8)


def test_dimension_mismatch_rejected(rng):
    X, y = random_instance(rng, n=20, p=4)
    with pytest.raises(ValueError):
        sgl.fit(window(X, y), sgl.PenaltySpec.singletons(3))
    with pytest.raises(ValueError):
        sgl.lambda_max(window(X, y, m=1), sgl.PenaltySpec(5e-324, 0.0, ((0, 1, 2),), m=1))


# -- cross-validation ----------------------------------------------------------------

def test_contiguous_folds():
    parts = sgl.contiguous_folds(10, 3)
    assert [list(p) for p in parts] == [[0, 1, 2, 3], [4, 5, 6], [7, 8, 9]]
    with pytest.raises(DegenerateFoldError):
        sgl.contiguous_folds(3, 4)
    with pytest.raises(ValueError):
        sgl.contiguous_folds(10, 1)


def test_leave_one_out_matches_bruteforce(rng):
    X, y = random_instance(rng, n=10, p=3)
    W = window(X, y, m=1)
    pen = sgl.PenaltySpec(0.95, 0.0, ((0, 1),), m=1)
    path = sgl.lambda_path(W, pen, 8, 1e-2)
    cv = sgl.cross_validate(W, pen, folds=10, path=path, tol=1e-13, max_iter=100_000)
    Z = W.design()
    for i in range(10):
        keep = np.delete(np.arange(10), i)
        for li, lam in enumerate(path):
            mdl = sgl.fit(W.rows(keep), pen.with_lambda(lam), tol=1e-13, max_iter=100_000)
            err = (y[i] - mdl.intercept - Z[i] @ mdl.coef()) ** 2
            assert cv.fold_errors[i, li] == pytest.approx(err, abs=1e-10)
    assert cv.best_lambda == path[int(np.argmin(cv.fold_errors.mean(0)))]


def test_cv_lasso_solver_matches_alpha_one(rng):
    X, y = random_instance(rng, n=40, p=6, noise=2.0)
    W = window(X, y)
    pen = sgl.PenaltySpec.singletons(6, alpha=1.0)
    a = sgl.cross_validate(W, pen, folds=5, solver="sgl")
    b = sgl.cross_validate(W, pen, folds=5, solver="lasso")
    # different kernels, same problem: agreement at solver tolerance
    assert np.allclose(a.mean_error, b.mean_error, rtol=0, atol=1e-6)
    assert a.best_index == b.best_index


def _noise_selection_hits(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(50, 10))
    y = rng.normal(size=50)
    W = window(X, y)
    pen = sgl.PenaltySpec(0.95, 0.0, ((0, 1, 2, 3, 4), (5, 6, 7, 8, 9)))
    return sgl.cross_validate(W, pen, folds=10).best_index <= 1


def test_cv_pure_noise_selects_near_lambda_max():
    # target: >= 80% of replications within one grid step of lambda_max
    hits = sum(_noise_selection_hits(s) for s in range(100))
    assert hits >= 80, f"{hits}/100 replications within one step of lambda_max"


def test_cv_strong_signal_selects_lower_half(rng):
    for _ in range(5):
        X = rng.normal(size=(50, 10))
        y = X @ rng.normal(size=10)
        W = window(X, y)
        pen = sgl.PenaltySpec(0.95, 0.0, ((0, 1, 2, 3, 4), (5, 6, 7, 8, 9)))
        cv = sgl.cross_validate(W, pen, folds=10)
        assert cv.best_index >= len(cv.lambdas) // 2
        assert cv.mean_error.shape == cv.std_error.shape == (50,)


# -- output ----------------------------------------------------------------------------

def test_model_csv_back_maps_coefficients(tmp_path, rng):
    X, y = random_instance(rng, n=40, p=3)
    raw = window(X, y, m=1)
    S, centers, scales = standardize_columns(raw)
    pen = sgl.PenaltySpec(0.95, 0.0, ((0, 1),), m=1)
    model = sgl.fit(S, pen, tol=1e-12)
    write_model_csv(tmp_path / "m.csv", model, ["a", "b"], centers, scales)
    rows = dict(line.split(",") for line in (tmp_path / "m.csv").read_text().splitlines()[1:])
    assert list(rows) == ["intercept", "ar_1", "a", "b", "lambda", "alpha", "converged", "objective"]
    b0, b = ols_normal_equations(X, y)
    assert float(rows["intercept"]) == pytest.approx(b0, abs=1e-8)
    assert [float(rows[k]) for k in ("ar_1", "a", "b")] == pytest.approx(b, abs=1e-8)
    assert rows["converged"] == "1"
