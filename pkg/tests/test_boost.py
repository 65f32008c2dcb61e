import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from argoc.boost import (BoostInputs, assemble_inputs, boost_predict, boost_rolling, fit_blp,
                         write_boost_csv)
from argoc.errors import SingularCovarianceError
from argoc.nowcast import MethodSpec, NowcastRun
from argoc.synth import make_multires
from argoc.timeseries import WeekStamp, inverse_logit, logit
from oracles import blp_weights

START = WeekStamp(2012, 1)


def inputs_from(truth, raw, national, lag):
    weeks = tuple(START.shift(i) for i in range(len(truth)))
    return BoostInputs(weeks, raw, national, lag)


def fixture_inputs(n=400, R=3, seed=0):
    fx = make_multires(n + 1, R, seed)
    truth = fx.truth[1:]
    return inputs_from(truth, fx.raw[1:], fx.national[1:], fx.truth[:-1]), truth


def test_perfect_feature_selected(rng):
    inp, truth = fixture_inputs()
    exact = BoostInputs(inp.weeks, truth.copy(), inp.national_estimate, inp.lagged_truth)
    model = fit_blp(exact, truth, shrinkage=0.0)
    R = truth.shape[1]
    assert np.allclose(model.weights[:, :R], np.eye(R), atol=1e-8)
    assert np.allclose(model.weights[:, R:], 0.0, atol=1e-8)
    assert np.allclose(boost_predict(model, exact.features()), truth, atol=1e-8)


def test_independent_features_predict_mean(rng):
    n, R = 20_000, 2
    truth = rng.normal(size=(n, R))
    inp = inputs_from(truth, rng.normal(size=(n, R)), rng.normal(size=n), rng.normal(size=(n, R)))
    model = fit_blp(inp, truth, shrinkage=0.0)
    assert np.max(np.abs(model.weights)) < 0.05
    pred = boost_predict(model, inp.features())
    assert np.max(np.abs(pred - truth.mean(0))) < 0.3


def test_gaussian_weights_match_closed_form(rng):
    # joint order: target, raw, lag, national with one region
    S = np.array([[1.0, 0.8, 0.5, 0.6],
                  [0.8, 1.2, 0.4, 0.5],
                  [0.5, 0.4, 1.0, 0.3],
                  [0.6, 0.5, 0.3, 0.9]])
    n = 200_000
    J = rng.multivariate_normal(np.zeros(4), S, size=n)
    inp = inputs_from(J[:, :1], J[:, 1:2], J[:, 3], J[:, 2:3])
    model = fit_blp(inp, J[:, :1], shrinkage=0.0)
    # feature order in the model: raw, lag, national
    Sff = S[np.ix_([1, 2, 3], [1, 2, 3])]
    B = S[0, [1, 2, 3]] @ np.linalg.inv(Sff)
    assert np.allclose(model.weights[0], B, atol=0.02)


@pytest.mark.parametrize("shrinkage", [0.0, 0.3, 1.0])
def test_matches_explicit_oracle(shrinkage):
    inp, truth = fixture_inputs(n=300, R=3, seed=4)
    model = fit_blp(inp, truth, shrinkage)
    mu_y, mu_f, B = blp_weights(truth, inp.features(), 3, shrinkage)
    assert np.allclose(model.weights, B, atol=1e-10)
    assert np.allclose(model.mean_target, mu_y, atol=1e-12)
    eig = np.linalg.eigvalsh(model.covariance)
    assert np.allclose(model.covariance, model.covariance.T) and eig[0] > -1e-12


def test_training_means_give_target_mean():
    inp, truth = fixture_inputs()
    model = fit_blp(inp, truth)
    assert np.allclose(boost_predict(model, model.mean_features), truth.mean(0), atol=1e-12)


def test_full_shrinkage_uses_own_region_only():
    inp, truth = fixture_inputs(R=4)
    B = fit_blp(inp, truth, shrinkage=1.0).weights
    R = 4
    for r in range(R):
        own = {r, R + r}
        for j in range(B.shape[1]):
            if j not in own:
                assert B[r, j] == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 1000), st.floats(-5, 5))
def test_prediction_affine_in_features(seed, c):
    inp, truth = fixture_inputs(n=200, seed=seed % 5)
    model = fit_blp(inp, truth)
    f = np.random.default_rng(seed).normal(size=model.mean_features.shape)
    base = boost_predict(model, model.mean_features + f) - model.mean_target
    scaled = boost_predict(model, model.mean_features + c * f) - model.mean_target
    assert np.allclose(scaled, c * base, atol=1e-9)


def test_fit_errors():
    inp, truth = fixture_inputs(n=300, R=2)
    with pytest.raises(ValueError):
        fit_blp(inp.rows(np.arange(5)), truth[:5])
    with pytest.raises(ValueError):
        fit_blp(inp, truth, shrinkage=1.5)
    dup = BoostInputs(inp.weeks, inp.lagged_truth.copy(), inp.national_estimate, inp.lagged_truth)
    with pytest.raises(SingularCovarianceError):
        fit_blp(dup, truth, shrinkage=0.0)


def test_rolling_boost_beats_raw_and_ignores_future():
    fx = make_multires(400, 3, seed=2)
    truth = fx.truth[1:]
    inp = inputs_from(truth, fx.raw[1:], fx.national[1:], fx.truth[:-1])
    span = inp.weeks[150:]
    run = boost_rolling(inp, truth, span, window=104)
    assert run.weeks == span
    y = truth[150:]
    assert np.mean((run.boosted - y) ** 2) < np.mean((run.raw - y) ** 2)
    # truth at or after T never influences the prediction for T
    k = 40
    spoiled = truth.copy()
    spoiled[150 + k:] += 5.0
    again = boost_rolling(inp, spoiled, [span[k]], window=104)
    assert np.array_equal(again.boosted[0], run.boosted[k])
    early = boost_rolling(inp, truth, inp.weeks[:3], window=104)
    assert early.weeks == () and len(early.skipped) == 3


def test_assemble_inputs_alignment(tmp_path):
    weeks = tuple(START.shift(i) for i in range(5))
    spec = MethodSpec("exo_only_argo_c")
    raw = {r: NowcastRun(spec, weeks[1:], np.array([logit(v) for v in (1.0, 2.0, 3.0, 4.0)]) + k,
                         np.zeros(4)) for k, r in enumerate(("a", "b"))}
    nat = NowcastRun(MethodSpec("argo_c"), weeks, np.full(5, logit(2.0)), np.zeros(5))
    truth = {"a": {w: 1.0 + i for i, w in enumerate(weeks[:4])},
             "b": {w: 2.0 + i for i, w in enumerate(weeks)}}
    inp, tru = assemble_inputs(raw, nat, truth)
    assert inp.weeks == weeks[1:]
    assert inp.lagged_truth[0] == pytest.approx([logit(1.0), logit(2.0)])
    assert np.isnan(tru[-1, 0]) and tru[-1, 1] == pytest.approx(logit(6.0))
    run = boost_rolling(inp, tru, inp.weeks, window=104)
    write_boost_csv(tmp_path / "b.csv", run, truth)
    assert (tmp_path / "b.csv").read_text().splitlines()[0] == "date,region,raw,boosted,truth"


def test_inputs_validate_shapes():
    with pytest.raises(ValueError):
        BoostInputs((START,), np.zeros((1, 2)), np.zeros(2), np.zeros((1, 2)))
    with pytest.raises(ValueError):
        BoostInputs((START,), np.zeros((1, 2)), np.zeros(1), np.zeros((1, 3)))
    inp = BoostInputs((START,), np.zeros((1, 2)), np.zeros(1), np.zeros((1, 2)))
    assert inp.regions == ("region1", "region2")
    assert inverse_logit(0.0) == 50.0
