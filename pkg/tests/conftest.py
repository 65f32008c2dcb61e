"""Shared fixtures.

Every converged fit produced through ``sgl.fit``, ``sgl.fit_lasso`` or
``sgl.fit_path`` anywhere in the suite is checked against the KKT conditions.
"""
from __future__ import annotations

import numpy as np
import pytest

from argoc import sgl

KKT_TOL = 1e-4
KKT_LOG: list[sgl.KKTReport] = []
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def _certify(window, model):
    if not model.converged:
        return model
    rep = sgl.kkt_check(window, model)
    KKT_LOG.append(rep)
    assert rep.ok(KKT_TOL) and rep.zero_groups_ok, f"KKT violated: {rep}"
    return model


@pytest.fixture(autouse=True)
def kkt_certificate(monkeypatch):
    fit, fit_lasso, fit_path = sgl.fit, sgl.fit_lasso, sgl.fit_path

    def fit_checked(window, penalty, *a, **kw):
        return _certify(window, fit(window, penalty, *a, **kw))

    def lasso_checked(window, lam, *a, **kw):
        return _certify(window, fit_lasso(window, lam, *a, **kw))

    def path_checked(window, penalty, lambdas, *a, **kw):
        return [_certify(window, m) for m in fit_path(window, penalty, lambdas, *a, **kw)]

    monkeypatch.setattr(sgl, "fit", fit_checked)
    monkeypatch.setattr(sgl, "fit_lasso", lasso_checked)
    monkeypatch.setattr(sgl, "fit_path", path_checked)
    yield KKT_LOG


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    if 3 in ACCEPTANCE and KKT_LOG:
        bad = sum(not (r.ok(KKT_TOL) and r.zero_groups_ok) for r in KKT_LOG)
        worst = max(max(r.max_residual, r.group_violation) for r in KKT_LOG)
        ACCEPTANCE[3] = (bad == 0, f"{len(KKT_LOG)} converged fits in the session, "
                                   f"worst residual {worst:.1e}, {bad} violations")
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, msg = ACCEPTANCE[k]
        terminalreporter.write_line(f"AC{k:<2} {'PASS' if ok else 'FAIL'}  {msg}")
