"""Weighted GLM building blocks against closed-form oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from miscorr import (CollinearityError, add_intercept, expit,
                     fit_weighted_linear, fit_weighted_logistic,
                     fit_weighted_poisson, logit)


def test_expit_logit_roundtrip_and_anchors():
    assert expit(0.0) == 0.5
    assert logit(0.5) == 0.0
    x = np.linspace(-8, 8, 41)
    assert np.allclose(logit(expit(x)), x, atol=1e-10)
    # saturates at the +/-30 predictor cap instead of overflowing
    assert expit(1e6) == expit(30.0)
    assert expit(-1e6) == expit(-30.0)


def test_logistic_matches_group_logodds():
    # With one binary covariate the MLE has a closed form: the intercept
    # is the log-odds in the x=0 group, the slope the log-odds difference.
    y = np.array([1, 1, 1, 0, 0, 0, 0, 0, 0, 0,    # x=0: 3/10
                  1, 1, 1, 1, 1, 1, 1, 0, 0, 0], dtype=float)  # x=1: 7/10
    x = np.repeat([0.0, 1.0], 10)
    X = add_intercept([x])
    fit = fit_weighted_logistic(X, y)
    b0 = np.log(3 / 7)
    b1 = np.log(7 / 3) - b0
    assert fit.converged
    assert np.allclose(fit.coefficients, [b0, b1], atol=1e-6)


def test_logistic_weights_equal_replication():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(30)
    y = (rng.random(30) < expit(0.5 + x)).astype(float)
    counts = rng.integers(1, 4, size=30)
    X = add_intercept([x])
    weighted = fit_weighted_logistic(X, y, weights=counts.astype(float))
    X_rep = np.repeat(X, counts, axis=0)
    y_rep = np.repeat(y, counts)
    replicated = fit_weighted_logistic(X_rep, y_rep)
    assert np.allclose(weighted.coefficients, replicated.coefficients,
                       atol=1e-7)


def test_logistic_fractional_response_score_equation():
    # The EM M-step feeds posterior probabilities as responses; at the
    # optimum the weighted score X'w(y - mu) vanishes.
    rng = np.random.default_rng(2)
    X = add_intercept([rng.standard_normal(200)])
    y = rng.random(200)
    w = rng.random(200) + 0.5
    fit = fit_weighted_logistic(X, y, weights=w)
    mu = expit(X @ fit.coefficients)
    assert fit.converged
    assert np.max(np.abs(X.T @ (w * (y - mu)))) < 1e-6


def test_logistic_separation_flagged_not_overflowed():
    x = np.array([-2.0, -1.0, -0.5, 0.5, 1.0, 2.0])
    y = (x > 0).astype(float)
    fit = fit_weighted_logistic(add_intercept([x]), y)
    assert not fit.converged
    assert np.all(np.isfinite(fit.coefficients))


def test_logistic_rejects_bad_inputs():
    X = add_intercept([np.arange(4.0)])
    with pytest.raises(ValueError):
        fit_weighted_logistic(X, np.array([0.0, 0.5, 1.0, 1.5]))
    with pytest.raises(ValueError):
        fit_weighted_logistic(X, np.zeros(4), weights=np.array([1.0, -1, 1, 1]))
    with pytest.raises(ValueError):
        fit_weighted_logistic(X, np.zeros(4), weights=np.zeros(4))


def test_poisson_matches_group_means():
    # log-link Poisson with a binary covariate: intercept = log(mean in
    # group 0), slope = log rate ratio.
    y = np.array([2, 3, 1, 2, 0, 4, 7, 5, 6, 6], dtype=float)
    x = np.repeat([0.0, 1.0], 5)
    fit = fit_weighted_poisson(add_intercept([x]), y)
    m0, m1 = y[:5].mean(), y[5:].mean()
    assert fit.converged
    assert np.allclose(fit.coefficients, [np.log(m0), np.log(m1 / m0)],
                       atol=1e-6)


def test_linear_matches_normal_equations():
    rng = np.random.default_rng(3)
    X = add_intercept([rng.standard_normal(50), rng.standard_normal(50)])
    y = rng.standard_normal(50) + X @ np.array([1.0, 2.0, -1.0])
    w = rng.random(50) + 0.2
    fit = fit_weighted_linear(X, y, weights=w)
    coef = np.linalg.solve(X.T @ (X * w[:, None]), X.T @ (w * y))
    assert np.allclose(fit.coefficients, coef, atol=1e-10)
    resid = y - X @ coef
    assert np.isclose(fit.sigma,
                      np.sqrt(np.sum(w * resid ** 2) / np.sum(w)))


def test_linear_collinear_design_raises():
    x = np.arange(10.0)
    X = np.column_stack([np.ones(10), x, 2.0 * x])
    with pytest.raises(CollinearityError):
        fit_weighted_linear(X, x)


def test_add_intercept_shapes():
    out = add_intercept([np.arange(3.0)])
    assert out.shape == (3, 2) and np.all(out[:, 0] == 1.0)
    only = add_intercept([], n=4)
    assert only.shape == (4, 1)
    with pytest.raises(ValueError):
        add_intercept([np.array([1.0, np.nan])])
    with pytest.raises(ValueError):
        add_intercept([])


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 32 - 1))
def test_logistic_score_zero_at_optimum(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(20, 80))
    X = add_intercept([rng.standard_normal(n)])
    y = (rng.random(n) < expit(X @ rng.normal(0, 1, 2))).astype(float)
    if y.min() == y.max():     # single-class draws may separate perfectly
        return
    fit = fit_weighted_logistic(X, y)
    if fit.converged:
        mu = expit(X @ fit.coefficients)
        assert np.max(np.abs(X.T @ (y - mu))) < 1e-4
