"""Single misclassified-outcome model: likelihood oracles, EM behavior,
and label-switching correction."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from designs import draw_single, random_small_instance
from miscorr import (SingleOutcomeParams, compute_pi, compute_pistar,
                     comparison_fits, e_step_weights, em_fit, expit,
                     fit_weighted_logistic, label_switch_correct, logit,
                     misclassification_prob, naive_fit, observed_loglik)
from miscorr.categories import encode_categories, indicator
from reference_values import SINGLE_LL, SINGLE_MLE


def enumeration_loglik(beta, gamma, X, Z, ystar):
    """Brute-force observed log-likelihood, summing the complete-data
    likelihood over every latent class configuration."""
    n = X.shape[0]
    pi = expit(X @ np.asarray(beta, dtype=float))
    p_obs1 = expit(Z @ np.asarray(gamma, dtype=float))   # (n, 2) by column
    total = 0.0
    for mask in range(2 ** n):
        term = 1.0
        for i in range(n):
            j = (mask >> i) & 1                          # 0 = event
            prior = pi[i] if j == 0 else 1.0 - pi[i]
            p1 = p_obs1[i, j]
            term *= prior * (p1 if ystar[i] == 1 else 1.0 - p1)
        total += term
    return np.log(total)


def test_encode_categories_both_codings():
    assert np.array_equal(encode_categories([1, 2, 1]), [0, 1, 0])
    assert np.array_equal(encode_categories([1, 0, 1], coding="0,1"),
                          [0, 1, 0])
    with pytest.raises(ValueError):
        encode_categories([1, 3])
    with pytest.raises(ValueError):
        encode_categories([[1, 2]])
    ind = indicator(np.array([0, 1, 0]))
    assert np.array_equal(ind, [[1, 0], [0, 1], [1, 0]])


def test_compute_pi_and_pistar_intercept_only():
    X = np.ones((5, 1))
    pi = compute_pi([0.0], X)
    assert np.allclose(pi, 0.5)
    gamma = np.array([[logit(0.9), logit(0.15)]])
    probs, sens, spec = compute_pistar(gamma, np.ones((5, 1)))
    assert np.isclose(sens, 0.9)
    assert np.isclose(spec, 0.85)
    # [subject, observed category index, true category index]
    assert np.allclose(probs[:, 0, 0], 0.9)
    assert np.allclose(probs[:, 1, 1], 0.85)
    assert np.allclose(probs.sum(axis=1), 1.0)


def test_observed_loglik_matches_enumeration():
    rng = np.random.default_rng(42)
    for _ in range(10):
        X, Z, beta, gamma, ystar = random_small_instance(rng, n_max=8)
        params = SingleOutcomeParams(beta, gamma)
        got = observed_loglik(params, X, Z, ystar)
        want = enumeration_loglik(beta, gamma, X, Z, ystar)
        assert abs(got - want) < 1e-10


def test_e_step_weights_are_bayes_posteriors():
    rng = np.random.default_rng(5)
    X, Z, beta, gamma, ystar = random_small_instance(rng)
    params = SingleOutcomeParams(beta, gamma)
    w = e_step_weights(params, X, Z, ystar)
    pi = compute_pi(beta, X)
    probs = compute_pistar(gamma, Z).probs
    kidx = ystar - 1
    num = probs[np.arange(len(ystar)), kidx, :] * pi
    want = num / num.sum(axis=1, keepdims=True)
    assert np.allclose(w, want, atol=1e-12)
    assert np.allclose(w.sum(axis=1), 1.0)


def test_em_fit_matches_direct_mle():
    X, y, s = draw_single(7, n=500)
    Z = np.ones((500, 1))
    fit = em_fit(s, X, Z, tolerance=1e-9, accel="squarem")
    assert fit.converged
    assert np.allclose(fit.estimates, SINGLE_MLE, atol=5e-6)
    assert abs(fit.loglik - SINGLE_LL) < 1e-8
    assert fit.parameter_names == ["beta1", "beta2", "gamma11", "gamma12"]
    se = fit.standard_errors
    assert np.all(np.isfinite(se)) and np.all(se > 0)


def test_em_loglik_path_monotone():
    X, y, s = draw_single(11, n=800)
    Z = np.ones((800, 1))
    fit = em_fit(s, X, Z, accel="plain", compute_se=False)
    path = np.asarray(fit.loglik_path)
    assert np.all(np.diff(path) >= -1e-9)


def test_em_accepts_zero_one_coding():
    X, y, s = draw_single(13, n=600)
    Z = np.ones((600, 1))
    fit12 = em_fit(s, X, Z, compute_se=False)
    s01 = np.where(s == 1, 1, 0)
    fit01 = em_fit(s01, X, Z, coding="0,1", compute_se=False)
    assert np.allclose(fit12.estimates, fit01.estimates, atol=1e-12)


def test_label_permuted_starts_reach_identical_fit():
    X, y, s = draw_single(3, n=1500)
    Z = np.ones((1500, 1))
    start = SingleOutcomeParams([0.5, -1.0],
                                np.array([[logit(0.8), logit(0.2)]]))
    flipped = start.permuted()
    a = em_fit(s, X, Z, beta_start=start.beta, gamma_start=start.gamma,
               compute_se=False)
    b = em_fit(s, X, Z, beta_start=flipped.beta, gamma_start=flipped.gamma,
               compute_se=False)
    assert np.allclose(a.estimates, b.estimates, atol=1e-6)
    assert b.label_correction_applied
    assert a.youden_j >= 0 and b.youden_j >= 0


def test_label_switch_correct_restores_orientation():
    params = SingleOutcomeParams([1.0, -2.0],
                                 np.array([[logit(0.9), logit(0.15)]]))
    Z = np.ones((10, 1))
    fixed, applied = label_switch_correct(params.permuted(), Z)
    assert applied
    assert np.allclose(fixed.beta, params.beta)
    assert np.allclose(fixed.gamma, params.gamma)
    same, applied2 = label_switch_correct(params, Z)
    assert not applied2
    assert np.allclose(same.beta, params.beta)


def test_loglik_invariant_under_label_permutation():
    rng = np.random.default_rng(17)
    for _ in range(5):
        X, Z, beta, gamma, ystar = random_small_instance(rng)
        params = SingleOutcomeParams(beta, gamma)
        a = observed_loglik(params, X, Z, ystar)
        b = observed_loglik(params.permuted(), X, Z, ystar)
        assert abs(a - b) < 1e-10


def test_naive_fit_is_plain_logistic():
    X, y, s = draw_single(19, n=700)
    naive = naive_fit(s, X)
    direct = fit_weighted_logistic(X, (s == 1).astype(float))
    assert naive.method == "naive"
    assert np.allclose(naive.estimates, direct.coefficients, atol=1e-10)
    # misclassification attenuates the naive slope toward zero
    assert abs(naive.estimate("beta2")) < 2.0


def test_comparison_fits_loglik_ordering():
    X, y, s = draw_single(23, n=900)
    Z = np.ones((900, 1))
    naive, pspec, psens = comparison_fits(s, X, Z)
    full = em_fit(s, X, Z, compute_se=False)
    # constrained observation models cannot beat the full likelihood
    assert pspec.loglik <= full.loglik + 1e-6
    assert psens.loglik <= full.loglik + 1e-6
    assert naive.method == "naive"
    assert pspec.method == "perfect_specificity"
    assert pspec.specificity >= 1.0 - 1e-12
    assert psens.sensitivity >= 1.0 - 1e-12


def test_misclassification_prob_long_table():
    gamma = np.array([[logit(0.9), logit(0.15)]])
    table = misclassification_prob(gamma, np.ones((3, 1)))
    assert list(table.columns) == ["Subject", "Y", "Ystar", "Probability"]
    assert table.shape[0] == 12     # 3 subjects x 2 true x 2 observed
    sens_rows = table[(table["Y"] == 1) & (table["Ystar"] == 1)]
    assert np.allclose(sens_rows["Probability"], 0.9)


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 32 - 1))
def test_weights_posterior_identity(seed):
    # For every instance, the observed likelihood equals the ratio of the
    # complete-data numerator to the posterior weight (Bayes identity).
    rng = np.random.default_rng(seed)
    X, Z, beta, gamma, ystar = random_small_instance(rng)
    params = SingleOutcomeParams(beta, gamma)
    w = e_step_weights(params, X, Z, ystar)
    pi = compute_pi(beta, X)
    probs = compute_pistar(gamma, Z).probs
    kidx = ystar - 1
    marg = np.einsum("ij,ij->i", probs[np.arange(len(ystar)), kidx, :], pi)
    ll = observed_loglik(params, X, Z, ystar)
    assert np.isclose(ll, np.sum(np.log(marg)), atol=1e-10)
    assert np.all(w >= 0) and np.all(w <= 1)
