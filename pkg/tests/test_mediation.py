"""Misclassified-mediator estimators: EM, predictive-value weighting,
the least-squares correction, and effect summaries."""

import numpy as np
import pytest

from designs import draw_mediation
from miscorr import (MediationParams, effect_estimates, em_fit_mediation,
                     expit, fit_weighted_linear, logit, mediator_probs,
                     ols_correct, outcome_loglik_contrib, predictive_values,
                     pvw_fit)
from miscorr.mediation import observed_loglik_mediation
from miscorr.single import SingleOutcomeParams
from reference_values import MEDIATION_LL, MEDIATION_MLE, NPV_EXACT, PPV_EXACT


def _params(beta=(1.0, -2.0), gamma=((logit(0.8), logit(0.1)),),
            theta=(1.0, 0.5, 1.0), sigma=1.25, dist="normal",
            interaction=False):
    return MediationParams(np.asarray(beta, dtype=float),
                           np.asarray(gamma, dtype=float),
                           np.asarray(theta, dtype=float),
                           sigma if dist == "normal" else None,
                           dist, interaction)


def enumeration_loglik_mediation(params, mstar, y, x, Z):
    """Per-subject mixture over the two latent mediator values, written
    directly from the model's generative factorization."""
    pi, pistar, _, _ = mediator_probs(params.beta, params.gamma, x, None, Z)
    kidx = np.asarray(mstar) - 1
    total = 0.0
    for i in range(x.shape[0]):
        acc = 0.0
        for j in (0, 1):
            m01 = 1.0 if j == 0 else 0.0
            mu = params.theta[0] + params.theta[1] * x[i] \
                + params.theta[2] * m01
            dens = np.exp(-0.5 * ((y[i] - mu) / params.sigma) ** 2) \
                / (np.sqrt(2 * np.pi) * params.sigma)
            acc += pi[i, j] * pistar[i, kidx[i], j] * dens
        total += np.log(acc)
    return total


def test_observed_loglik_mediation_matches_enumeration():
    rng = np.random.default_rng(4)
    x, m, ms, y = draw_mediation(4, n=40)
    params = _params()
    Z = np.empty((40, 0))
    got = observed_loglik_mediation(params, ms, y, x, Z, None)
    want = enumeration_loglik_mediation(params, ms, y, x, Z)
    assert abs(got - want) < 1e-10


def test_em_fit_mediation_matches_direct_mle():
    x, m, ms, y = draw_mediation(9, n=1000)
    Z = np.empty((1000, 0))
    fit = em_fit_mediation(ms, y, x, Z, tolerance=1e-9, accel="squarem")
    assert fit.converged
    assert np.allclose(fit.estimates, MEDIATION_MLE, atol=5e-6)
    assert abs(fit.loglik - MEDIATION_LL) < 1e-8
    assert fit.parameter_names == ["beta_0", "beta_1", "gamma11", "gamma12",
                                   "theta_0", "theta_x", "theta_m", "sigma"]
    # SEs are deferred to the bootstrap for this family
    assert np.all(np.isnan(fit.standard_errors))


def test_em_mediation_path_monotone():
    x, m, ms, y = draw_mediation(30, n=900)
    Z = np.empty((900, 0))
    fit = em_fit_mediation(ms, y, x, Z, accel="plain")
    path = np.asarray(fit.loglik_path)
    assert np.all(np.diff(path) >= -1e-9)


def test_predictive_values_exact_fractions():
    ppv, npv = predictive_values(0.8, 0.9, 0.5)
    assert np.isclose(ppv, PPV_EXACT, atol=1e-12)
    assert np.isclose(npv, NPV_EXACT, atol=1e-12)
    # perfect classification leaves the labels alone
    ppv1, npv1 = predictive_values(1.0, 1.0, 0.4)
    assert ppv1 == 1.0 and npv1 == 1.0


@pytest.mark.filterwarnings("ignore:PPV/NPV outside")
def test_pvw_close_to_em_on_well_identified_data():
    x, m, ms, y = draw_mediation(2, n=8000)
    Z = np.empty((8000, 0))
    em = em_fit_mediation(ms, y, x, Z, accel="squarem")
    pvw = pvw_fit(ms, y, x, Z, accel="squarem")
    i_em = em.parameter_names.index("theta_m")
    i_pv = pvw.parameter_names.index("theta_m")
    assert abs(pvw.estimates[i_pv] - 1.0) < 0.25
    assert abs(pvw.estimates[i_pv] - em.estimates[i_em]) < 0.25
    assert {"ppv", "npv", "mediator_params"} <= set(pvw.extras)


def test_ols_correct_close_to_truth():
    x, m, ms, y = draw_mediation(6, n=8000)
    Z = np.empty((8000, 0))
    ols = ols_correct(ms, y, x, Z, accel="squarem")
    names = ols.parameter_names
    assert abs(ols.estimates[names.index("theta_m")] - 1.0) < 0.2
    assert abs(ols.estimates[names.index("theta_x")] - 0.5) < 0.1
    assert {"zeta", "xi", "mediator_params"} <= set(ols.extras)
    # 1 + xi must equal the reciprocal of the estimated Youden index
    t = ols.sensitivity + ols.specificity - 1.0
    assert np.isclose(1.0 + ols.extras["xi"], 1.0 / t, rtol=1e-10)


def test_ols_zero_adjustment_path_matches_naive_ols():
    # When the estimated error rates sit at the boundary the shrinkage
    # terms vanish and the correction must reproduce the uncorrected
    # least-squares fit.  The rates get there via saturated starting values
    # (the linear predictor is capped at +-30, i.e. rates within 1e-13 of
    # zero); the classification model has no interior optimum here, so we
    # stop the step-1 loop early rather than wait out max_iter.
    x, m, ms, y = draw_mediation(12, n=3000, sens=1.0, fp=0.0)
    assert np.array_equal(m, ms)
    Z = np.empty((3000, 0))
    saturated = SingleOutcomeParams(np.zeros(2), np.array([[30.0, -30.0]]))
    ols = ols_correct(ms, y, x, Z, starts=saturated, max_iter=25)
    D = np.column_stack([np.ones(3000), x, (ms == 1).astype(float)])
    naive = fit_weighted_linear(D, y).coefficients
    names = ols.parameter_names
    got = np.array([ols.estimates[names.index(k)]
                    for k in ("theta_0", "theta_x", "theta_m")])
    assert abs(ols.extras["zeta"]) < 1e-8
    assert abs(ols.extras["xi"]) < 1e-8
    assert np.allclose(got, naive[[0, 1, 2]], atol=1e-8)


def test_label_permuted_starts_reach_identical_mediation_fit():
    x, m, ms, y = draw_mediation(15, n=2500)
    Z = np.empty((2500, 0))
    start = _params(beta=(0.5, -1.0), gamma=((logit(0.7), logit(0.2)),),
                    theta=(0.8, 0.4, 0.8), sigma=1.0)
    a = em_fit_mediation(ms, y, x, Z, starts=start)
    b = em_fit_mediation(ms, y, x, Z, starts=start.permuted())
    assert np.allclose(a.estimates, b.estimates, atol=1e-6)
    assert b.label_correction_applied
    assert a.youden_j >= 0 and b.youden_j >= 0


def test_mediation_loglik_invariant_under_permutation():
    x, m, ms, y = draw_mediation(8, n=60)
    params = _params()
    Z = np.empty((60, 0))
    a = observed_loglik_mediation(params, ms, y, x, Z, None)
    b = observed_loglik_mediation(params.permuted(), ms, y, x, Z, None)
    assert abs(a - b) < 1e-9


def test_outcome_loglik_contrib_distributions():
    y = np.array([0.0, 1.0])
    x = np.array([0.5, -0.5])
    th = np.array([0.0, 1.0, 0.0])
    normal = outcome_loglik_contrib(y, x, 1.0, None, th, 2.0, "normal")
    want = -0.5 * ((y - (th[0] + th[1] * x + th[2])) / 2.0) ** 2 \
        - np.log(2.0 * np.sqrt(2.0 * np.pi))
    assert np.allclose(normal, want, atol=1e-12)
    bern = outcome_loglik_contrib(y, x, 0.0, None, th, None, "bernoulli")
    p = expit(th[0] + th[1] * x)
    assert np.allclose(bern, y * np.log(p) + (1 - y) * np.log(1 - p),
                       atol=1e-12)
    pois = outcome_loglik_contrib(y, x, 0.0, None, th, None, "poisson")
    lam = np.exp(th[0] + th[1] * x)
    from scipy.special import gammaln
    assert np.allclose(pois, y * np.log(lam) - lam - gammaln(y + 1.0),
                       atol=1e-12)


def test_effect_estimates_normal_closed_form():
    params = _params(theta=(1.0, 0.5, 2.0))
    eff = effect_estimates(params, x0=0.0, x1=1.0)
    p0 = expit(1.0)
    p1 = expit(-1.0)
    assert eff.scale == "difference"
    assert np.isclose(eff.nde, 0.5)
    assert np.isclose(eff.cde, 0.5)
    assert np.isclose(eff.nie, 2.0 * (p1 - p0), atol=1e-12)


def test_effect_estimates_null_mediator_anchors():
    # theta_m = 0 means nothing flows through the mediator
    params = _params(theta=(1.0, 0.7, 0.0), dist="bernoulli", sigma=None)
    eff = effect_estimates(params, 0.0, 1.0)
    assert eff.scale == "odds-ratio"
    assert np.isclose(eff.nie, 1.0, atol=1e-12)
    assert np.isclose(eff.nde, np.exp(0.7), atol=1e-12)
    # a flat mediator model (beta_1 = 0) also kills the indirect path
    params2 = _params(beta=(0.3, 0.0), theta=(1.0, 0.7, 0.9),
                      dist="poisson", sigma=None)
    eff2 = effect_estimates(params2, 0.0, 1.0)
    assert eff2.scale == "rate-ratio"
    assert np.isclose(eff2.nie, 1.0, atol=1e-12)


def test_effect_estimates_interaction_needs_m_level():
    params = _params(theta=(1.0, 0.5, 2.0, -0.3), interaction=True)
    with pytest.raises(ValueError):
        effect_estimates(params, 0.0, 1.0)
    eff = effect_estimates(params, 0.0, 1.0, m_level=1.0)
    assert np.isclose(eff.cde, 0.5 - 0.3)


def test_mediation_rejects_bad_outcomes():
    x, m, ms, y = draw_mediation(1, n=50)
    Z = np.empty((50, 0))
    with pytest.raises(ValueError):
        em_fit_mediation(ms, y, x, Z, dist="bernoulli")
    with pytest.raises(ValueError):
        em_fit_mediation(ms, -np.abs(y), x, Z, dist="poisson")
