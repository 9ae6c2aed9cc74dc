"""Posterior sampler: prior densities, chain mechanics, label correction,
and agreement with the EM point estimates on easy data."""

import numpy as np
import pytest
from scipy import stats

from designs import draw_single, draw_twostage
from miscorr import PriorSpec, batch_means_mcse, em_fit, mcmc_fit, mcmc_fit_2stage
from miscorr.mcmc import (_run_chain, chain_label_correct,
                          chain_label_correct_2stage, log_prior,
                          permute_chain_single, permute_chain_twostage)
from miscorr.single import SingleOutcomeParams


def _single_params(rng):
    return SingleOutcomeParams(rng.normal(size=3), rng.normal(size=(2, 2)))


def test_log_prior_matches_scipy_normal():
    rng = np.random.default_rng(0)
    p = _single_params(rng)
    prior = PriorSpec.for_single(3, 2, family="normal", location=0.5, scale=2.0)
    want = stats.norm.logpdf(p.flatten(), loc=0.5, scale=2.0).sum()
    assert np.isclose(log_prior(p, prior), want, rtol=0, atol=1e-12)


def test_log_prior_matches_scipy_laplace():
    rng = np.random.default_rng(1)
    p = _single_params(rng)
    prior = PriorSpec.for_single(3, 2, family="double-exponential",
                                 location=-0.25, scale=1.5)
    want = stats.laplace.logpdf(p.flatten(), loc=-0.25, scale=1.5).sum()
    assert np.isclose(log_prior(p, prior), want, rtol=0, atol=1e-12)


def test_log_prior_matches_scipy_t():
    rng = np.random.default_rng(2)
    p = _single_params(rng)
    prior = PriorSpec.for_single(3, 2, family="t", location=0.0, scale=2.5,
                                 df=4.0)
    want = stats.t.logpdf(p.flatten(), 4.0, loc=0.0, scale=2.5).sum()
    assert np.isclose(log_prior(p, prior), want, rtol=0, atol=1e-12)


def test_log_prior_uniform_support():
    prior = PriorSpec.for_single(2, 1, family="uniform", lower=-2.0, upper=2.0)
    inside = SingleOutcomeParams(np.array([0.5, -1.0]), np.array([[1.0, -1.5]]))
    outside = SingleOutcomeParams(np.array([0.5, 3.0]), np.array([[1.0, -1.5]]))
    # density 1/4 per coordinate, four coordinates (two beta, two gamma)
    assert np.isclose(log_prior(inside, prior), -4.0 * np.log(4.0))
    assert log_prior(outside, prior) == -np.inf


def test_log_prior_symmetric_under_label_permutation():
    # Priors centered at zero with shared scales cannot prefer one labeling,
    # which is what makes the post-hoc chain correction legitimate.
    rng = np.random.default_rng(3)
    prior = PriorSpec.for_single(3, 2, family="normal", location=0.0, scale=5.0)
    for _ in range(10):
        p = _single_params(rng)
        assert np.isclose(log_prior(p, prior), log_prior(p.permuted(), prior),
                          rtol=0, atol=1e-10)


def test_prior_spec_validation():
    with pytest.raises(ValueError):
        PriorSpec.for_single(2, 1, family="cauchy")
    with pytest.raises(ValueError):
        PriorSpec.for_single(2, 1, family="uniform", lower=1.0, upper=-1.0)
    with pytest.raises(ValueError):
        PriorSpec.for_single(2, 1, family="normal", scale=0.0)
    with pytest.raises(ValueError):
        PriorSpec.for_single(2, 1, family="t", df=-3.0)


def test_flat_hyper_layout_tracks_parameter_order():
    # The flattened hyperparameter columns must line up with
    # SingleOutcomeParams.flatten(): beta entries, then gamma stacked
    # column-by-column.
    prior = PriorSpec.for_single(2, 2, family="normal")
    prior.beta[0] = [10.0, 11.0]
    prior.gamma[0] = [[21.0, 22.0], [31.0, 32.0]]
    flat = prior.flat_hyper_single()
    assert flat.shape == (2, 6)
    assert list(flat[0]) == [10.0, 11.0, 21.0, 31.0, 22.0, 32.0]


def test_run_chain_recovers_standard_normal_target():
    def log_post(v):
        return float(-0.5 * v @ v)

    blocks = {"a": slice(0, 1), "b": slice(1, 2)}
    rng = np.random.default_rng(11)
    draws, rates = _run_chain(log_post, np.array([3.0, -3.0]), blocks,
                              n_samples=4000, burn_in=1000, rng=rng)
    assert draws.shape == (4000, 2)
    assert np.all(np.abs(draws.mean(axis=0)) < 0.2)
    assert np.all(np.abs(draws.var(axis=0) - 1.0) < 0.35)
    for r in rates.values():
        assert 0.1 < r < 0.8


def test_run_chain_rejects_nonfinite_start():
    def log_post(v):
        return -np.inf

    with pytest.raises(ValueError):
        _run_chain(log_post, np.zeros(1), {"a": slice(0, 1)}, 10, 10,
                   np.random.default_rng(0))


def test_run_chain_flags_frozen_sampler():
    start = np.zeros(2)

    def log_post(v):
        return 0.0 if np.array_equal(v, start) else -np.inf

    with pytest.raises(RuntimeError):
        _run_chain(log_post, start, {"a": slice(0, 2)}, 50, 10,
                   np.random.default_rng(0))


def test_permutations_are_involutions():
    rng = np.random.default_rng(4)
    d_single = rng.normal(size=(40, 3 + 2 * 2))
    again = permute_chain_single(permute_chain_single(d_single, 3, 2), 3, 2)
    assert np.array_equal(again, d_single)
    d_two = rng.normal(size=(40, 2 + 2 * 1 + 4 * 2))
    again = permute_chain_twostage(permute_chain_twostage(d_two, 2, 1, 2),
                                   2, 1, 2)
    assert np.array_equal(again, d_two)


def test_chain_label_correct_flips_negative_youden():
    rng = np.random.default_rng(5)
    Z = np.ones((50, 1))
    n_beta, n_gamma = 2, 1
    # gamma column order (event side, false-positive side): these draws put
    # the event-side rate low and the other high, i.e. swapped labels.
    good = np.column_stack([rng.normal(1.0, 0.1, 200),
                            rng.normal(-2.0, 0.1, 200),
                            rng.normal(2.0, 0.1, 200),
                            rng.normal(-2.0, 0.1, 200)])
    bad = permute_chain_single(good, n_beta, n_gamma)
    kept, applied = chain_label_correct(good, Z, n_beta, n_gamma)
    assert not applied and np.array_equal(kept, good)
    fixed, applied = chain_label_correct(bad, Z, n_beta, n_gamma)
    assert applied
    assert np.allclose(fixed, good)


def test_chain_label_correct_2stage_round_trip():
    rng = np.random.default_rng(6)
    Z1 = np.ones((30, 1))
    n_beta, n_g1, n_g2 = 2, 1, 1
    cols = [rng.normal(1.0, 0.05, 100), rng.normal(-2.0, 0.05, 100),
            rng.normal(2.2, 0.05, 100), rng.normal(-1.7, 0.05, 100)]
    cols += [rng.normal(0.0, 0.05, 100) for _ in range(4)]
    good = np.column_stack(cols)
    bad = permute_chain_twostage(good, n_beta, n_g1, n_g2)
    fixed, applied = chain_label_correct_2stage(bad, Z1, n_beta, n_g1, n_g2)
    assert applied
    assert np.allclose(fixed, good)
    kept, applied = chain_label_correct_2stage(good, Z1, n_beta, n_g1, n_g2)
    assert not applied


def test_batch_means_mcse_scaling():
    rng = np.random.default_rng(7)
    x = rng.standard_normal(10000)
    se = batch_means_mcse(x)
    # independent draws: the truth is 1/sqrt(n) = 0.01
    assert 0.005 < se < 0.02
    assert np.isnan(batch_means_mcse(np.array([1.0, 2.0, 3.0])))


def test_mcmc_fit_reproducible_and_seeded():
    X, _, ystar = draw_single(3, n=300)
    Z = np.ones((300, 1))
    kwargs = dict(n_chains=2, n_samples=150, burn_in=100)
    a = mcmc_fit(ystar, X, Z, seed=5, **kwargs)
    b = mcmc_fit(ystar, X, Z, seed=5, **kwargs)
    c = mcmc_fit(ystar, X, Z, seed=6, **kwargs)
    assert np.array_equal(a.chains.pooled(), b.chains.pooled())
    assert np.array_equal(a.naive_chains.pooled(), b.naive_chains.pooled())
    assert not np.array_equal(a.chains.pooled(), c.chains.pooled())


def test_mcmc_fit_structure_and_summary():
    X, _, ystar = draw_single(4, n=400)
    Z = np.ones((400, 1))
    res = mcmc_fit(ystar, X, Z, n_chains=2, n_samples=200, burn_in=150, seed=2)
    assert res.chains.parameter_names == [
        "beta[1,1]", "beta[1,2]", "gamma[1,1,1]", "gamma[1,1,2]"]
    assert res.naive_chains.parameter_names == [
        "naive_beta[1,1]", "naive_beta[1,2]"]
    assert res.chains.pooled().shape == (400, 4)
    assert len(res.chains.acceptance_rates) == 2
    for per_chain in res.chains.acceptance_rates:
        assert set(per_chain) == {"beta", "gamma_col1", "gamma_col2"}
    assert list(res.summary["Parameter"]) == (res.chains.parameter_names
                                              + res.naive_chains.parameter_names)
    # every retained chain must respect the event-labeling convention
    for draws in res.chains.chains:
        mean = draws.mean(axis=0)
        from miscorr.single import compute_pistar
        gamma = mean[2:].reshape((1, 2), order="F")
        _, sens, spec = compute_pistar(gamma, Z)
        assert sens + spec - 1.0 >= 0.0


def test_mcmc_fit_tracks_em_on_informative_data():
    X, _, ystar = draw_single(21, n=1500)
    Z = np.ones((1500, 1))
    em = em_fit(ystar, X, Z, compute_se=False)
    res = mcmc_fit(ystar, X, Z, n_chains=2, n_samples=500, burn_in=400, seed=9)
    post = res.chains.pooled().mean(axis=0)
    assert np.all(np.abs(post - em.estimates) < 0.35)


def test_mcmc_fit_rejects_mismatched_prior():
    X, _, ystar = draw_single(3, n=120)
    Z = np.ones((120, 1))
    wrong = PriorSpec.for_single(5, 4)
    with pytest.raises(ValueError):
        mcmc_fit(ystar, X, Z, prior=wrong, n_samples=10, burn_in=5)
    with pytest.raises(ValueError):
        mcmc_fit(ystar, X, Z, n_samples=0)


def test_mcmc_fit_uniform_init_respects_support():
    X, _, ystar = draw_single(3, n=120)
    Z = np.ones((120, 1))
    init = np.array([0.0, 0.0, 20.0, -20.0])
    prior = PriorSpec.for_single(2, 1, family="uniform", lower=-3.0, upper=3.0)
    with pytest.raises(ValueError):
        mcmc_fit(ystar, X, Z, prior=prior, init=init, n_samples=20, burn_in=10)


def test_mcmc_fit_2stage_runs_and_labels():
    X, _, s1, s2 = draw_twostage(5, n=250)
    Z1 = np.ones((250, 1))
    Z2 = np.ones((250, 1))
    res = mcmc_fit_2stage(s1, s2, X, Z1, Z2, n_chains=2, n_samples=120,
                          burn_in=120, seed=3)
    names = res.chains.parameter_names
    assert names[:2] == ["beta[1,1]", "beta[1,2]"]
    assert "gamma1[1,1,1]" in names and "gamma2[1,1,2,2]" in names
    assert res.chains.pooled().shape == (240, 2 + 2 + 4)
    again = mcmc_fit_2stage(s1, s2, X, Z1, Z2, n_chains=2, n_samples=120,
                            burn_in=120, seed=3)
    assert np.array_equal(res.chains.pooled(), again.chains.pooled())
