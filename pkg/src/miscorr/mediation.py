"""Mediation analysis with a misclassified binary mediator.

The true mediator M in {1, 2} follows a logistic model in (X, C); the
observed mediator M* follows per-class logistic observation mechanisms
in Z; the outcome Y follows a normal, bernoulli, or poisson GLM in
(X, M, C) with an optional exposure-mediator interaction.  Estimators:
an EM algorithm on duplicated data, predictive-value weighting (PVW),
and an OLS covariance correction for continuous outcomes.  Effect
estimates (NIE / NDE / CDE) live here too.

Unlike the outcome-model modules, these functions take raw covariate
columns (exposure vector x, covariate blocks Z and C without intercepts)
and build design matrices internally.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gammaln

from .categories import encode_categories
from .glm import (GlmFit, expit, fit_weighted_linear, fit_weighted_logistic,
                  fit_weighted_poisson)
from .report import FitReport
from .single import (DEFAULT_MAX_ITER, DEFAULT_TOL, SingleOutcomeParams,
                     _run_em_map, compute_pi, compute_pistar, em_fit)

OUTCOME_DISTS = ("normal", "bernoulli", "poisson")


@dataclass
class MediationParams:
    """Coefficients for the mediator, observation, and outcome mechanisms.

    beta: (2 + p_c,), mediator model intercept, exposure, covariates.
    gamma: (p_z + 1, 2), column j gives logit P(M*=1 | M=j).
    theta: outcome coefficients ordered (theta_0, theta_x, theta_m,
    theta_c..., theta_xm when interaction).  sigma is the residual scale
    for normal outcomes, None otherwise.
    """

    beta: np.ndarray
    gamma: np.ndarray
    theta: np.ndarray
    sigma: float | None
    outcome_dist: str
    interaction: bool

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        self.gamma = np.asarray(self.gamma, dtype=float)
        self.theta = np.asarray(self.theta, dtype=float)
        if self.outcome_dist not in OUTCOME_DISTS:
            raise ValueError(f"outcome_dist must be one of {OUTCOME_DISTS}")
        if self.outcome_dist == "normal":
            if self.sigma is None or self.sigma <= 0:
                raise ValueError("normal outcomes need sigma > 0")
        expected = 3 + self.n_covariates + (1 if self.interaction else 0)
        if self.theta.shape[0] != expected:
            raise ValueError(f"theta has length {self.theta.shape[0]}, "
                             f"expected {expected}")

    @property
    def n_covariates(self) -> int:
        return self.beta.shape[0] - 2

    def flatten(self) -> np.ndarray:
        parts = [self.beta, self.gamma.ravel(order="F"), self.theta]
        if self.outcome_dist == "normal":
            parts.append(np.array([self.sigma]))
        return np.concatenate(parts)

    def unflatten_like(self, vec: np.ndarray) -> "MediationParams":
        vec = np.asarray(vec, dtype=float)
        nb = self.beta.shape[0]
        ng = self.gamma.shape[0]
        nt = self.theta.shape[0]
        beta = vec[:nb].copy()
        gamma = vec[nb:nb + 2 * ng].reshape((ng, 2), order="F").copy()
        theta = vec[nb + 2 * ng:nb + 2 * ng + nt].copy()
        sigma = float(vec[-1]) if self.outcome_dist == "normal" else None
        return replace(self, beta=beta, gamma=gamma, theta=theta, sigma=sigma)

    def permuted(self) -> "MediationParams":
        """Swap the latent mediator labels.

        Substituting m -> 1 - m in the outcome linear predictor shifts
        the intercept by theta_m (and theta_x by theta_xm) and negates
        the mediator terms; beta is negated and gamma columns swap.
        """
        theta = self.theta.copy()
        theta[0] = self.theta[0] + self.theta[2]
        theta[2] = -self.theta[2]
        if self.interaction:
            theta[1] = self.theta[1] + self.theta[-1]
            theta[-1] = -self.theta[-1]
        return replace(self, beta=-self.beta, gamma=self.gamma[:, ::-1].copy(),
                       theta=theta)


def _as_block(arr, n: int, name: str) -> np.ndarray:
    """Normalize an optional covariate block to an (n, p) float matrix."""
    if arr is None:
        return np.empty((n, 0))
    out = np.asarray(arr, dtype=float)
    if out.ndim == 1:
        out = out[:, None]
    if out.shape[0] != n:
        raise ValueError(f"{name} has {out.shape[0]} rows, expected {n}")
    return out


def _mediator_design(x, C) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    Cb = _as_block(C, x.shape[0], "C")
    return np.column_stack([np.ones(x.shape[0]), x, Cb])


def _observation_design(Z, n: int) -> np.ndarray:
    Zb = _as_block(Z, n, "Z")
    return np.column_stack([np.ones(n), Zb])


def _outcome_design(x, m01, C, interaction: bool) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    m01 = np.broadcast_to(np.asarray(m01, dtype=float), x.shape)
    Cb = _as_block(C, x.shape[0], "C")
    cols = [np.ones(x.shape[0]), x, m01] + [Cb[:, i] for i in range(Cb.shape[1])]
    if interaction:
        cols.append(x * m01)
    return np.column_stack(cols)


def theta_names(p_c: int, interaction: bool) -> list[str]:
    names = ["theta_0", "theta_x", "theta_m"]
    names += [f"theta_c{i + 1}" for i in range(p_c)]
    if interaction:
        names.append("theta_xm")
    return names


def mediator_probs(beta, gamma, x, C, Z):
    """True-mediator and observation probabilities with their averages.

    Returns (pi, pistar, sensitivity, specificity) where pi is (N, 2)
    and pistar is (N, 2, 2) indexed [subject, observed, true].
    """
    Xd = _mediator_design(x, C)
    Zd = _observation_design(Z, Xd.shape[0])
    pi = compute_pi(beta, Xd)
    pistar, sens, spec = compute_pistar(gamma, Zd)
    return pi, pistar, sens, spec


def _validate_outcome(y: np.ndarray, dist: str) -> None:
    if dist == "bernoulli":
        if not np.all(np.isin(y, (0.0, 1.0))):
            raise ValueError("bernoulli outcomes must be coded 0/1")
    elif dist == "poisson":
        if np.any(y < 0):
            raise ValueError("poisson outcomes must be nonnegative")


def outcome_loglik_contrib(y, x, m, c, theta, sigma, dist: str) -> np.ndarray:
    """Per-subject log density of y with the mediator set to m (1 or 0)."""
    y = np.asarray(y, dtype=float).reshape(-1)
    _validate_outcome(y, dist)
    Cb = _as_block(c, y.shape[0], "c")
    interaction = len(theta) == 4 + Cb.shape[1]
    D = _outcome_design(x, m, c, interaction)
    lp = D @ np.asarray(theta, dtype=float)
    if dist == "normal":
        return -0.5 * np.log(2.0 * np.pi * sigma ** 2) - (y - lp) ** 2 / (2.0 * sigma ** 2)
    if dist == "bernoulli":
        mu = expit(lp)
        return y * np.log(mu) + (1.0 - y) * np.log1p(-mu)
    mu_log = np.clip(lp, -30.0, 30.0)
    return y * mu_log - np.exp(mu_log) - gammaln(y + 1.0)


def observed_loglik_mediation(params: MediationParams, mstar, y, x, Z, C,
                              coding: str = "1,2") -> float:
    """Observed-data log-likelihood, enumerating the latent mediator."""
    lidx = encode_categories(mstar, coding)
    Xd = _mediator_design(x, C)
    Zd = _observation_design(Z, Xd.shape[0])
    log_num = _posterior_log_numerators(params, lidx, y, x, Xd, Zd, C)
    return float(np.sum(np.logaddexp(log_num[:, 0], log_num[:, 1])))


def _posterior_log_numerators(params, lidx, y, x, Xd, Zd, C) -> np.ndarray:
    """log[ pi_ij * pistar_i(observed|j) * f(y_i | m=j) ] for j = 1, 2."""
    pi = compute_pi(params.beta, Xd)
    pistar = compute_pistar(params.gamma, Zd).probs
    rows = np.arange(Xd.shape[0])
    obs = pistar[rows, lidx, :]
    out = np.empty((Xd.shape[0], 2))
    for j, m_num in ((0, 1.0), (1, 0.0)):
        f = outcome_loglik_contrib(y, x, m_num, C, params.theta, params.sigma,
                                   params.outcome_dist)
        out[:, j] = (np.log(np.maximum(pi[:, j], 1e-300))
                     + np.log(np.maximum(obs[:, j], 1e-300)) + f)
    return out


def e_step_weights_mediation(params: MediationParams, mstar, y, x, Z, C,
                             coding: str = "1,2") -> np.ndarray:
    """Posterior P(M=j | M*, Y, covariates); rows sum to 1."""
    lidx = encode_categories(mstar, coding)
    Xd = _mediator_design(x, C)
    Zd = _observation_design(Z, Xd.shape[0])
    log_num = _posterior_log_numerators(params, lidx, y, x, Xd, Zd, C)
    log_den = np.logaddexp(log_num[:, 0], log_num[:, 1])
    return np.exp(log_num - log_den[:, None])


def label_switch_correct_mediation(params: MediationParams, Z, n: int):
    """Keep the mediator labeling with the larger Youden's J."""
    Zd = _observation_design(Z, n)
    _, sens, spec = compute_pistar(params.gamma, Zd)
    if sens + spec - 1.0 >= 0.0:
        return params, False
    return params.permuted(), True


def _fit_outcome(D, y, w, dist, start=None) -> GlmFit:
    if dist == "normal":
        return fit_weighted_linear(D, y, w)
    if dist == "bernoulli":
        return fit_weighted_logistic(D, y, w, start=start)
    return fit_weighted_poisson(D, y, w, start=start)


def _default_starts(lidx, y, x, Z, C, dist, interaction) -> MediationParams:
    Xd = _mediator_design(x, C)
    Zd = _observation_design(Z, Xd.shape[0])
    m_event = (lidx == 0).astype(float)
    beta = fit_weighted_logistic(Xd, m_event).coefficients
    gamma = np.zeros((Zd.shape[1], 2))
    D = _outcome_design(x, m_event, C, interaction)
    fit = _fit_outcome(D, y, None, dist)
    sigma = fit.sigma if dist == "normal" else None
    return MediationParams(beta, gamma, fit.coefficients, sigma, dist,
                           interaction)


def _param_names_mediation(p_beta: int, p_gamma: int, p_c: int,
                           interaction: bool, with_sigma: bool) -> list[str]:
    names = [f"beta_{m}" for m in range(p_beta)]
    for j in (1, 2):
        names += [f"gamma{r + 1}{j}" for r in range(p_gamma)]
    names += theta_names(p_c, interaction)
    if with_sigma:
        names.append("sigma")
    return names


def em_fit_mediation(mstar, y, x, Z, C=None, starts: MediationParams | None = None,
                     dist: str = "normal", interaction: bool = False,
                     tolerance: float = DEFAULT_TOL,
                     max_iter: int = DEFAULT_MAX_ITER, accel: str = "plain",
                     coding: str = "1,2") -> FitReport:
    """EM estimate of the misclassified-mediator mediation model.

    The M-step refits the mediator and observation mechanisms as weighted
    logistic regressions and the outcome mechanism as a weighted GLM on
    data duplicated over the two latent mediator values.  SEs are left
    NaN; use the bootstrap for uncertainty.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    _validate_outcome(y, dist)
    lidx = encode_categories(mstar, coding)
    x = np.asarray(x, dtype=float).reshape(-1)
    Xd = _mediator_design(x, C)
    Zd = _observation_design(Z, Xd.shape[0])
    m_event = (lidx == 0).astype(float)
    if starts is None:
        starts = _default_starts(lidx, y, x, Z, C, dist, interaction)
    if starts.outcome_dist != dist or starts.interaction != interaction:
        raise ValueError("starts disagree with dist/interaction flags")

    D_dup = np.vstack([_outcome_design(x, 1.0, C, interaction),
                       _outcome_design(x, 0.0, C, interaction)])
    y_dup = np.concatenate([y, y])

    def em_step(p: MediationParams) -> MediationParams:
        log_num = _posterior_log_numerators(p, lidx, y, x, Xd, Zd, C)
        log_den = np.logaddexp(log_num[:, 0], log_num[:, 1])
        w = np.exp(log_num - log_den[:, None])
        beta = fit_weighted_logistic(Xd, w[:, 0], start=p.beta).coefficients
        gamma = p.gamma.copy()
        for j in range(2):
            gamma[:, j] = fit_weighted_logistic(
                Zd, m_event, weights=w[:, j], start=p.gamma[:, j]).coefficients
        w_dup = np.concatenate([w[:, 0], w[:, 1]])
        fit = _fit_outcome(D_dup, y_dup, w_dup, dist, start=p.theta)
        sigma = fit.sigma if dist == "normal" else None
        return replace(p, beta=beta, gamma=gamma, theta=fit.coefficients,
                       sigma=sigma)

    def loglik(p: MediationParams) -> float:
        log_num = _posterior_log_numerators(p, lidx, y, x, Xd, Zd, C)
        return float(np.sum(np.logaddexp(log_num[:, 0], log_num[:, 1])))

    params, converged, iters, path = _run_em_map(
        em_step, loglik, starts, tolerance, max_iter, accel)
    params, applied = label_switch_correct_mediation(params, Z, Xd.shape[0])
    _, sens, spec = compute_pistar(params.gamma, Zd)
    ll = loglik(params)

    p_c = Xd.shape[1] - 2
    names = _param_names_mediation(Xd.shape[1], Zd.shape[1], p_c, interaction,
                                   with_sigma=dist == "normal")
    return FitReport(
        method="em_mediation",
        parameter_names=names,
        estimates=params.flatten(),
        standard_errors=np.full(len(names), np.nan),
        converged=converged,
        iterations=iters,
        loglik=ll,
        label_correction_applied=applied,
        sensitivity=sens,
        specificity=spec,
        loglik_path=path,
        params=params,
    )


def _mediator_model_fit(lidx, x, Z, C, starts, coding="1,2",
                        tolerance=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER,
                        accel="plain"):
    """Shared step (1) of PVW and OLS: the misclassification EM on M*."""
    Xd = _mediator_design(x, C)
    Zd = _observation_design(Z, Xd.shape[0])
    mstar_internal = np.where(lidx == 0, 1, 2)
    beta_start = starts.beta if isinstance(starts, SingleOutcomeParams) else None
    gamma_start = starts.gamma if isinstance(starts, SingleOutcomeParams) else None
    fit = em_fit(mstar_internal, Xd, Zd, beta_start=beta_start,
                 gamma_start=gamma_start, tolerance=tolerance,
                 max_iter=max_iter, accel=accel, compute_se=False)
    return fit, Xd, Zd


def _two_way_interaction_design(y, x, C) -> np.ndarray:
    """Intercept, main effects, and all two-way products of {Y, X, C}."""
    base = [np.asarray(y, dtype=float).reshape(-1),
            np.asarray(x, dtype=float).reshape(-1)]
    Cb = _as_block(C, base[0].shape[0], "C")
    base += [Cb[:, i] for i in range(Cb.shape[1])]
    cols = [np.ones(base[0].shape[0])] + list(base)
    for a in range(len(base)):
        for b in range(a + 1, len(base)):
            cols.append(base[a] * base[b])
    return np.column_stack(cols)


def pvw_fit(mstar, y, x, Z, C=None, starts: SingleOutcomeParams | None = None,
            dist: str = "normal", interaction: bool = False,
            tolerance: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
            accel: str = "plain", coding: str = "1,2") -> FitReport:
    """Predictive-value weighting estimate of the outcome mechanism.

    Per-subject PPV/NPV are built from the EM-estimated classification
    rates and a logistic model for M* given all observed variables; the
    outcome GLM is fit on duplicated data weighted by those values.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    _validate_outcome(y, dist)
    lidx = encode_categories(mstar, coding)
    x = np.asarray(x, dtype=float).reshape(-1)
    med_fit, Xd, Zd = _mediator_model_fit(lidx, x, Z, C, starts, coding,
                                          tolerance, max_iter, accel)
    gamma_w = med_fit.params.gamma
    sens_i = expit(Zd @ gamma_w[:, 0])
    spec_i = 1.0 - expit(Zd @ gamma_w[:, 1])

    mstar_event = (lidx == 0).astype(float)
    D_obs = _two_way_interaction_design(y, x, C)
    marg_fit = fit_weighted_logistic(D_obs, mstar_event)
    p_obs = expit(D_obs @ marg_fit.coefficients)

    ppv, npv = predictive_values(sens_i, spec_i, p_obs)

    # Original copy carries M=1, duplicate carries M=0; weights follow the
    # observed M* cell.
    w_m1 = np.where(mstar_event == 1.0, ppv, 1.0 - npv)
    w_m0 = np.where(mstar_event == 1.0, 1.0 - ppv, npv)
    D_dup = np.vstack([_outcome_design(x, 1.0, C, interaction),
                       _outcome_design(x, 0.0, C, interaction)])
    fit = _fit_outcome(D_dup, np.concatenate([y, y]),
                       np.concatenate([w_m1, w_m0]), dist)

    p_c = Xd.shape[1] - 2
    names = ([f"beta_{m}" for m in range(Xd.shape[1])]
             + [f"gamma{r + 1}{j}" for j in (1, 2) for r in range(Zd.shape[1])]
             + theta_names(p_c, interaction))
    estimates = np.concatenate([med_fit.params.flatten(), fit.coefficients])
    return FitReport(
        method="pvw",
        parameter_names=names,
        estimates=estimates,
        standard_errors=np.full(len(names), np.nan),
        converged=bool(med_fit.converged and fit.converged),
        iterations=med_fit.iterations,
        loglik=float("nan"),
        label_correction_applied=med_fit.label_correction_applied,
        sensitivity=float(np.mean(sens_i)),
        specificity=float(np.mean(spec_i)),
        extras={"ppv": ppv, "npv": npv,
                "theta": fit.coefficients,
                "mediator_params": med_fit.params},
    )


def predictive_values(sens, spec, p_obs):
    """PPV/NPV from classification rates and P(M*=1 | observed data).

    Values outside [0, 1] from numerical degeneracy are clamped with a
    warning.
    """
    sens = np.asarray(sens, dtype=float)
    spec = np.asarray(spec, dtype=float)
    p = np.asarray(p_obs, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = ((spec - 1.0) * (p - 1.0)) / (spec * p)
        b = ((sens - 1.0) * p) / (sens * (p - 1.0))
        denom = a * b - 1.0
        ppv = (a - 1.0) / denom
        npv = (b - 1.0) / denom
    ppv = np.where(np.isfinite(ppv), ppv, 1.0)
    npv = np.where(np.isfinite(npv), npv, 1.0)
    if np.any(ppv < 0) or np.any(ppv > 1) or np.any(npv < 0) or np.any(npv > 1):
        warnings.warn("PPV/NPV outside [0, 1]; clamping", RuntimeWarning)
        ppv = np.clip(ppv, 0.0, 1.0)
        npv = np.clip(npv, 0.0, 1.0)
    return ppv, npv


def ols_correct(mstar, y, x, Z, C=None,
                starts: SingleOutcomeParams | None = None,
                coding: str = "1,2", interaction: bool = False,
                tolerance: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                accel: str = "plain") -> FitReport:
    """Covariance-based OLS correction for continuous outcomes.

    Solves the moment system relating observed-mediator covariances to
    the outcome coefficients, using average classification rates from
    the misclassification EM.  No interaction term is supported.
    """
    if interaction:
        raise ValueError("the OLS correction cannot estimate an "
                         "exposure-mediator interaction term")
    y = np.asarray(y, dtype=float).reshape(-1)
    lidx = encode_categories(mstar, coding)
    x = np.asarray(x, dtype=float).reshape(-1)
    med_fit, Xd, Zd = _mediator_model_fit(lidx, x, Z, C, starts, coding,
                                          tolerance, max_iter, accel)
    sens = med_fit.sensitivity
    spec = med_fit.specificity
    pi21 = 1.0 - sens
    pi12 = 1.0 - spec

    mstar01 = (lidx == 0).astype(float)
    pstar1 = float(np.mean(mstar01))
    denom = 1.0 - pi12 - pi21
    zeta = 1.0 - ((pstar1 - pi12) * (1.0 - pi21 - pstar1)
                  / (denom * (1.0 - pstar1) * pstar1))
    xi = (pi21 + pi12) / denom

    D = np.column_stack([x] + ([] if C is None else
                               [_as_block(C, x.shape[0], "C")]))
    n = x.shape[0]
    mc = mstar01 - mstar01.mean()
    Dc = D - D.mean(axis=0)
    yc = y - y.mean()
    s_mm = float(mc @ mc) / n
    s_md = (mc @ Dc) / n
    s_dd = (Dc.T @ Dc) / n
    s_ym = float(yc @ mc) / n
    s_yd = (yc @ Dc) / n

    d = D.shape[1]
    system = np.empty((d + 1, d + 1))
    system[0, 0] = (1.0 - zeta) * s_mm
    system[0, 1:] = s_md
    system[1:, 0] = (1.0 + xi) * s_md
    system[1:, 1:] = s_dd
    rhs = np.concatenate([[s_ym], s_yd])
    try:
        sol = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as err:
        raise ValueError("OLS correction system is singular") from err
    theta_m = float(sol[0])
    theta_d = sol[1:]
    theta_0 = (float(np.mean(y))
               - theta_m * (float(np.mean(mstar01)) - pi12) / denom
               - float(D.mean(axis=0) @ theta_d))

    p_c = Xd.shape[1] - 2
    theta = np.concatenate([[theta_0, theta_d[0], theta_m], theta_d[1:]])
    names = ([f"beta_{m}" for m in range(Xd.shape[1])]
             + [f"gamma{r + 1}{j}" for j in (1, 2) for r in range(Zd.shape[1])]
             + theta_names(p_c, interaction=False))
    return FitReport(
        method="ols",
        parameter_names=names,
        estimates=np.concatenate([med_fit.params.flatten(), theta]),
        standard_errors=np.full(len(names), np.nan),
        converged=med_fit.converged,
        iterations=med_fit.iterations,
        loglik=float("nan"),
        label_correction_applied=med_fit.label_correction_applied,
        sensitivity=sens,
        specificity=spec,
        extras={"zeta": zeta, "xi": xi, "theta": theta,
                "mediator_params": med_fit.params},
    )


@dataclass
class EffectEstimates:
    """Natural indirect, natural direct, and controlled direct effects.

    scale is "difference" for normal outcomes, "odds-ratio" for
    bernoulli, and "rate-ratio" for poisson.
    """

    nie: float
    nde: float
    cde: float
    scale: str


def _mediator_prob_at(params: MediationParams, x_val: float,
                      c: np.ndarray) -> float:
    lp = params.beta[0] + params.beta[1] * x_val
    if c.size:
        lp = lp + float(params.beta[2:] @ c)
    return float(expit(lp))


def _resolve_profile(params: MediationParams, covariate_profile, C):
    p_c = params.n_covariates
    if covariate_profile is not None:
        c = np.asarray(covariate_profile, dtype=float).reshape(-1)
    elif C is not None:
        c = np.asarray(_as_block(C, np.asarray(C).shape[0], "C").mean(axis=0))
    elif p_c == 0:
        c = np.empty(0)
    else:
        raise ValueError("pass covariate_profile or C to set the "
                         "covariate values for effect estimation")
    if c.shape[0] != p_c:
        raise ValueError(f"covariate profile has length {c.shape[0]}, "
                         f"expected {p_c}")
    return c


def effect_estimates(params: MediationParams, x0: float = 0.0, x1: float = 1.0,
                     m_level: float | None = None, covariate_profile=None,
                     C=None) -> EffectEstimates:
    """Mediation effects at a covariate profile (sample averages of C by
    default).

    Normal outcomes give mean differences; bernoulli outcomes give the
    standard odds-ratio approximations; poisson outcomes give exact rate
    ratios.  m_level sets the mediator value for the controlled direct
    effect and is required when the model has an interaction term.
    """
    c = _resolve_profile(params, covariate_profile, C)
    if m_level is None:
        if params.interaction:
            raise ValueError("m_level is required for the CDE when the "
                             "outcome model has an interaction term")
        m_level = 0.0
    th = params.theta
    theta_x = th[1]
    theta_m = th[2]
    theta_xm = th[-1] if params.interaction else 0.0
    p0 = _mediator_prob_at(params, x0, c)
    p1 = _mediator_prob_at(params, x1, c)
    dx = x1 - x0

    if params.outcome_dist == "normal":
        cde = (theta_x + theta_xm * m_level) * dx
        nde = (theta_x + theta_xm * p0) * dx
        nie = (theta_m + theta_xm * x1) * (p1 - p0)
        return EffectEstimates(nie, nde, cde, "difference")

    if params.outcome_dist == "bernoulli":
        # The theta_C terms cancel in every odds ratio; only the mediator
        # model's linear predictor at the profile enters.
        base = params.beta[0] + (params.beta[2:] @ c if c.size else 0.0)
        cde = float(np.exp((theta_x + theta_xm * m_level) * dx))
        nde = float(np.exp(theta_x * dx)
                    * (1.0 + np.exp(theta_m + theta_xm * x1 + base
                                    + params.beta[1] * x0))
                    / (1.0 + np.exp(theta_m + theta_xm * x0 + base
                                    + params.beta[1] * x0)))
        nie = float((1.0 + np.exp(base + params.beta[1] * x0))
                    * (1.0 + np.exp(theta_m + theta_xm * x1 + base
                                    + params.beta[1] * x1))
                    / ((1.0 + np.exp(base + params.beta[1] * x1))
                       * (1.0 + np.exp(theta_m + theta_xm * x1 + base
                                       + params.beta[1] * x0))))
        return EffectEstimates(nie, nde, cde, "odds-ratio")

    # Poisson, log link: rate ratios are exact two-point mixtures over M.
    def mix(p_m, x_val):
        return (1.0 - p_m) + p_m * np.exp(theta_m + theta_xm * x_val)

    cde = float(np.exp((theta_x + theta_xm * m_level) * dx))
    nde = float(np.exp(theta_x * dx) * mix(p0, x1) / mix(p0, x0))
    nie = float(mix(p1, x1) / mix(p0, x1))
    return EffectEstimates(nie, nde, cde, "rate-ratio")
