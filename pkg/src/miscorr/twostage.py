"""Two-stage sequential misclassified binary outcomes.

A latent Y in {1, 2} drives a first-stage observation Y*(1) (logistic in
Z1 given Y) and a second-stage observation Y*(2) (logistic in Z2 given
both Y*(1) and Y).  Provides the joint observed-cell probabilities, the
observed-data log-likelihood, posterior weights, the seven-fit EM
estimator with label correction, marginal second-stage accuracy, and the
naive comparison fits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .categories import encode_categories
from .glm import expit, fit_weighted_logistic
from .report import FitReport, observed_info_se
from .single import (DEFAULT_MAX_ITER, DEFAULT_TOL, _run_em_map, compute_pi,
                     compute_pistar)


@dataclass
class TwoStageParams:
    """beta: length p_x+1; gamma1: (p_z1+1, 2) with column j giving
    logit P(Y*(1)=1 | Y=j); gamma2: (p_z2+1, 2, 2) indexed
    [coef, k = first-stage category, j = true category] giving
    logit P(Y*(2)=1 | Y*(1)=k, Y=j)."""

    beta: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        self.gamma1 = np.asarray(self.gamma1, dtype=float)
        self.gamma2 = np.asarray(self.gamma2, dtype=float)
        if self.gamma1.ndim != 2 or self.gamma1.shape[1] != 2:
            raise ValueError("gamma1 must have shape (p_z1+1, 2)")
        if self.gamma2.ndim != 3 or self.gamma2.shape[1:] != (2, 2):
            raise ValueError("gamma2 must have shape (p_z2+1, 2, 2)")
        for a in (self.beta, self.gamma1, self.gamma2):
            if not np.all(np.isfinite(a)):
                raise ValueError("parameters must be finite")

    def flatten(self) -> np.ndarray:
        return np.concatenate([
            self.beta,
            self.gamma1.ravel(order="F"),
            self.gamma2.ravel(order="F"),
        ])

    @classmethod
    def unflatten(cls, vec: np.ndarray, n_beta: int, n_g1: int, n_g2: int):
        vec = np.asarray(vec, dtype=float)
        a = n_beta
        b = a + 2 * n_g1
        return cls(vec[:a].copy(),
                   vec[a:b].reshape((n_g1, 2), order="F").copy(),
                   vec[b:].reshape((n_g2, 2, 2), order="F").copy())

    def unflatten_like(self, vec: np.ndarray) -> "TwoStageParams":
        return TwoStageParams.unflatten(
            vec, self.beta.shape[0], self.gamma1.shape[0], self.gamma2.shape[0])

    def permuted(self) -> "TwoStageParams":
        """Swap latent labels: beta negated, gamma1 columns and gamma2
        true-class slices swapped."""
        return TwoStageParams(-self.beta, self.gamma1[:, ::-1].copy(),
                              self.gamma2[:, :, ::-1].copy())


def compute_pitilde(gamma2, Z2) -> np.ndarray:
    """Second-stage probabilities P(Y*(2)=l | Y*(1)=k, Y=j, Z2).

    Returns an (N, 2, 2, 2) array indexed [subject, l, k, j].
    """
    Z2 = np.asarray(Z2, dtype=float)
    gamma2 = np.asarray(gamma2, dtype=float)
    if Z2.shape[1] != gamma2.shape[0]:
        raise ValueError("gamma2 rows do not match design columns")
    n = Z2.shape[0]
    out = np.empty((n, 2, 2, 2))
    for k in range(2):
        for j in range(2):
            p1 = expit(Z2 @ gamma2[:, k, j])
            out[:, 0, k, j] = p1
            out[:, 1, k, j] = 1.0 - p1
    return out


def joint_obs_prob(params: TwoStageParams, X, Z1, Z2) -> np.ndarray:
    """P(Y*(1)=k, Y*(2)=l | X, Z1, Z2) as an (N, 2, 2) array [i, k, l]."""
    pi = compute_pi(params.beta, X)
    ps1 = compute_pistar(params.gamma1, Z1).probs
    pit = compute_pitilde(params.gamma2, Z2)
    return np.einsum("ilkj,ikj,ij->ikl", pit, ps1, pi)


def observed_loglik_2stage(params: TwoStageParams, X, Z1, Z2,
                           ystar1, ystar2, coding: str = "1,2") -> float:
    """Observed-data log-likelihood over the four (k, l) cells."""
    kidx = encode_categories(ystar1, coding)
    lidx = encode_categories(ystar2, coding)
    cells = joint_obs_prob(params, X, Z1, Z2)
    n = cells.shape[0]
    probs = cells[np.arange(n), kidx, lidx]
    return float(np.sum(np.log(np.maximum(probs, 1e-300))))


def e_step_weights_2stage(params: TwoStageParams, X, Z1, Z2,
                          ystar1, ystar2, coding: str = "1,2") -> np.ndarray:
    """Posterior weights w_ij = P(Y=j | Y*(1), Y*(2), covariates)."""
    kidx = encode_categories(ystar1, coding)
    lidx = encode_categories(ystar2, coding)
    pi = compute_pi(params.beta, np.asarray(X, dtype=float))
    ps1 = compute_pistar(params.gamma1, np.asarray(Z1, dtype=float)).probs
    pit = compute_pitilde(params.gamma2, np.asarray(Z2, dtype=float))
    return _weights_from_tables(pi, ps1, pit, kidx, lidx)


def _weights_from_tables(pi, ps1, pit, kidx, lidx) -> np.ndarray:
    n = pi.shape[0]
    rows = np.arange(n)
    numer = pi * ps1[rows, kidx, :] * pit[rows, lidx, kidx, :]
    denom = numer.sum(axis=1)
    if np.any(denom <= 0):
        raise ValueError("E-step denominator underflow; check parameter scale")
    return numer / denom[:, None]


def label_switch_correct_2stage(params: TwoStageParams, Z1, Z2):
    """Keep the labeling whose first-stage Youden's J is larger."""
    _, sens, spec = compute_pistar(params.gamma1, Z1)
    if sens + spec - 1.0 >= 0.0:
        return params, False
    return params.permuted(), True


def second_stage_accuracy(params: TwoStageParams, X, Z1, Z2):
    """Marginal second-stage sensitivity and specificity.

    X is accepted for interface symmetry; the marginal accuracies
    average over the first-stage outcome given the true class only.
    """
    ps1 = compute_pistar(params.gamma1, np.asarray(Z1, dtype=float)).probs
    pit = compute_pitilde(params.gamma2, np.asarray(Z2, dtype=float))
    sens = float(np.mean(np.sum(pit[:, 0, :, 0] * ps1[:, :, 0], axis=1)))
    spec = float(np.mean(np.sum(pit[:, 1, :, 1] * ps1[:, :, 1], axis=1)))
    return sens, spec


def _param_names_2stage(n_beta: int, n_g1: int, n_g2: int) -> list[str]:
    names = [f"beta_{m + 1}" for m in range(n_beta)]
    for j in (1, 2):
        names += [f"gamma1_{r + 1}{j}" for r in range(n_g1)]
    for j in (1, 2):
        for k in (1, 2):
            names += [f"gamma2_{r + 1}1{k}{j}" for r in range(n_g2)]
    return names


def naive_fit_2stage(ystar1, ystar2, X, Z2, coding: str = "1,2") -> FitReport:
    """Comparison fits ignoring the latent class: logistic of the
    first-stage category on X, and of the second-stage category on Z2
    within first-stage strata."""
    kidx = encode_categories(ystar1, coding)
    lidx = encode_categories(ystar2, coding)
    X = np.asarray(X, dtype=float)
    Z2 = np.asarray(Z2, dtype=float)
    beta_fit = fit_weighted_logistic(X, (kidx == 0).astype(float))
    names = [f"naive_beta_{m + 1}" for m in range(X.shape[1])]
    est = [beta_fit.coefficients]
    ses = [np.sqrt(np.maximum(np.diag(beta_fit.coef_covariance), 0.0))]
    converged = beta_fit.converged
    y2_event = (lidx == 0).astype(float)
    for k in (0, 1):
        rows = kidx == k
        fit = fit_weighted_logistic(Z2[rows], y2_event[rows])
        names += [f"naive_gamma2_{r + 1}{k + 1}" for r in range(Z2.shape[1])]
        est.append(fit.coefficients)
        ses.append(np.sqrt(np.maximum(np.diag(fit.coef_covariance), 0.0)))
        converged = converged and fit.converged
    return FitReport(
        method="naive_2stage",
        parameter_names=names,
        estimates=np.concatenate(est),
        standard_errors=np.concatenate(ses),
        converged=converged,
        iterations=1,
        loglik=float("nan"),
    )


def em_fit_2stage(ystar1, ystar2, X, Z1, Z2, starts: TwoStageParams | None = None,
                  tolerance: float = DEFAULT_TOL,
                  max_iter: int = DEFAULT_MAX_ITER, accel: str = "plain",
                  coding: str = "1,2", compute_se: bool = True) -> FitReport:
    """EM estimate of the two-stage model; the M-step is seven logistic fits.

    The report's extras carry the naive comparison fit and the marginal
    second-stage accuracies.
    """
    X = np.asarray(X, dtype=float)
    Z1 = np.asarray(Z1, dtype=float)
    Z2 = np.asarray(Z2, dtype=float)
    kidx = encode_categories(ystar1, coding)
    lidx = encode_categories(ystar2, coding)
    y1_event = (kidx == 0).astype(float)
    y2_event = (lidx == 0).astype(float)
    if starts is None:
        beta_start = fit_weighted_logistic(X, y1_event).coefficients
        starts = TwoStageParams(beta_start,
                                np.zeros((Z1.shape[1], 2)),
                                np.zeros((Z2.shape[1], 2, 2)))

    stratum = [kidx == 0, kidx == 1]

    def em_step(p: TwoStageParams) -> TwoStageParams:
        pi = compute_pi(p.beta, X)
        ps1 = compute_pistar(p.gamma1, Z1).probs
        pit = compute_pitilde(p.gamma2, Z2)
        w = _weights_from_tables(pi, ps1, pit, kidx, lidx)
        beta = fit_weighted_logistic(X, w[:, 0], start=p.beta).coefficients
        gamma1 = p.gamma1.copy()
        gamma2 = p.gamma2.copy()
        for j in range(2):
            gamma1[:, j] = fit_weighted_logistic(
                Z1, y1_event, weights=w[:, j], start=p.gamma1[:, j]).coefficients
        for k in range(2):
            rows = stratum[k]
            for j in range(2):
                gamma2[:, k, j] = fit_weighted_logistic(
                    Z2[rows], y2_event[rows], weights=w[rows, j],
                    start=p.gamma2[:, k, j]).coefficients
        return TwoStageParams(beta, gamma1, gamma2)

    def loglik(p: TwoStageParams) -> float:
        cells = joint_obs_prob(p, X, Z1, Z2)
        probs = cells[np.arange(cells.shape[0]), kidx, lidx]
        return float(np.sum(np.log(np.maximum(probs, 1e-300))))

    params, converged, iters, path = _run_em_map(
        em_step, loglik, starts, tolerance, max_iter, accel)
    params, applied = label_switch_correct_2stage(params, Z1, Z2)
    _, sens1, spec1 = compute_pistar(params.gamma1, Z1)
    sens2, spec2 = second_stage_accuracy(params, X, Z1, Z2)
    ll = loglik(params)

    n_beta, n_g1, n_g2 = X.shape[1], Z1.shape[1], Z2.shape[1]
    if compute_se:
        template = params

        def ll_of(vec):
            return loglik(template.unflatten_like(vec))
        ses = observed_info_se(ll_of, params.flatten())
    else:
        ses = np.full(params.flatten().shape[0], np.nan)

    return FitReport(
        method="em_2stage",
        parameter_names=_param_names_2stage(n_beta, n_g1, n_g2),
        estimates=params.flatten(),
        standard_errors=ses,
        converged=converged,
        iterations=iters,
        loglik=ll,
        label_correction_applied=applied,
        sensitivity=sens1,
        specificity=spec1,
        loglik_path=path,
        params=params,
        extras={
            "second_stage_sensitivity": sens2,
            "second_stage_specificity": spec2,
            "naive": naive_fit_2stage(ystar1, ystar2, X, Z2, coding),
        },
    )
