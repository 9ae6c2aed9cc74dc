"""Single misclassified binary outcome model.

The true outcome Y in {1, 2} follows a logistic model in X; the observed
outcome Y* follows per-class logistic observation mechanisms in Z.  This
module computes the response probabilities, the observed-data
log-likelihood, posterior class weights, the EM estimator with
label-switching correction, the naive / perfect-specificity /
perfect-sensitivity comparison fits, and per-subject classification
probability tables.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
import pandas as pd

from .categories import encode_categories
from .glm import expit, fit_weighted_logistic
from .report import FitReport, observed_info_se

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 1500

# Constraint modes for the EM engine.  The perfect-specificity fit pins
# P(Y*=1 | Y=2) at 0, the perfect-sensitivity fit pins P(Y*=2 | Y=1) at 0.
_FULL = "full"
_PERFECT_SPEC = "perfect_spec"
_PERFECT_SENS = "perfect_sens"


@dataclass
class SingleOutcomeParams:
    """Coefficients for the true-outcome and observation mechanisms.

    beta: length p_x+1.  gamma: (p_z+1, 2); column j gives the logit of
    P(Y*=1 | Y=j).
    """

    beta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        self.gamma = np.asarray(self.gamma, dtype=float)
        if self.gamma.ndim != 2 or self.gamma.shape[1] != 2:
            raise ValueError("gamma must have shape (p_z+1, 2)")
        if not (np.all(np.isfinite(self.beta)) and np.all(np.isfinite(self.gamma))):
            raise ValueError("parameters must be finite")

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.beta, self.gamma.ravel(order="F")])

    @classmethod
    def unflatten(cls, vec: np.ndarray, n_beta: int, n_gamma_rows: int):
        beta = vec[:n_beta]
        gamma = vec[n_beta:].reshape((n_gamma_rows, 2), order="F")
        return cls(beta.copy(), gamma.copy())

    def permuted(self) -> "SingleOutcomeParams":
        """Swap the latent class labels: beta negated, gamma columns swapped."""
        return SingleOutcomeParams(-self.beta, self.gamma[:, ::-1].copy())


class PistarResult(NamedTuple):
    probs: np.ndarray        # (N, 2, 2) indexed [subject, observed k, true j]
    sensitivity: float       # average P(Y*=1 | Y=1)
    specificity: float       # average P(Y*=2 | Y=2)


def compute_pi(beta, X) -> np.ndarray:
    """True-class probabilities, columns (P(Y=1|X), P(Y=2|X))."""
    X = np.asarray(X, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if X.shape[1] != beta.shape[0]:
        raise ValueError("beta length does not match design columns")
    p1 = expit(X @ beta)
    return np.column_stack([p1, 1.0 - p1])


def compute_pistar(gamma, Z) -> PistarResult:
    """Observation probabilities P(Y*=k | Y=j, Z) plus their averages."""
    Z = np.asarray(Z, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if Z.shape[1] != gamma.shape[0]:
        raise ValueError("gamma rows do not match design columns")
    probs = _pistar_table(gamma, Z, _FULL)
    return PistarResult(probs,
                        float(np.mean(probs[:, 0, 0])),
                        float(np.mean(probs[:, 1, 1])))


def _pistar_table(gamma, Z, mode: str) -> np.ndarray:
    n = Z.shape[0]
    table = np.empty((n, 2, 2))
    if mode == _FULL:
        s1 = expit(Z @ gamma[:, 0])
        s2 = expit(Z @ gamma[:, 1])
    elif mode == _PERFECT_SPEC:
        s1 = expit(Z @ gamma[:, 0])
        s2 = np.zeros(n)
    elif mode == _PERFECT_SENS:
        s1 = np.ones(n)
        s2 = expit(Z @ gamma[:, 1])
    else:
        raise ValueError(f"unknown mode {mode!r}")
    table[:, 0, 0] = s1
    table[:, 0, 1] = s2
    table[:, 1, 0] = 1.0 - s1
    table[:, 1, 1] = 1.0 - s2
    return table


def _observed_loglik_table(pi, pistar, kidx) -> float:
    n = pi.shape[0]
    marg = np.einsum("ij,ij->i", pistar[np.arange(n), kidx, :], pi)
    return float(np.sum(np.log(np.maximum(marg, 1e-300))))


def observed_loglik(params: SingleOutcomeParams, X, Z, ystar,
                    coding: str = "1,2") -> float:
    """Observed-data log-likelihood sum_i log sum_j pistar_ikj * pi_ij."""
    kidx = encode_categories(ystar, coding)
    pi = compute_pi(params.beta, X)
    pistar = _pistar_table(params.gamma, np.asarray(Z, dtype=float), _FULL)
    return _observed_loglik_table(pi, pistar, kidx)


def _weights_from_tables(pi, pistar, kidx) -> np.ndarray:
    n = pi.shape[0]
    numer = pistar[np.arange(n), kidx, :] * pi
    denom = numer.sum(axis=1)
    if np.any(denom <= 0):
        raise ValueError("E-step denominator underflow; check parameter scale")
    return numer / denom[:, None]


def e_step_weights(params: SingleOutcomeParams, X, Z, ystar,
                   coding: str = "1,2") -> np.ndarray:
    """Posterior membership weights w_ij = P(Y=j | Y*, X, Z); rows sum to 1."""
    kidx = encode_categories(ystar, coding)
    pi = compute_pi(params.beta, X)
    pistar = _pistar_table(params.gamma, np.asarray(Z, dtype=float), _FULL)
    return _weights_from_tables(pi, pistar, kidx)


def label_switch_correct(params: SingleOutcomeParams, Z):
    """Pick the labeling (identity vs permuted) with the larger Youden's J."""
    _, sens, spec = compute_pistar(params.gamma, Z)
    if sens + spec - 1.0 >= 0.0:
        return params, False
    return params.permuted(), True


def _em_engine(kidx, X, Z, beta_start, gamma_start, tolerance, max_iter,
               accel, mode) -> tuple[SingleOutcomeParams, bool, int, list[float]]:
    """Run the EM map to a fixed point; returns params and diagnostics."""
    X = np.asarray(X, dtype=float)
    Z = np.asarray(Z, dtype=float)
    y_event = (kidx == 0).astype(float)

    def em_step(p: SingleOutcomeParams) -> SingleOutcomeParams:
        pi = compute_pi(p.beta, X)
        pistar = _pistar_table(p.gamma, Z, mode)
        w = _weights_from_tables(pi, pistar, kidx)
        beta = fit_weighted_logistic(X, w[:, 0], start=p.beta).coefficients
        gamma = p.gamma.copy()
        if mode != _PERFECT_SENS:
            gamma[:, 0] = fit_weighted_logistic(
                Z, y_event, weights=w[:, 0], start=p.gamma[:, 0]).coefficients
        if mode != _PERFECT_SPEC:
            gamma[:, 1] = fit_weighted_logistic(
                Z, y_event, weights=w[:, 1], start=p.gamma[:, 1]).coefficients
        return SingleOutcomeParams(beta, gamma)

    def loglik(p: SingleOutcomeParams) -> float:
        pi = compute_pi(p.beta, X)
        pistar = _pistar_table(p.gamma, Z, mode)
        return _observed_loglik_table(pi, pistar, kidx)

    params = SingleOutcomeParams(beta_start, gamma_start)
    return _run_em_map(em_step, loglik, params, tolerance, max_iter, accel)


def _run_em_map(em_step: Callable, loglik: Callable, params,
                tolerance: float, max_iter: int, accel: str):
    """Shared fixed-point driver: plain EM loop or guarded SQUAREM."""
    if accel not in ("plain", "squarem"):
        raise ValueError("accel must be 'plain' or 'squarem'")
    path = [loglik(params)]
    converged = False
    it = 0

    if accel == "plain":
        while it < max_iter:
            new = em_step(params)
            it += 1
            delta = float(np.max(np.abs(new.flatten() - params.flatten())))
            params = new
            path.append(loglik(params))
            if delta < tolerance:
                converged = True
                break
        return params, converged, it, path

    # Guarded SQUAREM: two EM sweeps give an extrapolated proposal, a third
    # stabilizes it; fall back to the plain second sweep when the proposal
    # does not improve the observed log-likelihood.
    while it < max_iter:
        t0 = params
        t1 = em_step(t0)
        it += 1
        if float(np.max(np.abs(t1.flatten() - t0.flatten()))) < tolerance:
            params = t1
            path.append(loglik(params))
            converged = True
            break
        t2 = em_step(t1)
        it += 1
        d21 = float(np.max(np.abs(t2.flatten() - t1.flatten())))
        if d21 < tolerance:
            params = t2
            path.append(loglik(params))
            converged = True
            break
        r = t1.flatten() - t0.flatten()
        v = (t2.flatten() - t1.flatten()) - r
        vnorm = float(np.linalg.norm(v))
        if vnorm == 0.0:
            params = t2
            path.append(loglik(params))
            continue
        alpha = min(-1.0, -float(np.linalg.norm(r)) / vnorm)
        proposal = t0.flatten() - 2.0 * alpha * r + alpha ** 2 * v
        accepted = t2
        extrapolated = False
        try:
            cand = em_step(_like(params, proposal))
            it += 1
            if np.all(np.isfinite(cand.flatten())) and loglik(cand) >= loglik(t2) - 1e-8:
                accepted = cand
                extrapolated = True
        except (ValueError, np.linalg.LinAlgError):
            pass
        # a rejected proposal leaves accepted == t2, which says nothing
        # about convergence; only a small accepted jump does
        if extrapolated and float(np.max(np.abs(accepted.flatten()
                                                - t2.flatten()))) < tolerance:
            converged = True
            params = accepted
            path.append(loglik(params))
            break
        params = accepted
        path.append(loglik(params))
    return params, converged, it, path


def _like(template, vec: np.ndarray):
    """Rebuild a params object of the template's shape from a flat vector."""
    if isinstance(template, SingleOutcomeParams):
        return SingleOutcomeParams.unflatten(
            vec, template.beta.shape[0], template.gamma.shape[0])
    return template.unflatten_like(vec)


def _param_names(p_x: int, p_z: int, mode: str = _FULL,
                 prefix: str = "") -> list[str]:
    names = [f"{prefix}beta{m + 1}" for m in range(p_x)]
    cols = {"full": (1, 2), _PERFECT_SPEC: (1,), _PERFECT_SENS: (2,)}[mode]
    for j in cols:
        names += [f"{prefix}gamma{r + 1}{j}" for r in range(p_z)]
    return names


def _free_vector(params: SingleOutcomeParams, mode: str) -> np.ndarray:
    if mode == _FULL:
        return params.flatten()
    col = 0 if mode == _PERFECT_SPEC else 1
    return np.concatenate([params.beta, params.gamma[:, col]])


def _from_free_vector(vec, n_beta, n_gamma_rows, mode) -> SingleOutcomeParams:
    if mode == _FULL:
        return SingleOutcomeParams.unflatten(vec, n_beta, n_gamma_rows)
    gamma = np.zeros((n_gamma_rows, 2))
    col = 0 if mode == _PERFECT_SPEC else 1
    gamma[:, col] = vec[n_beta:]
    return SingleOutcomeParams(vec[:n_beta].copy(), gamma)


def em_fit(ystar, X, Z, beta_start=None, gamma_start=None,
           tolerance: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
           accel: str = "plain", coding: str = "1,2",
           compute_se: bool = True) -> FitReport:
    """EM estimate of the single misclassified-outcome model.

    Starts default to the naive logistic fit for beta and zeros for gamma.
    The label-switching correction is applied to the converged estimate and
    SEs come from the numerical observed information at the corrected value.
    """
    X = np.asarray(X, dtype=float)
    Z = np.asarray(Z, dtype=float)
    kidx = encode_categories(ystar, coding)
    y_event = (kidx == 0).astype(float)
    if beta_start is None:
        beta_start = fit_weighted_logistic(X, y_event).coefficients
    if gamma_start is None:
        gamma_start = np.zeros((Z.shape[1], 2))
    params, converged, iters, path = _em_engine(
        kidx, X, Z, beta_start, gamma_start, tolerance, max_iter, accel, _FULL)
    params, applied = label_switch_correct(params, Z)
    _, sens, spec = compute_pistar(params.gamma, Z)
    ll = observed_loglik(params, X, Z, ystar, coding)

    n_beta, n_gamma = X.shape[1], Z.shape[1]
    if compute_se:
        def ll_of(vec):
            return _free_loglik(vec, n_beta, n_gamma, _FULL, X, Z, kidx)
        ses = observed_info_se(ll_of, params.flatten())
    else:
        ses = np.full(n_beta + 2 * n_gamma, np.nan)

    return FitReport(
        method="em",
        parameter_names=_param_names(n_beta, n_gamma),
        estimates=params.flatten(),
        standard_errors=ses,
        converged=converged,
        iterations=iters,
        loglik=ll,
        label_correction_applied=applied,
        sensitivity=sens,
        specificity=spec,
        loglik_path=path,
        params=params,
    )


def _free_loglik(vec, n_beta, n_gamma_rows, mode, X, Z, kidx) -> float:
    p = _from_free_vector(np.asarray(vec, dtype=float), n_beta, n_gamma_rows, mode)
    pi = compute_pi(p.beta, X)
    pistar = _pistar_table(p.gamma, Z, mode)
    return _observed_loglik_table(pi, pistar, kidx)


def _constrained_fit(kidx, X, Z, mode, tolerance, max_iter,
                     compute_se) -> FitReport:
    y_event = (kidx == 0).astype(float)
    beta_start = fit_weighted_logistic(X, y_event).coefficients
    gamma_start = np.zeros((Z.shape[1], 2))
    params, converged, iters, path = _em_engine(
        kidx, X, Z, beta_start, gamma_start, tolerance, max_iter, "plain", mode)
    pistar = _pistar_table(params.gamma, Z, mode)
    sens = float(np.mean(pistar[:, 0, 0]))
    spec = float(np.mean(pistar[:, 1, 1]))
    ll = _observed_loglik_table(compute_pi(params.beta, X), pistar, kidx)
    n_beta, n_gamma = X.shape[1], Z.shape[1]
    free = _free_vector(params, mode)
    if compute_se:
        def ll_of(vec):
            return _free_loglik(vec, n_beta, n_gamma, mode, X, Z, kidx)
        ses = observed_info_se(ll_of, free)
    else:
        ses = np.full(free.shape[0], np.nan)
    method = ("perfect_specificity" if mode == _PERFECT_SPEC
              else "perfect_sensitivity")
    return FitReport(
        method=method,
        parameter_names=_param_names(n_beta, n_gamma, mode),
        estimates=free,
        standard_errors=ses,
        converged=converged,
        iterations=iters,
        loglik=ll,
        sensitivity=sens,
        specificity=spec,
        loglik_path=path,
        params=params,
    )


def naive_fit(ystar, X, coding: str = "1,2") -> FitReport:
    """Plain logistic regression of the observed category on X."""
    kidx = encode_categories(ystar, coding)
    y_event = (kidx == 0).astype(float)
    fit = fit_weighted_logistic(np.asarray(X, dtype=float), y_event)
    ses = np.sqrt(np.maximum(np.diag(fit.coef_covariance), 0.0))
    return FitReport(
        method="naive",
        parameter_names=[f"beta{m + 1}" for m in range(X.shape[1])],
        estimates=fit.coefficients,
        standard_errors=ses,
        converged=fit.converged,
        iterations=fit.iterations,
        loglik=-0.5 * fit.deviance,
    )


def comparison_fits(ystar, X, Z, tolerance: float = DEFAULT_TOL,
                    max_iter: int = DEFAULT_MAX_ITER, coding: str = "1,2",
                    compute_se: bool = True):
    """Naive, perfect-specificity, and perfect-sensitivity reference fits."""
    kidx = encode_categories(ystar, coding)
    X = np.asarray(X, dtype=float)
    Z = np.asarray(Z, dtype=float)
    naive = naive_fit(ystar, X, coding)
    pspec = _constrained_fit(kidx, X, Z, _PERFECT_SPEC, tolerance, max_iter,
                             compute_se)
    psens = _constrained_fit(kidx, X, Z, _PERFECT_SENS, tolerance, max_iter,
                             compute_se)
    return naive, pspec, psens


def misclassification_prob(gamma, Z, subject_label: str = "Subject",
                           true_label: str = "Y",
                           obs_label: str = "Ystar") -> pd.DataFrame:
    """Per-subject P(observed=k | true=j) in long format for grouped means."""
    probs, _, _ = compute_pistar(gamma, Z)
    n = probs.shape[0]
    rows = []
    for j in (1, 2):
        for k in (1, 2):
            rows.append(pd.DataFrame({
                subject_label: np.arange(1, n + 1),
                true_label: j,
                obs_label: k,
                "Probability": probs[:, k - 1, j - 1],
            }))
    return pd.concat(rows, ignore_index=True)


def true_classification_prob(beta, X, subject_label: str = "Subject",
                             true_label: str = "Y") -> pd.DataFrame:
    """Per-subject P(true=j | X) in long format."""
    pi = compute_pi(beta, X)
    n = pi.shape[0]
    rows = []
    for j in (1, 2):
        rows.append(pd.DataFrame({
            subject_label: np.arange(1, n + 1),
            true_label: j,
            "Probability": pi[:, j - 1],
        }))
    return pd.concat(rows, ignore_index=True)
