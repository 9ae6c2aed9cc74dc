"""Weighted GLM fitting: logistic, linear, and Poisson working models.

These are the building blocks for every M-step and for the naive
comparison estimators.  Logistic fits accept fractional responses in
[0, 1] because the EM M-step regresses on posterior weights.  Linear
predictors are capped at +/-30 so that degenerate fits (perfect
separation, all-zero counts) stay finite and get flagged instead of
overflowing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Cap on |linear predictor|; expit(30) is 1 to within 1e-13.
PREDICTOR_CAP = 30.0

# IRLS defaults.
MAX_ITER = 25
DEVIANCE_TOL = 1e-8


class CollinearityError(ValueError):
    """Design matrix is rank deficient after weighting."""


@dataclass
class GlmFit:
    coefficients: np.ndarray        # length p+1, intercept first
    coef_covariance: np.ndarray     # (p+1, p+1), inverse weighted information
    deviance: float                 # working deviance (constants dropped)
    converged: bool
    iterations: int
    sigma: float | None = None      # residual scale, linear fits only


def expit(eta: np.ndarray | float) -> np.ndarray | float:
    """Logistic function with the linear predictor capped at +/-30."""
    return 1.0 / (1.0 + np.exp(-np.clip(eta, -PREDICTOR_CAP, PREDICTOR_CAP)))


def logit(p: np.ndarray | float) -> np.ndarray | float:
    p = np.asarray(p, dtype=float)
    out = np.log(p) - np.log1p(-p)
    return float(out) if out.ndim == 0 else out


def _as_weights(w, n: int) -> np.ndarray:
    if w is None:
        return np.ones(n)
    w = np.asarray(w, dtype=float)
    if w.shape != (n,):
        raise ValueError(f"weights have shape {w.shape}, expected ({n},)")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    if not np.any(w > 0):
        raise ValueError("at least one weight must be positive")
    return w


def _logistic_deviance(y, mu, w) -> float:
    # Fractional-response safe; the y*log(y) entropy constant is dropped.
    return -2.0 * float(np.sum(w * (y * np.log(mu) + (1.0 - y) * np.log1p(-mu))))


def _poisson_deviance(y, eta, w) -> float:
    mu = np.exp(np.clip(eta, -PREDICTOR_CAP, PREDICTOR_CAP))
    return 2.0 * float(np.sum(w * (mu - y * np.clip(eta, -PREDICTOR_CAP, PREDICTOR_CAP))))


def _solve_psd(H: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Solve H x = g for symmetric positive definite H, with fallbacks."""
    try:
        return np.linalg.solve(H, g)
    except np.linalg.LinAlgError:
        pass
    try:
        ridge = 1e-10 * (1.0 + np.trace(H) / H.shape[0])
        return np.linalg.solve(H + ridge * np.eye(H.shape[0]), g)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(H, g, rcond=None)[0]


def _cap_scale(eta: np.ndarray, eta_step: np.ndarray) -> float:
    """Largest s in [0, 1] keeping |eta + s*eta_step| <= PREDICTOR_CAP."""
    new = eta + eta_step
    over = np.abs(new) > PREDICTOR_CAP
    if not np.any(over):
        return 1.0
    # The crossing point solves |eta + s*step| = cap.  Zero steps cannot
    # cross, and extrapolated warm starts may sit beyond the cap already;
    # both cases must not constrain the others.
    bound = np.where(eta_step[over] > 0, PREDICTOR_CAP, -PREDICTOR_CAP)
    step = eta_step[over]
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(step != 0.0, (bound - eta[over]) / step, np.inf)
    return float(max(0.0, min(1.0, np.min(s))))


def _irls(X, y, w, start, max_iter, tol, family: str) -> GlmFit:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    w = _as_weights(w, n)
    if y.shape != (n,):
        raise ValueError(f"response has shape {y.shape}, expected ({n},)")

    beta = np.zeros(p) if start is None else np.asarray(start, dtype=float).copy()
    if beta.shape != (p,):
        raise ValueError("start has wrong length")

    def dev_of(eta):
        if family == "logistic":
            return _logistic_deviance(y, expit(eta), w)
        return _poisson_deviance(y, eta, w)

    eta = X @ beta
    dev = dev_of(eta)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        if family == "logistic":
            mu = expit(eta)
            w_irls = np.maximum(w * mu * (1.0 - mu), 1e-10)
        else:
            mu = np.exp(np.clip(eta, -PREDICTOR_CAP, PREDICTOR_CAP))
            w_irls = np.maximum(w * mu, 1e-10)
        score = X.T @ (w * (y - mu))
        H = X.T @ (X * w_irls[:, None])
        step = _solve_psd(H, score)
        eta_step = X @ step

        s = _cap_scale(eta, eta_step)
        capped = s < 1.0
        # Step halving keeps the working deviance monotone.
        accepted = False
        for _ in range(40):
            if s < 1e-12:
                break
            dev_new = dev_of(eta + s * eta_step)
            if dev_new <= dev + 1e-12:
                accepted = True
                break
            s *= 0.5
        if not accepted:
            break
        beta = beta + s * step
        eta = eta + s * eta_step
        rel = abs(dev - dev_new) / (0.1 + abs(dev_new))
        dev = dev_new
        step_small = s * float(np.max(np.abs(step))) <= 1e-4 * (1.0 + float(np.max(np.abs(beta))))
        if rel < tol and step_small and not capped:
            converged = True
            break

    if family == "logistic":
        mu = expit(eta)
        w_irls = np.maximum(w * mu * (1.0 - mu), 1e-10)
    else:
        mu = np.exp(np.clip(eta, -PREDICTOR_CAP, PREDICTOR_CAP))
        w_irls = np.maximum(w * mu, 1e-10)
    info = X.T @ (X * w_irls[:, None])
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(info)
    return GlmFit(beta, cov, dev, converged, it)


def fit_weighted_logistic(X, y, weights=None, start=None,
                          max_iter=MAX_ITER, tol=DEVIANCE_TOL) -> GlmFit:
    """Weighted logistic regression via IRLS.

    Responses may be fractional (in [0, 1]).  Perfect separation leaves
    the linear predictor pinned at the +/-30 cap and is reported as
    converged=False.
    """
    y = np.asarray(y, dtype=float)
    if np.any((y < 0) | (y > 1)):
        raise ValueError("logistic responses must lie in [0, 1]")
    return _irls(X, y, weights, start, max_iter, tol, "logistic")


def fit_weighted_poisson(X, y, weights=None, start=None,
                         max_iter=MAX_ITER, tol=DEVIANCE_TOL) -> GlmFit:
    """Weighted Poisson regression with log link via IRLS."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ValueError("Poisson responses must be nonnegative")
    return _irls(X, y, weights, start, max_iter, tol, "poisson")


def fit_weighted_linear(X, y, weights=None) -> GlmFit:
    """Weighted least squares via orthogonal decomposition.

    Returns a GlmFit whose `sigma` field holds the weighted residual
    scale sqrt(sum w r^2 / sum w).  Raises CollinearityError when the
    weighted design is rank deficient.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    w = _as_weights(weights, n)
    sw = np.sqrt(w)
    Xw = X * sw[:, None]
    yw = y * sw
    coef, _, rank, _ = np.linalg.lstsq(Xw, yw, rcond=None)
    if rank < p:
        raise CollinearityError(
            f"design matrix has rank {rank} < {p}; drop collinear columns")
    resid = y - X @ coef
    wsum = float(np.sum(w))
    sigma = float(np.sqrt(np.sum(w * resid ** 2) / wsum))
    info = Xw.T @ Xw
    try:
        cov = np.linalg.inv(info) * sigma ** 2
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(info) * sigma ** 2
    dev = float(np.sum(w * resid ** 2))
    return GlmFit(coef, cov, dev, True, 1, sigma=sigma)


def add_intercept(columns, n: int | None = None) -> np.ndarray:
    """Stack columns into a design matrix with a leading intercept.

    With no columns, `n` gives the number of rows (intercept-only design).
    """
    cols = [np.asarray(c, dtype=float).reshape(-1) for c in columns]
    if n is None:
        if not cols:
            raise ValueError("pass n to build an intercept-only design")
        n = cols[0].shape[0]
    out = np.column_stack([np.ones(n)] + cols) if cols else np.ones((n, 1))
    if not np.all(np.isfinite(out)):
        raise ValueError("design matrix has non-finite entries")
    return out
