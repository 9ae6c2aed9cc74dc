"""Fit reports shared by the EM, MCMC, and weighting estimators."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
import pandas as pd


@dataclass
class FitReport:
    """Named estimates plus convergence diagnostics for one fitted model.

    `extras` carries method-specific payloads (comparison fits, posterior
    summaries, second-stage accuracy) keyed by short strings.
    """

    method: str
    parameter_names: list[str]
    estimates: np.ndarray
    standard_errors: np.ndarray
    converged: bool
    iterations: int
    loglik: float
    label_correction_applied: bool = False
    sensitivity: float = float("nan")       # average P(observed 1 | true 1)
    specificity: float = float("nan")       # average P(observed 2 | true 2)
    loglik_path: list[float] = field(default_factory=list)
    params: Any = None                      # structured parameter object
    extras: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.estimates = np.asarray(self.estimates, dtype=float)
        self.standard_errors = np.asarray(self.standard_errors, dtype=float)
        if not (len(self.parameter_names) == self.estimates.shape[0]
                == self.standard_errors.shape[0]):
            raise ValueError("names, estimates, and SEs must align")

    @property
    def youden_j(self) -> float:
        return self.sensitivity + self.specificity - 1.0

    def to_frame(self) -> pd.DataFrame:
        """Tabular view with the column layout used by the CLI output."""
        return pd.DataFrame({
            "Parameter": self.parameter_names,
            "Estimates": self.estimates,
            "SE": self.standard_errors,
            "Convergence": [bool(self.converged)] * len(self.parameter_names),
        })

    def estimate(self, name: str) -> float:
        return float(self.estimates[self.parameter_names.index(name)])


def numerical_hessian(f, x: np.ndarray, step: float = 1e-4) -> np.ndarray:
    """Central-difference Hessian of a scalar function.

    Step sizes scale with coordinate magnitude.  Used to form
    observed-information standard errors at corrected EM estimates.
    """
    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    h = step * (1.0 + np.abs(x))
    H = np.empty((d, d))
    for a in range(d):
        ea = np.zeros(d)
        ea[a] = h[a]
        H[a, a] = (f(x + ea) - 2.0 * f(x) + f(x - ea)) / h[a] ** 2
        for b in range(a + 1, d):
            eb = np.zeros(d)
            eb[b] = h[b]
            H[a, b] = H[b, a] = (
                f(x + ea + eb) - f(x + ea - eb) - f(x - ea + eb) + f(x - ea - eb)
            ) / (4.0 * h[a] * h[b])
    return H


def observed_info_se(loglik_fn, theta: np.ndarray) -> np.ndarray:
    """SEs from the inverse numerical observed information.

    Entries whose information is not positive definite come back as NaN
    rather than raising; degenerate fits (capped predictors) land there.
    """
    H = numerical_hessian(loglik_fn, theta)
    info = -H
    try:
        cov = np.linalg.inv(info)
        var = np.diag(cov).copy()
    except np.linalg.LinAlgError:
        return np.full(theta.shape[0], np.nan)
    var[var < 0] = np.nan
    with np.errstate(invalid="ignore"):
        return np.sqrt(var)
