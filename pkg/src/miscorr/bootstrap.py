"""Nonparametric bootstrap standard errors for the model fitters.

Replicates resample subject rows with replacement, refit with warm
starts taken from the full-data point estimates, and report the
standard deviation and percentile interval of the converged replicate
estimates.  Replicate seeds are spawned from the master seed up front,
so results do not depend on the worker count.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .glm import CollinearityError
from .mediation import em_fit_mediation, ols_correct, pvw_fit
from .report import FitReport
from .single import em_fit
from .twostage import em_fit_2stage

BOOTSTRAP_METHODS = ("comma-em", "comma-pvw", "comma-ols", "combo-em",
                     "combo-em-2stage")

_DATA_KEYS = {
    "comma-em": ("mstar", "y", "x", "Z", "C"),
    "comma-pvw": ("mstar", "y", "x", "Z", "C"),
    "comma-ols": ("mstar", "y", "x", "Z", "C"),
    "combo-em": ("ystar", "X", "Z"),
    "combo-em-2stage": ("ystar1", "ystar2", "X", "Z1", "Z2"),
}


@dataclass
class BootstrapResult:
    method: str
    parameter_names: list[str]
    estimates: np.ndarray
    standard_errors: np.ndarray
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    ci_level: float
    n_replicates: int
    n_converged: int
    replicates: np.ndarray
    point: FitReport

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "Parameter": self.parameter_names,
            "Estimates": self.estimates,
            "SE": self.standard_errors,
            "Convergence": np.repeat(bool(self.point.converged),
                                     len(self.parameter_names)),
        })


def _check_data(method: str, data: dict) -> dict:
    if method not in BOOTSTRAP_METHODS:
        raise ValueError(f"method must be one of {BOOTSTRAP_METHODS}")
    keys = _DATA_KEYS[method]
    missing = [k for k in keys if k != "C" and k not in data]
    if missing:
        raise ValueError(f"{method} needs data keys {missing}")
    extra = [k for k in data if k not in keys]
    if extra:
        raise ValueError(f"unexpected data keys {extra} for {method}")
    out = {}
    for k in keys:
        v = data.get(k)
        out[k] = None if v is None else np.asarray(v)
    lengths = {v.shape[0] for v in out.values() if v is not None}
    if len(lengths) != 1:
        raise ValueError("data blocks have inconsistent row counts")
    return out


def _fit(method: str, d: dict, kwargs: dict) -> FitReport:
    if method == "combo-em":
        return em_fit(d["ystar"], d["X"], d["Z"], compute_se=False, **kwargs)
    if method == "combo-em-2stage":
        return em_fit_2stage(d["ystar1"], d["ystar2"], d["X"], d["Z1"],
                             d["Z2"], compute_se=False, **kwargs)
    if method == "comma-em":
        return em_fit_mediation(d["mstar"], d["y"], d["x"], d["Z"], d["C"],
                                **kwargs)
    if method == "comma-pvw":
        return pvw_fit(d["mstar"], d["y"], d["x"], d["Z"], d["C"], **kwargs)
    return ols_correct(d["mstar"], d["y"], d["x"], d["Z"], d["C"], **kwargs)


def _warm_kwargs(method: str, point: FitReport, kwargs: dict) -> dict:
    out = dict(kwargs)
    if method == "combo-em":
        out["beta_start"] = point.params.beta
        out["gamma_start"] = point.params.gamma
    elif method == "combo-em-2stage":
        out["starts"] = point.params
    elif method == "comma-em":
        out["starts"] = point.params
    else:
        out["starts"] = point.extras["mediator_params"]
    return out


def bootstrap_se(method: str, data: dict, n_replicates: int = 1000,
                 seed: int = 0, n_parallel: int = 1, ci_level: float = 0.95,
                 **fit_kwargs) -> BootstrapResult:
    """Bootstrap SEs and percentile CIs for one of the fitting methods.

    ``data`` maps the fitter's data-block names to row-aligned arrays
    (e.g. ``{"ystar": ..., "X": ..., "Z": ...}`` for ``combo-em``).
    Extra keyword arguments pass through to the fitter.  Replicates that
    fail to converge, or where a fit degenerates, are dropped; their
    count shows up in ``n_converged``.
    """
    if n_replicates < 2:
        raise ValueError("need at least 2 bootstrap replicates")
    if not 0.0 < ci_level < 1.0:
        raise ValueError("ci_level must be inside (0, 1)")
    if n_replicates < 500:
        warnings.warn(f"only {n_replicates} bootstrap replicates; standard "
                      "errors may be unstable", stacklevel=2)
    d = _check_data(method, data)
    n = next(v.shape[0] for v in d.values() if v is not None)

    point = _fit(method, d, fit_kwargs)
    rep_kwargs = _warm_kwargs(method, point, fit_kwargs)
    child_seeds = np.random.SeedSequence(seed).spawn(n_replicates)

    def run_one(b: int):
        rng = np.random.default_rng(child_seeds[b])
        idx = rng.integers(0, n, size=n)
        resampled = {k: (None if v is None else v[idx]) for k, v in d.items()}
        try:
            rep = _fit(method, resampled, rep_kwargs)
        except (ValueError, CollinearityError, np.linalg.LinAlgError):
            return None
        if not rep.converged:
            return None
        return rep.estimates

    if n_parallel > 1:
        with ThreadPoolExecutor(max_workers=n_parallel) as pool:
            results = list(pool.map(run_one, range(n_replicates)))
    else:
        results = [run_one(b) for b in range(n_replicates)]

    kept = [r for r in results if r is not None]
    if not kept:
        raise RuntimeError("no bootstrap replicate converged")
    if len(kept) < 2:
        raise RuntimeError("fewer than 2 converged bootstrap replicates")
    reps = np.asarray(kept, dtype=float)
    alpha = 1.0 - ci_level
    lo, hi = np.percentile(reps, [100 * alpha / 2.0, 100 * (1 - alpha / 2.0)],
                           axis=0)
    return BootstrapResult(
        method=method,
        parameter_names=list(point.parameter_names),
        estimates=np.asarray(point.estimates, dtype=float),
        standard_errors=reps.std(axis=0, ddof=1),
        ci_lower=lo,
        ci_upper=hi,
        ci_level=ci_level,
        n_replicates=n_replicates,
        n_converged=len(kept),
        replicates=reps,
        point=point,
    )
