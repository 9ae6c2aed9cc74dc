"""Generative simulators for the three model families.

Covariates are described by a small spec vocabulary, either strings like
"normal(0,1)" / "bernoulli(0.3)" or tuples ("normal", 0, 1).  All
categorical outputs are coded {1, 2} with 1 the event; outcome columns
live on the scale of the chosen distribution.  Draws are bit-reproducible
given the seed.
"""

from __future__ import annotations

import re

import numpy as np
import pandas as pd

from .glm import expit
from .mediation import MediationParams, _outcome_design
from .single import compute_pi, compute_pistar
from .twostage import TwoStageParams, compute_pitilde

_SPEC_RE = re.compile(r"^\s*(normal|bernoulli)\s*\(([^)]*)\)\s*$")


def parse_covariate_spec(spec) -> tuple[str, tuple[float, ...]]:
    """Normalize one covariate spec to (kind, params)."""
    if isinstance(spec, str):
        m = _SPEC_RE.match(spec)
        if not m:
            raise ValueError(f"bad covariate spec {spec!r}; "
                             "use normal(mu,sigma) or bernoulli(p)")
        kind = m.group(1)
        try:
            args = tuple(float(a) for a in m.group(2).split(",") if a.strip())
        except ValueError as err:
            raise ValueError(f"bad covariate spec {spec!r}") from err
    else:
        kind, *rest = spec
        args = tuple(float(a) for a in rest)
    if kind == "normal":
        if len(args) != 2 or args[1] <= 0:
            raise ValueError("normal spec needs (mu, sigma>0)")
    elif kind == "bernoulli":
        if len(args) != 1 or not 0.0 <= args[0] <= 1.0:
            raise ValueError("bernoulli spec needs p in [0, 1]")
    else:
        raise ValueError(f"unknown covariate kind {kind!r}")
    return kind, args


def draw_covariates(rng: np.random.Generator, n: int, specs) -> np.ndarray:
    cols = []
    for spec in specs:
        kind, args = parse_covariate_spec(spec)
        if kind == "normal":
            cols.append(rng.normal(args[0], args[1], size=n))
        else:
            cols.append(rng.binomial(1, args[0], size=n).astype(float))
    return np.column_stack(cols) if cols else np.empty((n, 0))


def _with_intercept(block: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(block.shape[0]), block])


def _draw_category(rng, prob_event: np.ndarray) -> np.ndarray:
    """Categories {1, 2}: 1 with the given probability."""
    return np.where(rng.random(prob_event.shape[0]) < prob_event, 1, 2)


def simulate_single(n: int, beta, gamma, x_spec=("normal(0,1)",),
                    z_spec=(), seed: int = 0) -> pd.DataFrame:
    """Draw (X, Z, Y, Y*) from the single misclassified-outcome model."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    Xb = draw_covariates(rng, n, x_spec)
    Zb = draw_covariates(rng, n, z_spec)
    X = _with_intercept(Xb)
    Z = _with_intercept(Zb)
    pi = compute_pi(beta, X)
    y = _draw_category(rng, pi[:, 0])
    pistar = compute_pistar(gamma, Z).probs
    p_obs1 = pistar[np.arange(n), 0, y - 1]
    ystar = _draw_category(rng, p_obs1)
    data = {f"x{i + 1}": Xb[:, i] for i in range(Xb.shape[1])}
    data.update({f"z{i + 1}": Zb[:, i] for i in range(Zb.shape[1])})
    data["y_true"] = y
    data["ystar"] = ystar
    return pd.DataFrame(data)


def simulate_twostage(n: int, params: TwoStageParams, x_spec=("normal(0,1)",),
                      z1_spec=(), z2_spec=(), seed: int = 0) -> pd.DataFrame:
    """Draw (X, Z1, Z2, Y, Y*(1), Y*(2)) from the two-stage model."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    Xb = draw_covariates(rng, n, x_spec)
    Z1b = draw_covariates(rng, n, z1_spec)
    Z2b = draw_covariates(rng, n, z2_spec)
    pi = compute_pi(params.beta, _with_intercept(Xb))
    y = _draw_category(rng, pi[:, 0])
    ps1 = compute_pistar(params.gamma1, _with_intercept(Z1b)).probs
    rows = np.arange(n)
    ystar1 = _draw_category(rng, ps1[rows, 0, y - 1])
    pit = compute_pitilde(params.gamma2, _with_intercept(Z2b))
    ystar2 = _draw_category(rng, pit[rows, 0, ystar1 - 1, y - 1])
    data = {f"x{i + 1}": Xb[:, i] for i in range(Xb.shape[1])}
    data.update({f"z1_{i + 1}": Z1b[:, i] for i in range(Z1b.shape[1])})
    data.update({f"z2_{i + 1}": Z2b[:, i] for i in range(Z2b.shape[1])})
    data["y_true"] = y
    data["ystar1"] = ystar1
    data["ystar2"] = ystar2
    return pd.DataFrame(data)


def simulate_mediation(n: int, params: MediationParams,
                       x_spec=("bernoulli(0.5)",), z_spec=(), c_spec=(),
                       seed: int = 0) -> pd.DataFrame:
    """Draw (X, C, Z, M, M*, Y) from the misclassified-mediator model."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if len(tuple(x_spec)) != 1:
        raise ValueError("mediation models take a single exposure column")
    rng = np.random.default_rng(seed)
    x = draw_covariates(rng, n, x_spec)[:, 0]
    Cb = draw_covariates(rng, n, c_spec)
    Zb = draw_covariates(rng, n, z_spec)
    Xd = np.column_stack([np.ones(n), x, Cb])
    pi = compute_pi(params.beta, Xd)
    m = _draw_category(rng, pi[:, 0])
    pistar = compute_pistar(params.gamma, _with_intercept(Zb)).probs
    mstar = _draw_category(rng, pistar[np.arange(n), 0, m - 1])
    m01 = (m == 1).astype(float)
    C_arg = Cb if Cb.shape[1] else None
    lp = _outcome_design(x, m01, C_arg, params.interaction) @ params.theta
    if params.outcome_dist == "normal":
        y = lp + rng.normal(0.0, params.sigma, size=n)
    elif params.outcome_dist == "bernoulli":
        y = rng.binomial(1, expit(lp)).astype(float)
    else:
        y = rng.poisson(np.exp(np.clip(lp, -30.0, 30.0))).astype(float)
    data = {"x": x}
    data.update({f"c{i + 1}": Cb[:, i] for i in range(Cb.shape[1])})
    data.update({f"z{i + 1}": Zb[:, i] for i in range(Zb.shape[1])})
    data["m_true"] = m
    data["mstar"] = mstar
    data["y"] = y
    return pd.DataFrame(data)
