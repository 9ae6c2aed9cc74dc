"""Self-contained Bayesian estimation for the outcome models.

Component-blocked adaptive random-walk Metropolis targeting the observed
data log-likelihood plus a user-selectable prior (uniform, normal,
double-exponential, or t).  Proposal scales adapt toward a 0.3
acceptance rate during burn-in and freeze afterwards.  Each chain gets a
label-switching correction decided at its posterior-mean gamma, then
chains are pooled into a posterior summary table.  A naive model that
ignores the latent class is sampled alongside for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.special import gammaln

from .categories import encode_categories
from .glm import expit
from .single import SingleOutcomeParams, compute_pi, compute_pistar
from .twostage import TwoStageParams, compute_pitilde

PRIOR_FAMILIES = ("uniform", "normal", "double-exponential", "t")

TARGET_ACCEPTANCE = 0.3


def _hyper_block(family: str, shape: tuple[int, ...], location, scale,
                 lower, upper, df) -> np.ndarray:
    """Hyperparameter array with leading axis indexing the hyperparameters."""
    if family == "uniform":
        rows = [np.broadcast_to(lower, shape), np.broadcast_to(upper, shape)]
    elif family in ("normal", "double-exponential"):
        rows = [np.broadcast_to(location, shape), np.broadcast_to(scale, shape)]
    else:
        rows = [np.broadcast_to(location, shape), np.broadcast_to(scale, shape),
                np.broadcast_to(df, shape)]
    return np.stack([np.asarray(r, dtype=float) for r in rows])


def _validate_hyper(family: str, hyper: np.ndarray, name: str) -> None:
    if family == "uniform":
        if hyper.shape[0] != 2:
            raise ValueError(f"{name}: uniform priors need (lower, upper)")
        if np.any(hyper[0] >= hyper[1]):
            raise ValueError(f"{name}: uniform bounds must be ordered")
    elif family in ("normal", "double-exponential"):
        if hyper.shape[0] != 2:
            raise ValueError(f"{name}: need (location, scale)")
        if np.any(hyper[1] <= 0):
            raise ValueError(f"{name}: scales must be positive")
    else:
        if hyper.shape[0] != 3:
            raise ValueError(f"{name}: t priors need (location, scale, df)")
        if np.any(hyper[1] <= 0) or np.any(hyper[2] <= 0):
            raise ValueError(f"{name}: scales and df must be positive")


@dataclass
class PriorSpec:
    """Prior family plus per-parameter hyperparameters.

    Hyperparameter arrays carry a leading axis over hyperparameters
    ((location, scale), (lower, upper), or (location, scale, df)) and
    otherwise match the parameter block shapes: beta (nb,), gamma
    (ng, 2) for the single model, gamma1/gamma2 for the two-stage model.
    """

    family: str
    beta: np.ndarray
    gamma: np.ndarray | None = None
    gamma1: np.ndarray | None = None
    gamma2: np.ndarray | None = None

    def __post_init__(self):
        if self.family not in PRIOR_FAMILIES:
            raise ValueError(f"family must be one of {PRIOR_FAMILIES}")
        self.beta = np.asarray(self.beta, dtype=float)
        _validate_hyper(self.family, self.beta, "beta")
        for name in ("gamma", "gamma1", "gamma2"):
            val = getattr(self, name)
            if val is not None:
                val = np.asarray(val, dtype=float)
                setattr(self, name, val)
                _validate_hyper(self.family, val, name)

    @classmethod
    def for_single(cls, n_beta: int, n_gamma_rows: int, family: str = "normal",
                   location=0.0, scale=10.0, lower=-10.0, upper=10.0,
                   df=3.0) -> "PriorSpec":
        return cls(family,
                   _hyper_block(family, (n_beta,), location, scale, lower,
                                upper, df),
                   gamma=_hyper_block(family, (n_gamma_rows, 2), location,
                                      scale, lower, upper, df))

    @classmethod
    def for_twostage(cls, n_beta: int, n_g1: int, n_g2: int,
                     family: str = "normal", location=0.0, scale=10.0,
                     lower=-10.0, upper=10.0, df=3.0) -> "PriorSpec":
        return cls(family,
                   _hyper_block(family, (n_beta,), location, scale, lower,
                                upper, df),
                   gamma1=_hyper_block(family, (n_g1, 2), location, scale,
                                       lower, upper, df),
                   gamma2=_hyper_block(family, (n_g2, 2, 2), location, scale,
                                       lower, upper, df))

    def flat_hyper_single(self) -> np.ndarray:
        if self.gamma is None:
            raise ValueError("prior lacks gamma hyperparameters")
        h = self.beta.shape[0]
        g = self.gamma.reshape(h, -1, order="F")
        return np.concatenate([self.beta, g], axis=1)

    def flat_hyper_twostage(self) -> np.ndarray:
        if self.gamma1 is None or self.gamma2 is None:
            raise ValueError("prior lacks gamma1/gamma2 hyperparameters")
        h = self.beta.shape[0]
        g1 = self.gamma1.reshape(h, -1, order="F")
        g2 = self.gamma2.reshape(h, -1, order="F")
        return np.concatenate([self.beta, g1, g2], axis=1)


def _log_density(family: str, x: np.ndarray, hyper: np.ndarray) -> np.ndarray:
    if family == "uniform":
        lo, hi = hyper
        out = np.where((x >= lo) & (x <= hi), -np.log(hi - lo), -np.inf)
        return out
    if family == "normal":
        mu, sd = hyper
        return -0.5 * np.log(2.0 * np.pi * sd ** 2) - (x - mu) ** 2 / (2.0 * sd ** 2)
    if family == "double-exponential":
        mu, b = hyper
        return -np.log(2.0 * b) - np.abs(x - mu) / b
    mu, s, df = hyper
    z = (x - mu) / s
    return (gammaln((df + 1.0) / 2.0) - gammaln(df / 2.0)
            - 0.5 * np.log(df * np.pi * s ** 2)
            - (df + 1.0) / 2.0 * np.log1p(z ** 2 / df))


def _flat_log_prior(family: str, x: np.ndarray, hyper: np.ndarray) -> float:
    if x.shape[0] != hyper.shape[1]:
        raise ValueError("parameter vector does not match prior shape")
    return float(np.sum(_log_density(family, x, hyper)))


def log_prior(params, prior: PriorSpec) -> float:
    """Sum of per-parameter prior log densities; -inf outside support."""
    if isinstance(params, SingleOutcomeParams):
        return _flat_log_prior(prior.family, params.flatten(),
                               prior.flat_hyper_single())
    if isinstance(params, TwoStageParams):
        return _flat_log_prior(prior.family, params.flatten(),
                               prior.flat_hyper_twostage())
    raise TypeError("params must be SingleOutcomeParams or TwoStageParams")


def _draw_from_prior(rng: np.random.Generator, family: str,
                     hyper: np.ndarray) -> np.ndarray:
    d = hyper.shape[1]
    if family == "uniform":
        return rng.uniform(hyper[0], hyper[1])
    if family == "normal":
        return rng.normal(hyper[0], hyper[1])
    if family == "double-exponential":
        return rng.laplace(hyper[0], hyper[1])
    return hyper[0] + hyper[1] * rng.standard_t(hyper[2], size=d)


@dataclass
class ChainSet:
    """Post-burn-in draws for one model across chains."""

    chains: list[np.ndarray]            # each (n_samples, d)
    parameter_names: list[str]
    n_samples: int
    burn_in: int
    acceptance_rates: list[dict[str, float]]
    label_corrected: list[bool] = field(default_factory=list)

    def pooled(self) -> np.ndarray:
        return np.vstack(self.chains)


@dataclass
class McmcResult:
    chains: ChainSet
    naive_chains: ChainSet
    summary: pd.DataFrame
    seed: int


def _run_chain(log_post, x0: np.ndarray, blocks: dict[str, slice],
               n_samples: int, burn_in: int, rng: np.random.Generator):
    """Blocked adaptive random-walk Metropolis for one chain."""
    x = np.asarray(x0, dtype=float).copy()
    lp = log_post(x)
    if not np.isfinite(lp):
        raise ValueError("log posterior is not finite at the initial values")
    log_scales = {name: np.log(0.2) for name in blocks}
    accepted = {name: 0 for name in blocks}
    draws = np.empty((n_samples, x.shape[0]))
    total = burn_in + n_samples
    for t in range(total):
        for name, sl in blocks.items():
            width = sl.stop - sl.start
            proposal = x.copy()
            proposal[sl] = x[sl] + np.exp(log_scales[name]) * rng.standard_normal(width)
            lp_new = log_post(proposal)
            accept = np.log(rng.random()) < lp_new - lp
            if accept:
                x = proposal
                lp = lp_new
            if t < burn_in:
                step = min(0.1, 2.0 / np.sqrt(t + 1.0))
                log_scales[name] += step * ((1.0 if accept else 0.0)
                                            - TARGET_ACCEPTANCE)
                log_scales[name] = float(np.clip(log_scales[name], -12.0, 4.0))
            elif accept:
                accepted[name] += 1
        if t >= burn_in:
            draws[t - burn_in] = x
    rates = {name: accepted[name] / n_samples for name in blocks}
    if n_samples > 0 and all(a == 0 for a in accepted.values()):
        raise RuntimeError("sampler rejected every post-burn-in proposal; "
                           "check the prior scale or data")
    return draws, rates


def _single_layout(n_beta: int, n_gamma: int):
    blocks = {
        "beta": slice(0, n_beta),
        "gamma_col1": slice(n_beta, n_beta + n_gamma),
        "gamma_col2": slice(n_beta + n_gamma, n_beta + 2 * n_gamma),
    }
    names = [f"beta[1,{m + 1}]" for m in range(n_beta)]
    for j in (1, 2):
        names += [f"gamma[1,{r + 1},{j}]" for r in range(n_gamma)]
    return blocks, names


def _twostage_layout(n_beta: int, n_g1: int, n_g2: int):
    blocks = {"beta": slice(0, n_beta)}
    at = n_beta
    for j in (1, 2):
        blocks[f"gamma1_col{j}"] = slice(at, at + n_g1)
        at += n_g1
    for j in (1, 2):
        for k in (1, 2):
            blocks[f"gamma2_{k}{j}"] = slice(at, at + n_g2)
            at += n_g2
    names = [f"beta[1,{m + 1}]" for m in range(n_beta)]
    for j in (1, 2):
        names += [f"gamma1[1,{r + 1},{j}]" for r in range(n_g1)]
    for j in (1, 2):
        for k in (1, 2):
            names += [f"gamma2[1,{r + 1},{k},{j}]" for r in range(n_g2)]
    return blocks, names


def permute_chain_single(draws: np.ndarray, n_beta: int,
                         n_gamma: int) -> np.ndarray:
    out = draws.copy()
    out[:, :n_beta] = -draws[:, :n_beta]
    c1 = slice(n_beta, n_beta + n_gamma)
    c2 = slice(n_beta + n_gamma, n_beta + 2 * n_gamma)
    out[:, c1] = draws[:, c2]
    out[:, c2] = draws[:, c1]
    return out


def permute_chain_twostage(draws: np.ndarray, n_beta: int, n_g1: int,
                           n_g2: int) -> np.ndarray:
    out = draws.copy()
    out[:, :n_beta] = -draws[:, :n_beta]
    a = n_beta
    out[:, a:a + n_g1] = draws[:, a + n_g1:a + 2 * n_g1]
    out[:, a + n_g1:a + 2 * n_g1] = draws[:, a:a + n_g1]
    b = n_beta + 2 * n_g1
    half = 2 * n_g2
    out[:, b:b + half] = draws[:, b + half:b + 2 * half]
    out[:, b + half:b + 2 * half] = draws[:, b:b + half]
    return out


def chain_label_correct(draws: np.ndarray, Z, n_beta: int, n_gamma: int):
    """Correct one single-model chain using its posterior-mean gamma."""
    mean = draws.mean(axis=0)
    gamma = mean[n_beta:].reshape((n_gamma, 2), order="F")
    _, sens, spec = compute_pistar(gamma, np.asarray(Z, dtype=float))
    if sens + spec - 1.0 >= 0.0:
        return draws, False
    return permute_chain_single(draws, n_beta, n_gamma), True


def chain_label_correct_2stage(draws: np.ndarray, Z1, n_beta: int, n_g1: int,
                               n_g2: int):
    """Correct one two-stage chain at its posterior-mean first-stage gamma."""
    mean = draws.mean(axis=0)
    gamma1 = mean[n_beta:n_beta + 2 * n_g1].reshape((n_g1, 2), order="F")
    _, sens, spec = compute_pistar(gamma1, np.asarray(Z1, dtype=float))
    if sens + spec - 1.0 >= 0.0:
        return draws, False
    return permute_chain_twostage(draws, n_beta, n_g1, n_g2), True


def _summarize(names: list[str], pooled: np.ndarray) -> pd.DataFrame:
    return pd.DataFrame({
        "Parameter": names,
        "Posterior Mean": pooled.mean(axis=0),
        "Posterior Median": np.median(pooled, axis=0),
    })


def batch_means_mcse(x: np.ndarray) -> float:
    """Monte-Carlo standard error of a chain mean via batch means."""
    x = np.asarray(x, dtype=float).reshape(-1)
    n = x.shape[0]
    b = max(2, int(np.sqrt(n)))
    k = n // b
    means = x[:k * b].reshape(k, b).mean(axis=1)
    if k < 2:
        return float("nan")
    return float(np.std(means, ddof=1) / np.sqrt(k))


def mcmc_fit(ystar, X, Z, prior: PriorSpec | None = None, n_chains: int = 2,
             n_samples: int = 1000, burn_in: int = 500, seed: int = 0,
             init: np.ndarray | None = None,
             coding: str = "1,2") -> McmcResult:
    """Posterior sampling for the single misclassified-outcome model.

    Returns corrected chains for the full model, chains for the naive
    logistic model, and a pooled summary table covering both.
    """
    if n_samples <= 0 or burn_in < 0:
        raise ValueError("need n_samples > 0 and burn_in >= 0")
    X = np.asarray(X, dtype=float)
    Z = np.asarray(Z, dtype=float)
    kidx = encode_categories(ystar, coding)
    y1 = (kidx == 0).astype(float)
    n_beta, n_gamma = X.shape[1], Z.shape[1]
    if prior is None:
        prior = PriorSpec.for_single(n_beta, n_gamma)
    hyper = prior.flat_hyper_single()
    if hyper.shape[1] != n_beta + 2 * n_gamma:
        raise ValueError("prior hyperparameter shapes do not match the model")
    blocks, names = _single_layout(n_beta, n_gamma)
    rows = np.arange(X.shape[0])

    def log_post(vec: np.ndarray) -> float:
        pri = _flat_log_prior(prior.family, vec, hyper)
        if not np.isfinite(pri):
            return -np.inf
        p = SingleOutcomeParams.unflatten(vec, n_beta, n_gamma)
        pi = compute_pi(p.beta, X)
        pistar = compute_pistar(p.gamma, Z).probs
        marg = np.einsum("ij,ij->i", pistar[rows, kidx, :], pi)
        return float(np.sum(np.log(np.maximum(marg, 1e-300)))) + pri

    chains, rates, flags = [], [], []
    for c in range(n_chains):
        rng = np.random.default_rng([seed, c, 0])
        x0 = (_draw_from_prior(rng, prior.family, hyper)
              if init is None else np.asarray(init, dtype=float))
        draws, rate = _run_chain(log_post, x0, blocks, n_samples, burn_in, rng)
        draws, applied = chain_label_correct(draws, Z, n_beta, n_gamma)
        chains.append(draws)
        rates.append(rate)
        flags.append(applied)
    chain_set = ChainSet(chains, names, n_samples, burn_in, rates, flags)

    naive = _naive_mcmc_single(y1, X, prior, n_chains, n_samples, burn_in, seed)
    summary = pd.concat([
        _summarize(names, chain_set.pooled()),
        _summarize(naive.parameter_names, naive.pooled()),
    ], ignore_index=True)
    return McmcResult(chain_set, naive, summary, seed)


def _naive_mcmc_single(y1, X, prior, n_chains, n_samples, burn_in,
                       seed) -> ChainSet:
    n_beta = X.shape[1]
    hyper = prior.beta
    blocks = {"beta": slice(0, n_beta)}
    names = [f"naive_beta[1,{m + 1}]" for m in range(n_beta)]

    def log_post(vec: np.ndarray) -> float:
        pri = _flat_log_prior(prior.family, vec, hyper)
        if not np.isfinite(pri):
            return -np.inf
        mu = expit(X @ vec)
        ll = np.sum(y1 * np.log(mu) + (1.0 - y1) * np.log1p(-mu))
        return float(ll) + pri

    chains, rates = [], []
    for c in range(n_chains):
        rng = np.random.default_rng([seed, c, 1])
        x0 = _draw_from_prior(rng, prior.family, hyper)
        draws, rate = _run_chain(log_post, x0, blocks, n_samples, burn_in, rng)
        chains.append(draws)
        rates.append(rate)
    return ChainSet(chains, names, n_samples, burn_in, rates,
                    [False] * n_chains)


def mcmc_fit_2stage(ystar1, ystar2, X, Z1, Z2, prior: PriorSpec | None = None,
                    n_chains: int = 2, n_samples: int = 1000,
                    burn_in: int = 500, seed: int = 0,
                    init: np.ndarray | None = None,
                    coding: str = "1,2") -> McmcResult:
    """Posterior sampling for the two-stage model.

    The target factors the data into the two marginal stage
    probabilities P(Y*(1)=1 | X, Z1) and P(Y*(2)=1 | X, Z1, Z2), each
    entering as a Bernoulli likelihood.
    """
    if n_samples <= 0 or burn_in < 0:
        raise ValueError("need n_samples > 0 and burn_in >= 0")
    X = np.asarray(X, dtype=float)
    Z1 = np.asarray(Z1, dtype=float)
    Z2 = np.asarray(Z2, dtype=float)
    y1 = (encode_categories(ystar1, coding) == 0).astype(float)
    y2 = (encode_categories(ystar2, coding) == 0).astype(float)
    n_beta, n_g1, n_g2 = X.shape[1], Z1.shape[1], Z2.shape[1]
    if prior is None:
        prior = PriorSpec.for_twostage(n_beta, n_g1, n_g2)
    hyper = prior.flat_hyper_twostage()
    if hyper.shape[1] != n_beta + 2 * n_g1 + 4 * n_g2:
        raise ValueError("prior hyperparameter shapes do not match the model")
    blocks, names = _twostage_layout(n_beta, n_g1, n_g2)

    def log_post(vec: np.ndarray) -> float:
        pri = _flat_log_prior(prior.family, vec, hyper)
        if not np.isfinite(pri):
            return -np.inf
        p = TwoStageParams.unflatten(vec, n_beta, n_g1, n_g2)
        pi = compute_pi(p.beta, X)
        ps1 = compute_pistar(p.gamma1, Z1).probs
        pit = compute_pitilde(p.gamma2, Z2)
        stage1 = np.einsum("ij,ij->i", ps1[:, 0, :], pi)
        stage2 = np.einsum("ikj,ikj,ij->i", pit[:, 0, :, :], ps1, pi)
        stage1 = np.clip(stage1, 1e-300, 1.0 - 1e-16)
        stage2 = np.clip(stage2, 1e-300, 1.0 - 1e-16)
        ll = (np.sum(y1 * np.log(stage1) + (1.0 - y1) * np.log1p(-stage1))
              + np.sum(y2 * np.log(stage2) + (1.0 - y2) * np.log1p(-stage2)))
        return float(ll) + pri

    chains, rates, flags = [], [], []
    for c in range(n_chains):
        rng = np.random.default_rng([seed, c, 0])
        x0 = (_draw_from_prior(rng, prior.family, hyper)
              if init is None else np.asarray(init, dtype=float))
        draws, rate = _run_chain(log_post, x0, blocks, n_samples, burn_in, rng)
        draws, applied = chain_label_correct_2stage(draws, Z1, n_beta, n_g1,
                                                    n_g2)
        chains.append(draws)
        rates.append(rate)
        flags.append(applied)
    chain_set = ChainSet(chains, names, n_samples, burn_in, rates, flags)

    naive = _naive_mcmc_2stage(y1, y2, X, Z2, prior, n_chains, n_samples,
                               burn_in, seed)
    summary = pd.concat([
        _summarize(names, chain_set.pooled()),
        _summarize(naive.parameter_names, naive.pooled()),
    ], ignore_index=True)
    return McmcResult(chain_set, naive, summary, seed)


def _naive_mcmc_2stage(y1, y2, X, Z2, prior, n_chains, n_samples, burn_in,
                       seed) -> ChainSet:
    """Naive two-stage model: logistic stages with no latent class.

    naive_gamma2 column k models Y*(2) within the stratum Y*(1)=k; its
    prior reuses the gamma2 hyperparameters at the true-class-1 slice.
    """
    n_beta, n_g2 = X.shape[1], Z2.shape[1]
    g2_hyper = prior.gamma2[:, :, :, 0].reshape(prior.gamma2.shape[0], -1,
                                                order="F")
    hyper = np.concatenate([prior.beta, g2_hyper], axis=1)
    blocks = {"beta": slice(0, n_beta)}
    at = n_beta
    for k in (1, 2):
        blocks[f"gamma2_col{k}"] = slice(at, at + n_g2)
        at += n_g2
    names = [f"naive_beta[1,{m + 1}]" for m in range(n_beta)]
    names += [f"naive_gamma2[1,{r + 1},{k}]"
              for r in range(n_g2) for k in (1, 2)]
    in_stratum1 = y1 == 1.0

    def log_post(vec: np.ndarray) -> float:
        pri = _flat_log_prior(prior.family, vec, hyper)
        if not np.isfinite(pri):
            return -np.inf
        mu1 = expit(X @ vec[:n_beta])
        ll = np.sum(y1 * np.log(mu1) + (1.0 - y1) * np.log1p(-mu1))
        g = vec[n_beta:].reshape((n_g2, 2), order="F")
        eta2 = np.where(in_stratum1, Z2 @ g[:, 0], Z2 @ g[:, 1])
        mu2 = expit(eta2)
        ll += np.sum(y2 * np.log(mu2) + (1.0 - y2) * np.log1p(-mu2))
        return float(ll) + pri

    chains, rates = [], []
    for c in range(n_chains):
        rng = np.random.default_rng([seed, c, 1])
        x0 = _draw_from_prior(rng, prior.family, hyper)
        draws, rate = _run_chain(log_post, x0, blocks, n_samples, burn_in, rng)
        chains.append(draws)
        rates.append(rate)
    return ChainSet(chains, names, n_samples, burn_in, rates,
                    [False] * n_chains)
