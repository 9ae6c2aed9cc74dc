"""Command-line driver: argument parsing, dispatch, and report files.

Every run resolves an AnalysisConfig from defaults, an optional key=value
config file, and command-line flags (flags win), then writes its outputs
into the --out directory: an estimates CSV with columns (Parameter,
Estimates, SE, Convergence) and a JSON report embedding diagnostics and
the full resolved configuration.  Exit codes: 0 success, 1 usage or
configuration error, 2 model-level failure or non-convergence (a partial
report is still written).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np
import pandas as pd

from . import __version__
from .bootstrap import bootstrap_se
from .config import (COMMANDS, AnalysisConfig, ConfigError, build_config,
                     parse_config_file, validate_config)
from .dataio import Dataset, load_dataset, write_estimates_csv, \
    write_report_json
from .glm import CollinearityError
from .mcmc import ChainSet, PriorSpec, batch_means_mcse, mcmc_fit, \
    mcmc_fit_2stage
from .mediation import MediationParams, em_fit_mediation, ols_correct, pvw_fit
from .roc import adjusted_roc
from .simulate import (parse_covariate_spec, simulate_mediation,
                       simulate_single, simulate_twostage)
from .single import (SingleOutcomeParams, _param_names, compute_pi,
                     e_step_weights, em_fit)
from .twostage import TwoStageParams, em_fit_2stage

log = logging.getLogger("miscorr")


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract reserves 2 for
    model-level failures, so remap usage problems to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(f"error: {message}") from None


def _add_option_flags(sub: argparse.ArgumentParser) -> None:
    """Every config key is overridable by a flag of the same name."""
    sub.add_argument("--config", help="key=value config file")
    opt = [
        ("data", "input CSV path"),
        ("out", "output directory (default .)"),
        ("ystar", "observed single-outcome column"),
        ("ystar1", "first-stage observed outcome column"),
        ("ystar2", "second-stage observed outcome column"),
        ("mstar", "observed mediator column"),
        ("outcome", "outcome column for mediation models"),
        ("x", "comma-separated true-model covariate columns"),
        ("z", "comma-separated observation-model covariate columns"),
        ("z1", "first-stage observation covariate columns"),
        ("z2", "second-stage observation covariate columns"),
        ("c", "comma-separated confounder columns"),
        ("coding", "category coding, '1,2' (1 = event) or '0,1' (1 = event)"),
        ("tolerance", "EM convergence tolerance"),
        ("max-iter", "EM iteration cap"),
        ("accel", "EM accelerator: plain or squarem"),
        ("dist", "outcome distribution: normal, bernoulli, poisson"),
        ("interaction", "true/false exposure-mediator interaction"),
        ("prior", "prior family: uniform, normal, double-exponential, t"),
        ("prior-location", "prior location hyperparameter"),
        ("prior-scale", "prior scale hyperparameter"),
        ("prior-lower", "uniform prior lower bound"),
        ("prior-upper", "uniform prior upper bound"),
        ("prior-df", "t prior degrees of freedom"),
        ("chains", "number of MCMC chains"),
        ("samples", "posterior draws per chain"),
        ("burn-in", "burn-in iterations per chain"),
        ("n-boot", "bootstrap replicate count"),
        ("n-parallel", "worker threads (MISCORR_THREADS overrides)"),
        ("seed", "integer seed for all randomized commands"),
        ("method", "bootstrap target estimator"),
        ("estimates", "estimates CSV of a prior combo-em fit (roc)"),
        ("family", "simulation family: single, twostage, mediation"),
        ("n", "simulated sample size"),
        ("beta", "true-model coefficients, comma-separated"),
        ("gamma", "observation coefficients, event column first"),
        ("gamma1", "first-stage observation coefficients"),
        ("gamma2", "second-stage observation coefficients"),
        ("theta", "outcome-model coefficients"),
        ("sigma", "normal outcome residual scale"),
        ("x-spec", "covariate specs such as normal(0,1),bernoulli(0.3)"),
        ("z-spec", "observation covariate specs"),
        ("z1-spec", "first-stage observation covariate specs"),
        ("z2-spec", "second-stage observation covariate specs"),
        ("c-spec", "confounder specs"),
    ]
    for flag, desc in opt:
        sub.add_argument(f"--{flag}", dest=flag.replace("-", "_"),
                         help=desc)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="miscorr",
                     description="regression with misclassified binary "
                                 "outcomes and mediators")
    parser.add_argument("--version", action="version",
                        version=f"miscorr {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        sub = subs.add_parser(command)
        _add_option_flags(sub)
    return parser


def resolve_config(args: argparse.Namespace) -> AnalysisConfig:
    file_values = parse_config_file(args.config) if args.config else {}
    overrides = {}
    for key, val in vars(args).items():
        if key in ("command", "config") or val is None:
            continue
        overrides[key] = val
    cfg = build_config(args.command, file_values, overrides)
    env = os.environ.get("MISCORR_THREADS")
    if env:
        try:
            cfg.n_parallel = int(env)
        except ValueError as err:
            raise ConfigError(
                f"MISCORR_THREADS must be an integer, got {env!r}") from err
    validate_config(cfg)
    return cfg


def _base_report(cfg: AnalysisConfig) -> dict:
    return {
        "command": cfg.command,
        "version": __version__,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
    }


def _fit_diagnostics(fit) -> dict:
    return {
        "method": fit.method,
        "converged": bool(fit.converged),
        "iterations": int(fit.iterations),
        "loglik": float(fit.loglik),
        "sensitivity": float(fit.sensitivity),
        "specificity": float(fit.specificity),
        "youden_j": float(fit.youden_j),
        "label_correction_applied": bool(fit.label_correction_applied),
        "n_dropped_rows": None,
    }


def _mediation_args(cfg: AnalysisConfig, ds: Dataset):
    """Raw blocks for the mediation estimators, which add intercepts."""
    mstar = ds.columns[cfg.mstar]
    y = ds.columns[cfg.outcome]
    x = ds.columns[cfg.x[0]]
    Z = np.column_stack([ds.columns[c] for c in cfg.z]) \
        if cfg.z else np.empty((ds.n, 0))
    C = np.column_stack([ds.columns[c] for c in cfg.c]) if cfg.c else None
    return mstar, y, x, Z, C


def _write_fit(cfg: AnalysisConfig, fit, report: dict,
               n_dropped: int) -> int:
    report["diagnostics"] = _fit_diagnostics(fit)
    report["diagnostics"]["n_dropped_rows"] = n_dropped
    write_estimates_csv(os.path.join(cfg.out, "estimates.csv"),
                        fit.to_frame())
    write_report_json(os.path.join(cfg.out, "report.json"), report)
    return 0 if fit.converged else 2


def _run_em_command(cfg: AnalysisConfig, ds: Dataset, report: dict) -> int:
    common = dict(tolerance=cfg.tolerance, max_iter=cfg.max_iter,
                  accel=cfg.accel, coding=cfg.coding)
    if cfg.command == "combo-em":
        fit = em_fit(ds.columns[cfg.ystar], ds.blocks["X"], ds.blocks["Z"],
                     **common)
    elif cfg.command == "combo-em-2stage":
        fit = em_fit_2stage(ds.columns[cfg.ystar1], ds.columns[cfg.ystar2],
                            ds.blocks["X"], ds.blocks["Z1"], ds.blocks["Z2"],
                            **common)
    else:
        mstar, y, x, Z, C = _mediation_args(cfg, ds)
        if cfg.command == "comma-em":
            fit = em_fit_mediation(mstar, y, x, Z, C, dist=cfg.dist,
                                   interaction=cfg.interaction, **common)
        elif cfg.command == "comma-pvw":
            fit = pvw_fit(mstar, y, x, Z, C, dist=cfg.dist,
                          interaction=cfg.interaction, **common)
        else:
            fit = ols_correct(mstar, y, x, Z, C,
                              interaction=cfg.interaction, **common)
    return _write_fit(cfg, fit, report, ds.n_dropped)


def _prior_from_config(cfg: AnalysisConfig, n_beta: int, n_g1: int,
                       n_g2: int | None) -> PriorSpec:
    hyper = dict(family=cfg.prior, location=cfg.prior_location,
                 scale=cfg.prior_scale, lower=cfg.prior_lower,
                 upper=cfg.prior_upper, df=cfg.prior_df)
    if n_g2 is None:
        return PriorSpec.for_single(n_beta, n_g1, **hyper)
    return PriorSpec.for_twostage(n_beta, n_g1, n_g2, **hyper)


def _chain_block(cs: ChainSet) -> dict:
    pooled = cs.pooled()
    return {
        "acceptance_rates": cs.acceptance_rates,
        "label_corrected": cs.label_corrected,
        "mcse": {name: batch_means_mcse(pooled[:, i])
                 for i, name in enumerate(cs.parameter_names)},
    }


def _run_mcmc_command(cfg: AnalysisConfig, ds: Dataset, report: dict) -> int:
    if cfg.command == "combo-mcmc":
        X, Z = ds.blocks["X"], ds.blocks["Z"]
        prior = _prior_from_config(cfg, X.shape[1], Z.shape[1], None)
        result = mcmc_fit(ds.columns[cfg.ystar], X, Z, prior=prior,
                          n_chains=cfg.chains, n_samples=cfg.samples,
                          burn_in=cfg.burn_in, seed=cfg.seed,
                          coding=cfg.coding)
    else:
        X, Z1, Z2 = ds.blocks["X"], ds.blocks["Z1"], ds.blocks["Z2"]
        prior = _prior_from_config(cfg, X.shape[1], Z1.shape[1], Z2.shape[1])
        result = mcmc_fit_2stage(ds.columns[cfg.ystar1],
                                 ds.columns[cfg.ystar2], X, Z1, Z2,
                                 prior=prior, n_chains=cfg.chains,
                                 n_samples=cfg.samples, burn_in=cfg.burn_in,
                                 seed=cfg.seed, coding=cfg.coding)
    pooled = result.chains.pooled()
    frame = pd.DataFrame({
        "Parameter": result.chains.parameter_names,
        "Estimates": pooled.mean(axis=0),
        "SE": pooled.std(axis=0, ddof=1),
        "Convergence": [True] * pooled.shape[1],
    })
    write_estimates_csv(os.path.join(cfg.out, "estimates.csv"), frame)
    write_estimates_csv(os.path.join(cfg.out, "summary.csv"), result.summary)
    report["diagnostics"] = {
        "n_dropped_rows": ds.n_dropped,
        "model": _chain_block(result.chains),
        "naive": _chain_block(result.naive_chains),
    }
    write_report_json(os.path.join(cfg.out, "report.json"), report)
    return 0


def _load_single_fit_table(cfg: AnalysisConfig, X, Z) -> SingleOutcomeParams:
    """Rebuild single-model parameters from a prior estimates CSV."""
    table = pd.read_csv(cfg.estimates, float_precision="round_trip")
    for col in ("Parameter", "Estimates"):
        if col not in table.columns:
            raise ConfigError(f"{cfg.estimates} lacks the {col!r} column")
    expected = _param_names(X.shape[1], Z.shape[1])
    got = list(table["Parameter"])
    if got != expected:
        raise ConfigError(
            f"estimates file parameters {got} do not match the configured "
            f"design, expected {expected}")
    vec = table["Estimates"].to_numpy(dtype=float)
    return SingleOutcomeParams.unflatten(vec, X.shape[1], Z.shape[1])


def _run_roc_command(cfg: AnalysisConfig, ds: Dataset, report: dict) -> int:
    ystar = ds.columns[cfg.ystar]
    X, Z = ds.blocks["X"], ds.blocks["Z"]
    exit_code = 0
    if cfg.estimates:
        params = _load_single_fit_table(cfg, X, Z)
        report["diagnostics"] = {"fit_source": cfg.estimates,
                                 "n_dropped_rows": ds.n_dropped}
    else:
        fit = em_fit(ystar, X, Z, tolerance=cfg.tolerance,
                     max_iter=cfg.max_iter, accel=cfg.accel,
                     coding=cfg.coding, compute_se=False)
        params = fit.params
        report["diagnostics"] = _fit_diagnostics(fit)
        report["diagnostics"]["n_dropped_rows"] = ds.n_dropped
        report["diagnostics"]["fit_source"] = "internal"
        exit_code = 0 if fit.converged else 2
    weights = e_step_weights(params, X, Z, ystar, coding=cfg.coding)
    risk = compute_pi(params.beta, X)[:, 0]
    curve = adjusted_roc(risk, weights)
    frame = pd.DataFrame({"cutoff": curve.cutoffs, "FPR": curve.fpr,
                          "TPR": curve.tpr})
    write_estimates_csv(os.path.join(cfg.out, "roc.csv"), frame)
    report["auc"] = float(curve.auc)
    write_report_json(os.path.join(cfg.out, "report.json"), report)
    return exit_code


def _run_bootstrap_command(cfg: AnalysisConfig, ds: Dataset,
                           report: dict) -> int:
    kwargs = dict(tolerance=cfg.tolerance, max_iter=cfg.max_iter,
                  accel=cfg.accel, coding=cfg.coding)
    if cfg.method == "combo-em":
        data = {"ystar": ds.columns[cfg.ystar], "X": ds.blocks["X"],
                "Z": ds.blocks["Z"]}
    elif cfg.method == "combo-em-2stage":
        data = {"ystar1": ds.columns[cfg.ystar1],
                "ystar2": ds.columns[cfg.ystar2], "X": ds.blocks["X"],
                "Z1": ds.blocks["Z1"], "Z2": ds.blocks["Z2"]}
    else:
        mstar, y, x, Z, C = _mediation_args(cfg, ds)
        data = {"mstar": mstar, "y": y, "x": x, "Z": Z}
        if C is not None:
            data["C"] = C
        kwargs["interaction"] = cfg.interaction
        if cfg.method in ("comma-em", "comma-pvw"):
            kwargs["dist"] = cfg.dist
    result = bootstrap_se(cfg.method, data, n_replicates=cfg.n_boot,
                          seed=cfg.seed, n_parallel=cfg.n_parallel, **kwargs)
    write_estimates_csv(os.path.join(cfg.out, "estimates.csv"),
                        result.to_frame())
    report["diagnostics"] = _fit_diagnostics(result.point)
    report["diagnostics"]["n_dropped_rows"] = ds.n_dropped
    report["bootstrap"] = {
        "method": result.method,
        "n_replicates": result.n_replicates,
        "n_converged": result.n_converged,
        "ci_level": result.ci_level,
        "ci_lower": result.ci_lower,
        "ci_upper": result.ci_upper,
    }
    write_report_json(os.path.join(cfg.out, "report.json"), report)
    return 0 if result.point.converged else 2


def _shape_coeffs(values: list[float], rows: int, name: str,
                  trailing: tuple[int, ...] = ()) -> np.ndarray:
    """Reshape a flat coefficient list column-by-column, validating length."""
    shape = (rows,) + trailing
    need = int(np.prod(shape))
    if len(values) != need:
        raise ConfigError(f"{name} needs {need} values for this design, "
                          f"got {len(values)}")
    arr = np.asarray(values, dtype=float)
    return arr.reshape(shape, order="F") if trailing else arr


def _check_specs(*spec_lists) -> None:
    for specs in spec_lists:
        for spec in specs:
            try:
                parse_covariate_spec(spec)
            except ValueError as err:
                raise ConfigError(str(err)) from err


def _run_simulate_command(cfg: AnalysisConfig, report: dict) -> int:
    _check_specs(cfg.x_spec, cfg.z_spec, cfg.z1_spec, cfg.z2_spec, cfg.c_spec)
    if cfg.family == "single":
        beta = _shape_coeffs(cfg.beta, 1 + len(cfg.x_spec), "beta")
        gamma = _shape_coeffs(cfg.gamma, 1 + len(cfg.z_spec), "gamma", (2,))
        frame = simulate_single(cfg.n, beta, gamma, x_spec=cfg.x_spec,
                                z_spec=cfg.z_spec, seed=cfg.seed)
        truth = {"beta": beta, "gamma": gamma}
    elif cfg.family == "twostage":
        beta = _shape_coeffs(cfg.beta, 1 + len(cfg.x_spec), "beta")
        gamma1 = _shape_coeffs(cfg.gamma1, 1 + len(cfg.z1_spec), "gamma1",
                               (2,))
        gamma2 = _shape_coeffs(cfg.gamma2, 1 + len(cfg.z2_spec), "gamma2",
                               (2, 2))
        params = TwoStageParams(beta, gamma1, gamma2)
        frame = simulate_twostage(cfg.n, params, x_spec=cfg.x_spec,
                                  z1_spec=cfg.z1_spec, z2_spec=cfg.z2_spec,
                                  seed=cfg.seed)
        truth = {"beta": beta, "gamma1": gamma1, "gamma2": gamma2}
    else:
        if len(cfg.x_spec) != 1:
            raise ConfigError("mediation simulation needs exactly one x_spec")
        beta = _shape_coeffs(cfg.beta, 2 + len(cfg.c_spec), "beta")
        gamma = _shape_coeffs(cfg.gamma, 1 + len(cfg.z_spec), "gamma", (2,))
        n_theta = 3 + len(cfg.c_spec) + (1 if cfg.interaction else 0)
        theta = _shape_coeffs(cfg.theta, n_theta, "theta")
        sigma = cfg.sigma if cfg.dist == "normal" else None
        try:
            params = MediationParams(beta, gamma, theta, sigma, cfg.dist,
                                     cfg.interaction)
        except ValueError as err:
            raise ConfigError(str(err)) from err
        frame = simulate_mediation(cfg.n, params, x_spec=cfg.x_spec,
                                   z_spec=cfg.z_spec, c_spec=cfg.c_spec,
                                   seed=cfg.seed)
        truth = {"beta": beta, "gamma": gamma, "theta": theta,
                 "sigma": sigma, "dist": cfg.dist,
                 "interaction": cfg.interaction}
    frame.to_csv(os.path.join(cfg.out, "simulated.csv"), index=False,
                 lineterminator="\n")
    report["generating_parameters"] = truth
    write_report_json(os.path.join(cfg.out, "params.json"), report)
    return 0


def run(cfg: AnalysisConfig) -> int:
    """Dispatch one resolved configuration and write its outputs."""
    os.makedirs(cfg.out, exist_ok=True)
    report = _base_report(cfg)
    if cfg.command == "simulate":
        return _run_simulate_command(cfg, report)
    ds = load_dataset(cfg.data, cfg)
    try:
        if cfg.command in ("combo-em", "combo-em-2stage", "comma-em",
                           "comma-pvw", "comma-ols"):
            return _run_em_command(cfg, ds, report)
        if cfg.command in ("combo-mcmc", "combo-mcmc-2stage"):
            return _run_mcmc_command(cfg, ds, report)
        if cfg.command == "roc":
            return _run_roc_command(cfg, ds, report)
        return _run_bootstrap_command(cfg, ds, report)
    except (CollinearityError, np.linalg.LinAlgError, RuntimeError,
            ValueError) as err:
        if isinstance(err, ConfigError):
            raise
        report["error"] = str(err)
        write_report_json(os.path.join(cfg.out, "report.json"), report)
        log.error("model fitting failed: %s", err)
        return 2


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s",
                        stream=sys.stderr)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = resolve_config(args)
        return run(cfg)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except SystemExit as err:
        # argparse --version/--help exit through here with code 0
        if isinstance(err.code, int):
            return err.code
        print(err.code, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
