"""Regression with misclassified binary outcomes and mediators.

Estimators for three model families: a single misclassified binary
outcome, two-stage sequential misclassified outcomes, and mediation with
a misclassified binary mediator.  Each family gets likelihood-based EM
estimation with label-switching correction; the outcome families also
get a self-contained MCMC sampler, and the mediation family adds
predictive-value weighting and an OLS correction.  Supporting tools:
misclassification-adjusted ROC analysis, nonparametric bootstrap
standard errors, generative simulators, and a config-driven CLI.
"""

__version__ = "0.1.0"

from .bootstrap import BootstrapResult, bootstrap_se
from .config import AnalysisConfig, ConfigError, build_config, validate_config
from .dataio import Dataset, load_dataset
from .glm import (CollinearityError, GlmFit, add_intercept, expit,
                  fit_weighted_linear, fit_weighted_logistic,
                  fit_weighted_poisson, logit)
from .mcmc import (ChainSet, McmcResult, PriorSpec, batch_means_mcse,
                   mcmc_fit, mcmc_fit_2stage)
from .mediation import (EffectEstimates, MediationParams, effect_estimates,
                        em_fit_mediation, mediator_probs, ols_correct,
                        outcome_loglik_contrib, predictive_values, pvw_fit)
from .report import FitReport
from .roc import (ClassifierPoint, RocCurve, adjusted_roc, classifier_point,
                  predictive_prob_2stage, subset_roc)
from .simulate import (draw_covariates, parse_covariate_spec,
                       simulate_mediation, simulate_single, simulate_twostage)
from .single import (SingleOutcomeParams, compute_pi, compute_pistar,
                     comparison_fits, e_step_weights, em_fit,
                     label_switch_correct, misclassification_prob, naive_fit,
                     observed_loglik, true_classification_prob)
from .twostage import (TwoStageParams, compute_pitilde, e_step_weights_2stage,
                       em_fit_2stage, joint_obs_prob,
                       label_switch_correct_2stage, naive_fit_2stage,
                       observed_loglik_2stage, second_stage_accuracy)

__all__ = [
    "BootstrapResult", "bootstrap_se",
    "AnalysisConfig", "ConfigError", "build_config", "validate_config",
    "Dataset", "load_dataset",
    "CollinearityError", "GlmFit", "add_intercept", "expit",
    "fit_weighted_linear", "fit_weighted_logistic", "fit_weighted_poisson",
    "logit",
    "ChainSet", "McmcResult", "PriorSpec", "batch_means_mcse", "mcmc_fit",
    "mcmc_fit_2stage",
    "EffectEstimates", "MediationParams", "effect_estimates",
    "em_fit_mediation", "mediator_probs", "ols_correct",
    "outcome_loglik_contrib", "predictive_values", "pvw_fit",
    "FitReport",
    "ClassifierPoint", "RocCurve", "adjusted_roc", "classifier_point",
    "predictive_prob_2stage", "subset_roc",
    "draw_covariates", "parse_covariate_spec", "simulate_mediation",
    "simulate_single", "simulate_twostage",
    "SingleOutcomeParams", "compute_pi", "compute_pistar", "comparison_fits",
    "e_step_weights", "em_fit", "label_switch_correct",
    "misclassification_prob", "naive_fit", "observed_loglik",
    "true_classification_prob",
    "TwoStageParams", "compute_pitilde", "e_step_weights_2stage",
    "em_fit_2stage", "joint_obs_prob", "label_switch_correct_2stage",
    "naive_fit_2stage", "observed_loglik_2stage", "second_stage_accuracy",
]
