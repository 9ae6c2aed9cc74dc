"""Misclassification-adjusted ROC analysis and selective-labels ROC.

The adjusted curve weights each subject's threshold indicator by its
posterior class probabilities instead of hard labels, so the curve can
be computed when true outcomes are never observed.  The subset curve is
the ordinary empirical ROC on the labeled subpopulation, with a binary
recommendation overlaid as a single operating point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .twostage import TwoStageParams, e_step_weights_2stage


@dataclass
class RocCurve:
    cutoffs: np.ndarray
    tpr: np.ndarray
    fpr: np.ndarray
    auc: float


@dataclass
class ClassifierPoint:
    """Operating point of a binary recommendation plus its rank AUC."""

    fpr: float
    tpr: float
    auc: float


def default_cutoffs() -> np.ndarray:
    return np.linspace(0.0, 1.0, 101)


def _rates(risk: np.ndarray, w1: np.ndarray, w2: np.ndarray,
           cutoffs: np.ndarray):
    total1 = float(np.sum(w1))
    total2 = float(np.sum(w2))
    if total1 <= 0.0:
        raise ValueError("no positive-class weight; TPR undefined")
    if total2 <= 0.0:
        raise ValueError("no negative-class weight; FPR undefined")
    above = risk[None, :] > cutoffs[:, None]
    tpr = (above @ w1) / total1
    fpr = (above @ w2) / total2
    return tpr, fpr


def _trapezoid_auc(tpr: np.ndarray, fpr: np.ndarray) -> float:
    # Cutoffs ascend, so the rates descend; integrate on the reversed grid.
    return float(np.trapezoid(tpr[::-1], fpr[::-1]))


def adjusted_roc(risk, weights, cutoffs=None) -> RocCurve:
    """ROC built from posterior class weights.

    TPR(c) = sum_i w_i1 1[risk_i > c] / sum_i w_i1, and FPR analogously
    with the second weight column.
    """
    risk = np.asarray(risk, dtype=float).reshape(-1)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (risk.shape[0], 2):
        raise ValueError("weights must be (N, 2)")
    if np.any(weights < 0):
        raise ValueError("weights must be nonnegative")
    if np.max(np.abs(weights.sum(axis=1) - 1.0)) > 1e-8:
        raise ValueError("weight rows must sum to 1")
    if np.any((risk < 0) | (risk > 1)):
        raise ValueError("risk scores must lie in [0, 1]")
    cutoffs = default_cutoffs() if cutoffs is None else \
        np.asarray(cutoffs, dtype=float).reshape(-1)
    tpr, fpr = _rates(risk, weights[:, 0], weights[:, 1], cutoffs)
    return RocCurve(cutoffs, tpr, fpr, _trapezoid_auc(tpr, fpr))


def subset_roc(risk, labels, cutoffs=None) -> RocCurve:
    """Empirical ROC on a labeled subset (labels in {0, 1}, 1 = event)."""
    labels = np.asarray(labels, dtype=float).reshape(-1)
    if not np.all(np.isin(labels, (0.0, 1.0))):
        raise ValueError("labels must be 0/1")
    if labels.min() == labels.max():
        raise ValueError("labels contain a single class; ROC undefined")
    risk = np.asarray(risk, dtype=float).reshape(-1)
    cutoffs = default_cutoffs() if cutoffs is None else \
        np.asarray(cutoffs, dtype=float).reshape(-1)
    tpr, fpr = _rates(risk, labels, 1.0 - labels, cutoffs)
    return RocCurve(cutoffs, tpr, fpr, _trapezoid_auc(tpr, fpr))


def classifier_point(recommendation, labels) -> ClassifierPoint:
    """Single ROC point for a 0/1 recommendation on labeled data.

    The AUC treats the recommendation as a two-valued score, so it equals
    (TPR + 1 - FPR) / 2, the tie-corrected rank statistic.
    """
    rec = np.asarray(recommendation, dtype=float).reshape(-1)
    labels = np.asarray(labels, dtype=float).reshape(-1)
    if not np.all(np.isin(rec, (0.0, 1.0))):
        raise ValueError("recommendation must be 0/1")
    if not np.all(np.isin(labels, (0.0, 1.0))):
        raise ValueError("labels must be 0/1")
    if labels.min() == labels.max():
        raise ValueError("labels contain a single class")
    tpr = float(np.mean(rec[labels == 1.0]))
    fpr = float(np.mean(rec[labels == 0.0]))
    return ClassifierPoint(fpr, tpr, 0.5 * (tpr + 1.0 - fpr))


def predictive_prob_2stage(params: TwoStageParams, X, Z1, Z2, ystar1, ystar2,
                           coding: str = "1,2") -> np.ndarray:
    """Posterior class weights for ROC adjustment; the E-step weights."""
    return e_step_weights_2stage(params, X, Z1, Z2, ystar1, ystar2, coding)
