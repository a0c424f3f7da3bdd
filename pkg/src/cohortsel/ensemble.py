"""Weighted soft-voting over the three per-label classifiers.

Each member contributes weight * probability to the "met" score and
weight * (1 - probability) to the "not met" score; the decision is the argmax
with exact ties resolving to "not met" (conservative for trial inclusion).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .corpus import MET, NOT_MET
from .doclevel import DocClfModel
from .errors import DataError
from .features import SparseVec
from .learners import GbdtModel, LinearModel, predict_proba


def validate_weights(weights: Sequence[float]) -> tuple[float, float, float]:
    if len(weights) != 3:
        raise DataError("ensemble weights must be a (lr, svm, gbdt) triple")
    triple = tuple(float(w) for w in weights)
    if any(not math.isfinite(w) or w < 0 for w in triple):
        raise DataError("ensemble weights must be finite and non-negative")
    if all(w == 0 for w in triple):
        raise DataError("ensemble weights must not all be zero")
    return triple


@dataclass
class LabelEnsemble:
    """Trained members and voting weights for one label."""

    logreg: LinearModel
    svm: LinearModel
    gbdt: GbdtModel
    weights: tuple[float, float, float]
    doc_clf: DocClfModel | None = None

    def __post_init__(self) -> None:
        self.weights = validate_weights(self.weights)


def member_probs(entry: LabelEnsemble, x: SparseVec) -> tuple[float, float, float]:
    return (
        predict_proba(entry.logreg, x),
        predict_proba(entry.svm, x),
        predict_proba(entry.gbdt, x),
    )


def ensemble_scores_from_probs(weights: Sequence[float], probs: Sequence[float]
                               ) -> tuple[float, float]:
    """Weighted probability sums; the two scores always total sum(weights)."""
    score_met = sum(w * p for w, p in zip(weights, probs))
    score_not_met = sum(w * (1.0 - p) for w, p in zip(weights, probs))
    return score_met, score_not_met


def ensemble_scores(entry: LabelEnsemble, x: SparseVec) -> tuple[float, float]:
    return ensemble_scores_from_probs(entry.weights, member_probs(entry, x))


def decide(scores: tuple[float, float]) -> str:
    score_met, score_not_met = scores
    return MET if score_met > score_not_met else NOT_MET
