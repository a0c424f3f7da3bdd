"""Stratified cross-validation, micro-F1 evaluation, and weight tuning.

Tuning runs in two stages over pooled out-of-fold predictions:

  1. per label, grid-search the (tfidf, kw) feature-family weights under
     uniform ensemble weights, scoring that label's out-of-fold F1;
  2. grid-search the shared (lr, svm, gbdt) ensemble weights over the pooled
     micro-F1 across all labels, reusing the stage-1 probabilities.

Heavy work is hoisted: the GBDT and the doc-level classifier are invariant
to positive rescaling of feature families (splits and inputs rescale with the
columns), so each is trained once per (label, fold) and reused for every
family candidate; only the two linear models are refit per candidate.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .corpus import MET, Document, NerSpan
from .errors import DataError
from .features import fit_tfidf
from .learners import (
    densify,
    predict_proba_dense,
    train_gbdt_dense,
    train_logreg_dense,
    train_svm_dense,
)
from .pipeline import (
    Hyperparams,
    build_label_features,
    compute_dlc_pairs,
    crossfit_doc_clf,
    derive_seed,
)
from .schema import LabelSchema

DEFAULT_COMPONENT_VALUES = (0.0, 0.5, 1.0, 1.5, 2.0)
DEFAULT_FAMILY_VALUES = (0.5, 1.0, 2.0)


# ---------------------------------------------------------------------------
# stratified folds


@dataclass(frozen=True)
class FoldAssignment:
    k: int
    fold_of: tuple[int, ...]

    def doc_map(self, doc_ids: Sequence[str]) -> dict[str, int]:
        return {doc_id: fold for doc_id, fold in zip(doc_ids, self.fold_of)}


def stratified_kfold(y: Sequence[int], k: int, seed: int) -> FoldAssignment:
    """Shuffle positives and negatives independently, deal each round-robin.

    Every fold's positive count is within one of n_pos // k, and likewise for
    negatives; deterministic given the seed.
    """
    if k < 2:
        raise DataError(f"k must be >= 2, got {k}")
    n = len(y)
    if n < k:
        raise DataError(f"cannot split {n} samples into {k} folds")
    y_arr = np.asarray(y)
    rng = np.random.default_rng(seed)
    fold_of = np.empty(n, dtype=np.int64)
    for cls in (1, 0):
        members = np.flatnonzero(y_arr == cls)
        members = members[rng.permutation(len(members))]
        fold_of[members] = np.arange(len(members)) % k
    return FoldAssignment(k=k, fold_of=tuple(int(f) for f in fold_of))


# ---------------------------------------------------------------------------
# micro-F1 evaluation


@dataclass(frozen=True)
class LabelMetrics:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int


@dataclass(frozen=True)
class EvalReport:
    micro_precision: float
    micro_recall: float
    micro_f1: float
    per_label: dict[str, LabelMetrics]
    n_docs: int


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def micro_f1(gold: Mapping[str, Mapping[str, str]],
             pred: Mapping[str, Mapping[str, str]]) -> EvalReport:
    """Pooled precision/recall/F1 over all (document, label) pairs, with "met"
    as the positive class, plus the same metrics per label."""
    gold_ids = set(gold)
    pred_ids = set(pred)
    if gold_ids != pred_ids:
        first = sorted(gold_ids.symmetric_difference(pred_ids))[0]
        side = "predictions" if first in gold_ids else "gold"
        raise DataError(f"doc id mismatch: {first!r} missing from {side}")
    doc_ids = sorted(gold_ids)
    if not doc_ids:
        raise DataError("cannot evaluate an empty decision map")
    labels = sorted(gold[doc_ids[0]])
    for doc_id in doc_ids:
        for source, decisions in (("gold", gold[doc_id]), ("predictions", pred[doc_id])):
            if sorted(decisions) != labels:
                bad = sorted(set(decisions).symmetric_difference(labels))[0]
                raise DataError(
                    f"label mismatch for doc {doc_id!r} in {source}: {bad!r}"
                )

    per_label: dict[str, LabelMetrics] = {}
    pooled_tp = pooled_fp = pooled_fn = 0
    for label in labels:
        tp = fp = fn = tn = 0
        for doc_id in doc_ids:
            gold_met = gold[doc_id][label] == MET
            pred_met = pred[doc_id][label] == MET
            if pred_met and gold_met:
                tp += 1
            elif pred_met:
                fp += 1
            elif gold_met:
                fn += 1
            else:
                tn += 1
        precision, recall, f1 = _prf(tp, fp, fn)
        per_label[label] = LabelMetrics(precision, recall, f1, tp, fp, fn, tn)
        pooled_tp += tp
        pooled_fp += fp
        pooled_fn += fn
    micro_p, micro_r, micro = _prf(pooled_tp, pooled_fp, pooled_fn)
    return EvalReport(micro_precision=micro_p, micro_recall=micro_r, micro_f1=micro,
                      per_label=per_label, n_docs=len(doc_ids))


def eval_report_to_dict(report: EvalReport) -> dict:
    return {
        "micro_precision": report.micro_precision,
        "micro_recall": report.micro_recall,
        "micro_f1": report.micro_f1,
        "n_docs": report.n_docs,
        "per_label": {
            label: {
                "precision": m.precision, "recall": m.recall, "f1": m.f1,
                "tp": m.tp, "fp": m.fp, "fn": m.fn, "tn": m.tn,
            }
            for label, m in report.per_label.items()
        },
    }


# ---------------------------------------------------------------------------
# grid search


def default_component_grid() -> list[tuple[float, float, float]]:
    grid = [
        triple for triple in itertools.product(DEFAULT_COMPONENT_VALUES, repeat=3)
        if any(w > 0 for w in triple)
    ]
    return grid


def default_family_grid() -> list[tuple[float, float]]:
    return list(itertools.product(DEFAULT_FAMILY_VALUES, repeat=2))


@dataclass
class TuneResult:
    component_weights: tuple[float, float, float]
    family_weights: dict[str, tuple[float, float]]
    report: dict


def _counts_from_probs(prob_matrix: np.ndarray, weights: Sequence[float],
                       y: np.ndarray) -> tuple[int, int, int, int]:
    """Confusion counts for one label given per-model probabilities (n x 3)."""
    w = np.asarray(weights, dtype=np.float64)
    score_met = prob_matrix @ w
    score_not = (1.0 - prob_matrix) @ w
    met = score_met > score_not  # exact ties resolve to "not met"
    tp = int(np.sum(met & (y == 1)))
    fp = int(np.sum(met & (y == 0)))
    fn = int(np.sum(~met & (y == 1)))
    tn = int(np.sum(~met & (y == 0)))
    return tp, fp, fn, tn


def select_component_weights(components: Sequence[tuple[float, float, float]],
                             label_probs: Mapping[str, np.ndarray],
                             label_targets: Mapping[str, np.ndarray],
                             labels: Sequence[str],
                             ) -> tuple[tuple[float, float, float], list[dict]]:
    """Pick the component triple with the best pooled micro-F1.

    Ties prefer the smallest L1 distance to uniform (1, 1, 1), then the
    lexicographically smallest triple.
    """
    rows = []
    best_key = None
    best_triple = tuple(components[0])
    for triple in components:
        pooled_tp = pooled_fp = pooled_fn = 0
        for label in labels:
            tp, fp, fn, _ = _counts_from_probs(label_probs[label], triple,
                                               label_targets[label])
            pooled_tp += tp
            pooled_fp += fp
            pooled_fn += fn
        _, _, micro = _prf(pooled_tp, pooled_fp, pooled_fn)
        distance = sum(abs(w - 1.0) for w in triple)
        rows.append(
            {"weights": list(triple), "micro_f1": micro, "l1_to_uniform": distance}
        )
        key = (-micro, distance, tuple(triple))
        if best_key is None or key < best_key:
            best_key = key
            best_triple = tuple(triple)
    return best_triple, rows


def grid_search_weights(docs: Sequence[Document],
                        spans_by_doc: Mapping[str, list[NerSpan]],
                        gold: Mapping[str, Mapping[str, str]],
                        schema: LabelSchema,
                        gazetteers: Mapping[str, frozenset[str]],
                        hyper: Hyperparams,
                        k: int = 5,
                        seed: int = 0,
                        component_grid: Sequence[tuple[float, float, float]] | None = None,
                        family_grid: Sequence[tuple[float, float]] | None = None,
                        ) -> TuneResult:
    """Tune feature-family and ensemble weights by pooled out-of-fold micro-F1.

    Folds are stratified per label on that label's own positives. A fold whose
    training part is single-class for some label falls back to a constant
    base-rate predictor there (recorded in the report) instead of failing.
    Ties prefer the candidate closest to uniform weights in L1 distance, then
    the lexicographically smallest.
    """
    components = list(component_grid) if component_grid is not None else default_component_grid()
    families = list(family_grid) if family_grid is not None else default_family_grid()
    if not components or not families:
        raise DataError("weight grids must be non-empty")
    for triple in components:
        if len(triple) != 3 or all(w == 0 for w in triple):
            raise DataError(f"invalid component candidate {triple!r}")
    for pair in families:
        if len(pair) != 2 or any(w <= 0 for w in pair):
            raise DataError(f"invalid family candidate {pair!r} (weights must be > 0)")

    n = len(docs)
    fallbacks: list[dict] = []
    family_stage: dict[str, dict] = {}
    selected_family: dict[str, tuple[float, float]] = {}
    # per label: out-of-fold (n x 3) probabilities at the selected family weights
    label_probs: dict[str, np.ndarray] = {}
    label_targets: dict[str, np.ndarray] = {}

    for label in schema.labels:
        cfg = schema.config_for(label)
        y = np.array([1 if gold[doc.id][label] == MET else 0 for doc in docs])
        label_targets[label] = y
        folds = stratified_kfold(y, k, seed)
        fold_of = np.asarray(folds.fold_of)

        # oof[cand][row] = (p_lr, p_svm, p_gbdt)
        oof = np.zeros((len(families), n, 3))
        for fold in range(k):
            held = fold_of == fold
            train = ~held
            y_train = y[train]
            if y_train.min() == y_train.max():
                base_rate = float(y_train.mean())
                oof[:, held, :] = base_rate
                fallbacks.append(
                    {"label": label, "fold": fold, "train_base_rate": base_rate}
                )
                continue
            train_docs = [doc for doc, keep in zip(docs, train) if keep]
            held_docs = [doc for doc, keep in zip(docs, held) if keep]
            tfidf_fold = fit_tfidf(train_docs, min_df=hyper.tfidf.min_df)

            dlc_train = dlc_held = None
            if cfg.use_doc_clf:
                doc_clf, dlc_train = crossfit_doc_clf(
                    train_docs, y_train, hyper.doc_clf,
                    seed=derive_seed(seed, "cv-docclf", label, fold),
                )
                dlc_held = compute_dlc_pairs(doc_clf, held_docs)

            # unit-weight vectors; family candidates rescale columns below
            space, train_vecs = build_label_features(
                label, train_docs, spans_by_doc, tfidf_fold, dlc_train, schema,
                gazetteers, tfidf_weight=1.0, kw_weight=1.0,
            )
            _, held_vecs = build_label_features(
                label, held_docs, spans_by_doc, tfidf_fold, dlc_held, schema,
                gazetteers, space=space, tfidf_weight=1.0, kw_weight=1.0,
            )
            width = len(space)
            x_train = densify(train_vecs, width)
            x_held = densify(held_vecs, width)
            tfidf_cols = np.asarray(space.family_ids("tfidf:"), dtype=np.int64)
            kw_cols = np.asarray(space.family_ids("kw:"), dtype=np.int64)

            gbdt = train_gbdt_dense(
                x_train, y_train.astype(np.float64), rounds=hyper.gbdt.rounds,
                max_depth=hyper.gbdt.max_depth, shrinkage=hyper.gbdt.shrinkage,
                min_leaf=hyper.gbdt.min_leaf,
            )
            gbdt_probs = predict_proba_dense(gbdt, x_held)

            svm_seed = derive_seed(seed, "cv-svm", label, fold)
            for cand_idx, (tfidf_w, kw_w) in enumerate(families):
                xt = x_train.copy()
                xh = x_held.copy()
                if len(tfidf_cols):
                    xt[:, tfidf_cols] *= tfidf_w
                    xh[:, tfidf_cols] *= tfidf_w
                if len(kw_cols):
                    xt[:, kw_cols] *= kw_w
                    xh[:, kw_cols] *= kw_w
                logreg = train_logreg_dense(
                    xt, y_train.astype(np.float64), l2=hyper.logreg.l2,
                    iters=hyper.logreg.iters, lr=hyper.logreg.lr,
                )
                svm = train_svm_dense(
                    xt, y_train.astype(np.float64), l2=hyper.svm.l2,
                    epochs=hyper.svm.epochs, seed=svm_seed,
                )
                oof[cand_idx, held, 0] = predict_proba_dense(logreg, xh)
                oof[cand_idx, held, 1] = predict_proba_dense(svm, xh)
                oof[cand_idx, held, 2] = gbdt_probs

        # stage 1: pick the family pair by this label's own OOF F1 at uniform
        # ensemble weights
        candidate_rows = []
        best_key = None
        best_idx = 0
        for cand_idx, pair in enumerate(families):
            tp, fp, fn, _ = _counts_from_probs(oof[cand_idx], (1.0, 1.0, 1.0), y)
            _, _, f1 = _prf(tp, fp, fn)
            candidate_rows.append({"tfidf": pair[0], "kw": pair[1], "f1": f1})
            key = (-f1, abs(pair[0] - 1.0) + abs(pair[1] - 1.0), pair)
            if best_key is None or key < best_key:
                best_key = key
                best_idx = cand_idx
        selected_family[label] = tuple(families[best_idx])
        family_stage[label] = {
            "candidates": candidate_rows,
            "selected": list(families[best_idx]),
        }
        label_probs[label] = oof[best_idx]

    # stage 2: shared component weights by pooled micro-F1
    best_triple, component_rows = select_component_weights(
        components, label_probs, label_targets, schema.labels
    )

    # final pooled breakdown at the selected weights
    per_label_final = {}
    pooled_tp = pooled_fp = pooled_fn = 0
    for label in schema.labels:
        tp, fp, fn, tn = _counts_from_probs(label_probs[label], best_triple,
                                            label_targets[label])
        precision, recall, f1 = _prf(tp, fp, fn)
        per_label_final[label] = {
            "precision": precision, "recall": recall, "f1": f1,
            "tp": tp, "fp": fp, "fn": fn, "tn": tn,
        }
        pooled_tp += tp
        pooled_fp += fp
        pooled_fn += fn
    micro_p, micro_r, micro = _prf(pooled_tp, pooled_fp, pooled_fn)

    report = {
        "seed": seed,
        "folds": k,
        "grid": {
            "components": [list(t) for t in components],
            "families": [list(p) for p in families],
        },
        "family_stage": family_stage,
        "component_stage": {
            "candidates": component_rows,
            "selected": list(best_triple),
        },
        "fallbacks": fallbacks,
        "selected": {
            "ensemble_weights": list(best_triple),
            "family_weights": {label: list(pair) for label, pair in selected_family.items()},
        },
        "cv_metrics": {
            "micro_precision": micro_p,
            "micro_recall": micro_r,
            "micro_f1": micro,
            "per_label": per_label_final,
        },
    }
    return TuneResult(component_weights=best_triple,
                      family_weights=selected_family, report=report)
