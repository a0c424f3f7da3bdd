"""Pipeline configuration, end-to-end training, and prediction.

A pipeline config is a single JSON document naming the data files, the label
schema with per-label feature recipes, every hyperparameter, the ensemble
weights, and the global seed. Validation is eager and error messages carry
the offending field path.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .corpus import (
    MET,
    NER_TAGS,
    Document,
    NerSpan,
    dictionary_ner,
    load_corpus,
    load_gold,
    load_ner_annotations,
    load_phrase_list,
    validate_gold,
)
from .doclevel import DocClfModel, doc_class_probs, fnv1a_64, train_doc_classifier
from .ensemble import LabelEnsemble, decide, ensemble_scores, validate_weights
from .errors import ConfigError, DataError
from .features import FeatureSpace, SparseVec, TfidfModel, assemble, fit_tfidf
from .learners import train_gbdt, train_linear_svm, train_logreg
from .schema import GazetteerRef, LabelConfig, LabelSchema, TriggerSet


# ---------------------------------------------------------------------------
# hyperparameters


@dataclass(frozen=True)
class TfidfParams:
    min_df: int = 1


@dataclass(frozen=True)
class DocClfParams:
    dim: int = 16
    bucket_count: int = 1 << 18
    epochs: int = 5
    lr0: float = 0.1


@dataclass(frozen=True)
class LogregParams:
    l2: float = 1e-4
    iters: int = 200
    lr: float = 0.5


@dataclass(frozen=True)
class SvmParams:
    l2: float = 1e-4
    epochs: int = 20


@dataclass(frozen=True)
class GbdtParams:
    rounds: int = 100
    max_depth: int = 3
    shrinkage: float = 0.1
    min_leaf: int = 2


@dataclass(frozen=True)
class Hyperparams:
    tfidf: TfidfParams = TfidfParams()
    doc_clf: DocClfParams = DocClfParams()
    logreg: LogregParams = LogregParams()
    svm: SvmParams = SvmParams()
    gbdt: GbdtParams = GbdtParams()


def derive_seed(base: int, *parts: object) -> int:
    """Stable per-component seed derived from the global seed and a tag."""
    key = ":".join([str(base), *(str(p) for p in parts)])
    return fnv1a_64(key.encode("utf-8")) % (2 ** 31)


# ---------------------------------------------------------------------------
# configuration


@dataclass
class PipelineConfig:
    base_dir: Path
    seed: int
    corpus_path: Path
    gold_path: Path | None
    annotations_path: Path | None
    ner_lexicons: dict[str, Path]  # tag -> phrase file, optional fallback tagger
    schema: LabelSchema
    hyper: Hyperparams
    ensemble_weights: tuple[float, float, float]
    per_label_weights: dict[str, tuple[float, float, float]]
    folds: int
    model_path: Path | None

    def weights_for(self, label: str) -> tuple[float, float, float]:
        return self.per_label_weights.get(label, self.ensemble_weights)


class _Reader:
    """Typed dict access that reports the full path of a bad field."""

    def __init__(self, obj: Mapping, path: str):
        if not isinstance(obj, Mapping):
            raise ConfigError(f"{path}: expected an object")
        self.obj = obj
        self.path = path

    def child(self, key: str) -> "_Reader":
        return _Reader(self.require(key, Mapping), f"{self.path}.{key}")

    def require(self, key: str, kind) -> object:
        if key not in self.obj:
            raise ConfigError(f"{self.path}.{key}: missing required field")
        return self._checked(key, self.obj[key], kind)

    def get(self, key: str, kind, default):
        if key not in self.obj:
            return default
        return self._checked(key, self.obj[key], kind)

    def _checked(self, key, value, kind):
        if kind is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{self.path}.{key}: expected a number")
            return float(value)
        if kind is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{self.path}.{key}: expected an integer")
            return value
        if not isinstance(value, kind):
            raise ConfigError(f"{self.path}.{key}: expected {kind.__name__}")
        return value


def _parse_label_config(label: str, raw: Mapping) -> LabelConfig:
    reader = _Reader(raw, f"labels.{label}")
    gazetteers = []
    for i, item in enumerate(reader.get("gazetteers", list, [])):
        sub = _Reader(item, f"labels.{label}.gazetteers[{i}]")
        gazetteers.append(
            GazetteerRef(
                file=sub.require("file", str),
                window=sub.get("window", int, 5),
                weight=sub.get("weight", float, 2.0),
            )
        )
    triggers = []
    for i, item in enumerate(reader.get("triggers", list, [])):
        sub = _Reader(item, f"labels.{label}.triggers[{i}]")
        words = sub.require("words", list)
        if not all(isinstance(w, str) for w in words):
            raise ConfigError(f"labels.{label}.triggers[{i}].words: expected strings")
        triggers.append(
            TriggerSet(
                words=tuple(w.lower() for w in words),
                window=sub.get("window", int, 5),
                weight=sub.get("weight", float, 2.0),
            )
        )
    imports = reader.get("imports", list, [])
    if not all(isinstance(name, str) for name in imports):
        raise ConfigError(f"labels.{label}.imports: expected label-name strings")
    cues = reader.get("cues", list, [])
    return LabelConfig(
        label=label,
        tfidf_weight=reader.get("tfidf_weight", float, 1.0),
        kw_weight=reader.get("kw_weight", float, 1.0),
        gazetteers=tuple(gazetteers),
        triggers=tuple(triggers),
        imports=tuple(imports),
        use_doc_clf=reader.get("use_doc_clf", bool, True),
        cues=tuple(cues),
    )


def config_from_dict(raw: Mapping, base_dir: Path) -> PipelineConfig:
    root = _Reader(raw, "config")
    seed = root.require("seed", int)

    label_order = root.require("label_order", list)
    if not all(isinstance(name, str) for name in label_order):
        raise ConfigError("config.label_order: expected label-name strings")
    labels_raw = root.require("labels", Mapping)
    configs = {
        label: _parse_label_config(label, labels_raw.get(label, {}))
        for label in label_order
    }
    extra = set(labels_raw) - set(label_order)
    if extra:
        raise ConfigError(f"config.labels: {sorted(extra)} not present in label_order")
    schema = LabelSchema(labels=tuple(label_order), configs=configs)

    paths = root.child("paths")
    corpus_path = base_dir / paths.require("corpus", str)
    gold_raw = paths.get("gold", str, None)
    annotations_raw = paths.get("annotations", str, None)
    gold_path = base_dir / gold_raw if gold_raw else None
    annotations_path = base_dir / annotations_raw if annotations_raw else None

    ner_lexicons: dict[str, Path] = {}
    for tag, rel in root.get("ner_lexicons", Mapping, {}).items():
        if tag not in NER_TAGS:
            raise ConfigError(f"config.ner_lexicons: unknown tag {tag!r}")
        if not isinstance(rel, str):
            raise ConfigError(f"config.ner_lexicons.{tag}: expected a path string")
        ner_lexicons[tag] = base_dir / rel

    tfidf_r = root.child("tfidf") if "tfidf" in raw else None
    doc_clf_r = root.child("doc_clf") if "doc_clf" in raw else None
    logreg_r = root.child("logreg") if "logreg" in raw else None
    svm_r = root.child("svm") if "svm" in raw else None
    gbdt_r = root.child("gbdt") if "gbdt" in raw else None
    hyper = Hyperparams(
        tfidf=TfidfParams(min_df=tfidf_r.get("min_df", int, 1) if tfidf_r else 1),
        doc_clf=DocClfParams(
            dim=doc_clf_r.get("dim", int, 16) if doc_clf_r else 16,
            bucket_count=doc_clf_r.get("bucket_count", int, 1 << 18) if doc_clf_r else 1 << 18,
            epochs=doc_clf_r.get("epochs", int, 5) if doc_clf_r else 5,
            lr0=doc_clf_r.get("lr0", float, 0.1) if doc_clf_r else 0.1,
        ),
        logreg=LogregParams(
            l2=logreg_r.get("l2", float, 1e-4) if logreg_r else 1e-4,
            iters=logreg_r.get("iters", int, 200) if logreg_r else 200,
            lr=logreg_r.get("lr", float, 0.5) if logreg_r else 0.5,
        ),
        svm=SvmParams(
            l2=svm_r.get("l2", float, 1e-4) if svm_r else 1e-4,
            epochs=svm_r.get("epochs", int, 20) if svm_r else 20,
        ),
        gbdt=GbdtParams(
            rounds=gbdt_r.get("rounds", int, 100) if gbdt_r else 100,
            max_depth=gbdt_r.get("max_depth", int, 3) if gbdt_r else 3,
            shrinkage=gbdt_r.get("shrinkage", float, 0.1) if gbdt_r else 0.1,
            min_leaf=gbdt_r.get("min_leaf", int, 2) if gbdt_r else 2,
        ),
    )

    weights_raw = root.get("ensemble_weights", list, [1.0, 1.0, 1.0])
    try:
        ensemble_weights = validate_weights(weights_raw)
    except DataError as exc:
        raise ConfigError(f"config.ensemble_weights: {exc}") from exc
    per_label_weights = {}
    for label, triple in root.get("per_label_weights", Mapping, {}).items():
        if label not in schema.labels:
            raise ConfigError(f"config.per_label_weights: unknown label {label!r}")
        try:
            per_label_weights[label] = validate_weights(triple)
        except DataError as exc:
            raise ConfigError(f"config.per_label_weights.{label}: {exc}") from exc

    tuner_r = root.child("tuner") if "tuner" in raw else None
    folds = tuner_r.get("folds", int, 5) if tuner_r else 5
    if folds < 2:
        raise ConfigError("config.tuner.folds: must be >= 2")

    model_rel = root.get("model_path", str, None)

    cfg = PipelineConfig(
        base_dir=base_dir,
        seed=seed,
        corpus_path=corpus_path,
        gold_path=gold_path,
        annotations_path=annotations_path,
        ner_lexicons=ner_lexicons,
        schema=schema,
        hyper=hyper,
        ensemble_weights=ensemble_weights,
        per_label_weights=per_label_weights,
        folds=folds,
        model_path=base_dir / model_rel if model_rel else None,
    )
    _check_referenced_files(cfg)
    return cfg


def _check_referenced_files(cfg: PipelineConfig) -> None:
    referenced: list[tuple[str, Path]] = [("paths.corpus", cfg.corpus_path)]
    if cfg.gold_path:
        referenced.append(("paths.gold", cfg.gold_path))
    if cfg.annotations_path:
        referenced.append(("paths.annotations", cfg.annotations_path))
    for tag, path in sorted(cfg.ner_lexicons.items()):
        referenced.append((f"ner_lexicons.{tag}", path))
    for label in cfg.schema.labels:
        for i, gaz in enumerate(cfg.schema.config_for(label).gazetteers):
            referenced.append((f"labels.{label}.gazetteers[{i}].file",
                               cfg.base_dir / gaz.file))
    for field_path, path in referenced:
        if not path.is_file():
            raise ConfigError(f"config.{field_path}: file not found: {path}")
    if cfg.gold_path:
        gold = load_gold(cfg.gold_path)
        label_sets = {frozenset(decisions) for decisions in gold.values()}
        schema_set = frozenset(cfg.schema.labels)
        for found in label_sets:
            if found != schema_set:
                raise ConfigError(
                    "config.paths.gold: gold label set does not match the schema "
                    f"(gold has {sorted(found)})"
                )


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON ({exc.msg})") from exc
    return config_from_dict(raw, path.parent.resolve())


def label_config_to_dict(lc: LabelConfig) -> dict:
    return {
        "tfidf_weight": lc.tfidf_weight,
        "kw_weight": lc.kw_weight,
        "gazetteers": [
            {"file": g.file, "window": g.window, "weight": g.weight}
            for g in lc.gazetteers
        ],
        "triggers": [
            {"words": list(t.words), "window": t.window, "weight": t.weight}
            for t in lc.triggers
        ],
        "imports": list(lc.imports),
        "use_doc_clf": lc.use_doc_clf,
    }


def config_to_dict(cfg: PipelineConfig, base_dir: Path | None = None) -> dict:
    """Normalized, JSON-ready snapshot with paths relative to ``base_dir``
    (the config's own directory by default)."""
    anchor = base_dir if base_dir is not None else cfg.base_dir

    def rel(p: Path | None) -> str | None:
        if p is None:
            return None
        return Path(os.path.relpath(p, anchor)).as_posix()

    labels = {}
    for label in cfg.schema.labels:
        entry = label_config_to_dict(cfg.schema.config_for(label))
        for gaz in entry["gazetteers"]:
            gaz["file"] = rel(cfg.base_dir / gaz["file"])
        labels[label] = entry
    out = {
        "seed": cfg.seed,
        "paths": {
            key: value
            for key, value in (
                ("corpus", rel(cfg.corpus_path)),
                ("annotations", rel(cfg.annotations_path)),
                ("gold", rel(cfg.gold_path)),
            )
            if value is not None
        },
        "label_order": list(cfg.schema.labels),
        "labels": labels,
        "ensemble_weights": list(cfg.ensemble_weights),
        "per_label_weights": {k: list(v) for k, v in sorted(cfg.per_label_weights.items())},
        "tfidf": {"min_df": cfg.hyper.tfidf.min_df},
        "doc_clf": {
            "dim": cfg.hyper.doc_clf.dim,
            "bucket_count": cfg.hyper.doc_clf.bucket_count,
            "epochs": cfg.hyper.doc_clf.epochs,
            "lr0": cfg.hyper.doc_clf.lr0,
        },
        "logreg": {
            "l2": cfg.hyper.logreg.l2,
            "iters": cfg.hyper.logreg.iters,
            "lr": cfg.hyper.logreg.lr,
        },
        "svm": {"l2": cfg.hyper.svm.l2, "epochs": cfg.hyper.svm.epochs},
        "gbdt": {
            "rounds": cfg.hyper.gbdt.rounds,
            "max_depth": cfg.hyper.gbdt.max_depth,
            "shrinkage": cfg.hyper.gbdt.shrinkage,
            "min_leaf": cfg.hyper.gbdt.min_leaf,
        },
        "tuner": {"folds": cfg.folds},
    }
    if cfg.ner_lexicons:
        out["ner_lexicons"] = {tag: rel(p) for tag, p in sorted(cfg.ner_lexicons.items())}
    if cfg.model_path:
        out["model_path"] = rel(cfg.model_path)
    return out


def demo_config_dict(seed: int) -> dict:
    """Ready-to-train config for a synthesized data directory.

    Desk-scale overrides, validated on the synthetic benchmark: 2^15 hash
    buckets and lr0=0.5 for the doc classifiers, min_df=2 for the TF-IDF
    vocabulary, l2=3e-3 for the logistic members, and ensemble weights
    favoring the strongest member (GBDT), as a component-weight experiment
    selects; everything else uses the library defaults.
    """
    from .schema import default_schema

    schema = default_schema()
    return {
        "seed": seed,
        "paths": {
            "corpus": "corpus.jsonl",
            "annotations": "annotations.tsv",
            "gold": "gold.json",
        },
        "label_order": list(schema.labels),
        "labels": {
            label: label_config_to_dict(schema.config_for(label))
            for label in schema.labels
        },
        "ensemble_weights": [1.0, 1.0, 2.0],
        "tfidf": {"min_df": 2},
        "doc_clf": {"dim": 16, "bucket_count": 1 << 15, "epochs": 5, "lr0": 0.5},
        "logreg": {"l2": 3e-3, "iters": 200, "lr": 0.5},
        "svm": {"l2": 1e-4, "epochs": 20},
        "gbdt": {"rounds": 100, "max_depth": 3, "shrinkage": 0.1, "min_leaf": 2},
        "tuner": {"folds": 5},
        "model_path": "model.json",
    }


# ---------------------------------------------------------------------------
# shared fitting machinery


def load_gazetteers(schema: LabelSchema, base_dir: Path) -> dict[str, frozenset[str]]:
    out: dict[str, frozenset[str]] = {}
    seen_files: dict[str, Path] = {}
    for label in schema.labels:
        for gaz in schema.config_for(label).gazetteers:
            path = base_dir / gaz.file
            if gaz.name in seen_files and seen_files[gaz.name] != path:
                raise ConfigError(
                    f"gazetteer name {gaz.name!r} refers to two different files"
                )
            if gaz.name not in out:
                seen_files[gaz.name] = path
                out[gaz.name] = frozenset(load_phrase_list(path))
    return out


def load_ner_lexicon(paths: Mapping[str, Path]) -> dict[str, str]:
    """Merge per-tag phrase files into one phrase -> tag dictionary."""
    lexicon: dict[str, str] = {}
    for tag in NER_TAGS:
        if tag not in paths:
            continue
        for phrase in load_phrase_list(paths[tag]):
            lexicon[phrase] = tag
    return lexicon


def resolve_spans(docs: Sequence[Document], annotations_path: Path | None,
                  ner_lexicon: Mapping[str, str] | None) -> dict[str, list[NerSpan]]:
    if annotations_path is not None:
        return load_ner_annotations(annotations_path, list(docs))
    if ner_lexicon:
        return {doc.id: dictionary_ner(doc, ner_lexicon) for doc in docs}
    return {doc.id: [] for doc in docs}


def compute_dlc_pairs(doc_clf: DocClfModel, docs: Sequence[Document]
                      ) -> list[tuple[float, float]]:
    pairs = []
    for doc in docs:
        probs = doc_class_probs(doc_clf, doc)
        pairs.append((probs[0], probs[1]))
    return pairs


def crossfit_doc_clf(docs: Sequence[Document], y: Sequence[int], params: DocClfParams,
                     seed: int) -> tuple[DocClfModel, list[tuple[float, float]]]:
    """Train the doc-level classifier and produce leak-free training features.

    The returned model is fit on all documents (used at predict time); the
    returned (met, not_met) pairs are out-of-fold predictions from an internal
    3-fold split, so downstream learners see the classifier's honest test-time
    noise instead of its memorized training labels.
    """
    token_lists = [[t.surface for t in doc.tokens] for doc in docs]
    clf_labels = [0 if target == 1 else 1 for target in y]  # class 0 = met
    full = train_doc_classifier(
        token_lists, clf_labels, n_classes=2, dim=params.dim,
        bucket_count=params.bucket_count, epochs=params.epochs, lr0=params.lr0,
        seed=seed,
    )
    y_arr = np.asarray(clf_labels)
    fold = _stratified_assignment(y_arr, 3, np.random.default_rng([seed, 3]))
    pairs: list[tuple[float, float] | None] = [None] * len(docs)
    for f in range(3):
        held = np.flatnonzero(fold == f)
        rest = np.flatnonzero(fold != f)
        rest_labels = [clf_labels[i] for i in rest]
        if len(held) == 0:
            continue
        if len(set(rest_labels)) < 2:
            # degenerate complement: fall back to the full model's view
            for i in held:
                probs = doc_class_probs(full, docs[i])
                pairs[i] = (probs[0], probs[1])
            continue
        sub = train_doc_classifier(
            [token_lists[i] for i in rest], rest_labels, n_classes=2,
            dim=params.dim, bucket_count=params.bucket_count,
            epochs=params.epochs, lr0=params.lr0, seed=derive_seed(seed, "oof", f),
        )
        for i in held:
            probs = doc_class_probs(sub, docs[i])
            pairs[i] = (probs[0], probs[1])
    return full, pairs  # type: ignore[return-value]


def _stratified_assignment(y_arr, k: int, rng) -> np.ndarray:
    """Round-robin fold deal per class after a seeded shuffle."""
    fold = np.empty(len(y_arr), dtype=np.int64)
    for cls in sorted(set(int(v) for v in y_arr), reverse=True):
        members = np.flatnonzero(y_arr == cls)
        members = members[rng.permutation(len(members))]
        fold[members] = np.arange(len(members)) % k
    return fold


def build_label_features(label: str, docs: Sequence[Document],
                         spans_by_doc: Mapping[str, list[NerSpan]],
                         tfidf_model: TfidfModel | None,
                         dlc_pairs: Sequence[tuple[float, float]] | None,
                         schema: LabelSchema,
                         gazetteers: Mapping[str, frozenset[str]],
                         space: FeatureSpace | None = None,
                         tfidf_weight: float | None = None,
                         kw_weight: float | None = None,
                         ) -> tuple[FeatureSpace, list[SparseVec]]:
    """Assemble one label's vectors for a document batch.

    With ``space=None`` a fresh registry is fitted on the batch and frozen;
    otherwise the given (frozen) registry is used and unseen names drop out.
    """
    building = space is None
    if building:
        space = FeatureSpace()
    vectors = []
    for i, doc in enumerate(docs):
        pair = dlc_pairs[i] if dlc_pairs is not None else None
        vectors.append(
            assemble(label, doc, spans_by_doc.get(doc.id, []), tfidf_model, pair,
                     schema, space, gazetteers, tfidf_weight, kw_weight)
        )
    if building:
        space.freeze()
    return space, vectors


@dataclass
class TrainedLabel:
    space: FeatureSpace
    ensemble: LabelEnsemble


def fit_label(label: str, docs: Sequence[Document],
              spans_by_doc: Mapping[str, list[NerSpan]], y: Sequence[int],
              schema: LabelSchema, tfidf_model: TfidfModel,
              gazetteers: Mapping[str, frozenset[str]], hyper: Hyperparams,
              weights: tuple[float, float, float], seed: int) -> TrainedLabel:
    """Train the doc-level classifier plus the three base models for one label."""
    cfg = schema.config_for(label)
    doc_clf = None
    dlc_pairs = None
    if cfg.use_doc_clf:
        doc_clf, dlc_pairs = crossfit_doc_clf(
            docs, y, hyper.doc_clf, seed=derive_seed(seed, "docclf", label)
        )

    space, vectors = build_label_features(
        label, docs, spans_by_doc, tfidf_model, dlc_pairs, schema, gazetteers
    )
    width = len(space)
    logreg = train_logreg(vectors, y, width, l2=hyper.logreg.l2,
                          iters=hyper.logreg.iters, lr=hyper.logreg.lr)
    svm = train_linear_svm(vectors, y, width, l2=hyper.svm.l2,
                           epochs=hyper.svm.epochs,
                           seed=derive_seed(seed, "svm", label))
    gbdt = train_gbdt(vectors, y, width, rounds=hyper.gbdt.rounds,
                      max_depth=hyper.gbdt.max_depth,
                      shrinkage=hyper.gbdt.shrinkage,
                      min_leaf=hyper.gbdt.min_leaf)
    return TrainedLabel(
        space=space,
        ensemble=LabelEnsemble(logreg=logreg, svm=svm, gbdt=gbdt,
                               weights=weights, doc_clf=doc_clf),
    )


# ---------------------------------------------------------------------------
# trained pipeline


def max_workers() -> int:
    """Worker count from COHORTSEL_THREADS (unset -> 1, 0 -> all cores)."""
    raw = os.environ.get("COHORTSEL_THREADS", "").strip()
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise DataError(f"COHORTSEL_THREADS must be an integer, got {raw!r}") from None
    if value == 0:
        return os.cpu_count() or 1
    return max(1, value)


def _map_labels(fn: Callable[[str], TrainedLabel], labels: Sequence[str]):
    workers = max_workers()
    if workers <= 1 or len(labels) <= 1:
        return [fn(label) for label in labels]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, labels))


@dataclass
class TrainedPipeline:
    config_snapshot: dict
    seed: int
    schema: LabelSchema
    tfidf: TfidfModel
    gazetteers: dict[str, frozenset[str]]
    ner_lexicon: dict[str, str] = field(default_factory=dict)
    labels: dict[str, TrainedLabel] = field(default_factory=dict)

    def predict_doc(self, doc: Document, spans: Sequence[NerSpan]) -> dict[str, str]:
        """Decide every label for one document (labels are independent)."""
        decisions = {}
        for label in self.schema.labels:
            entry = self.labels[label]
            dlc_pair = None
            if entry.ensemble.doc_clf is not None:
                probs = doc_class_probs(entry.ensemble.doc_clf, doc)
                dlc_pair = (probs[0], probs[1])
            x = assemble(label, doc, spans, self.tfidf, dlc_pair, self.schema,
                         entry.space, self.gazetteers)
            decisions[label] = decide(ensemble_scores(entry.ensemble, x))
        return decisions

    def predict_corpus(self, docs: Sequence[Document],
                       spans_by_doc: Mapping[str, list[NerSpan]]
                       ) -> dict[str, dict[str, str]]:
        return {
            doc.id: self.predict_doc(doc, spans_by_doc.get(doc.id, []))
            for doc in docs
        }


def train_pipeline(cfg: PipelineConfig) -> TrainedPipeline:
    """Fit TF-IDF, the per-label doc classifiers, feature spaces, and the
    three base models per label, with the config's ensemble weights."""
    docs = load_corpus(cfg.corpus_path)
    if not docs:
        raise DataError(f"corpus {cfg.corpus_path} is empty")
    if cfg.gold_path is None:
        raise DataError("config.paths.gold is required for training")
    gold = load_gold(cfg.gold_path)
    validate_gold(gold, docs, cfg.schema.labels)

    ner_lexicon = load_ner_lexicon(cfg.ner_lexicons)
    spans_by_doc = resolve_spans(docs, cfg.annotations_path, ner_lexicon)
    gazetteers = load_gazetteers(cfg.schema, cfg.base_dir)
    tfidf_model = fit_tfidf(docs, min_df=cfg.hyper.tfidf.min_df)

    def fit_one(label: str) -> TrainedLabel:
        targets = [1 if gold[doc.id][label] == MET else 0 for doc in docs]
        return fit_label(label, docs, spans_by_doc, targets, cfg.schema, tfidf_model,
                         gazetteers, cfg.hyper, cfg.weights_for(label), cfg.seed)

    fitted = _map_labels(fit_one, cfg.schema.labels)
    return TrainedPipeline(
        config_snapshot=config_to_dict(cfg),
        seed=cfg.seed,
        schema=cfg.schema,
        tfidf=tfidf_model,
        gazetteers=gazetteers,
        ner_lexicon=ner_lexicon,
        labels=dict(zip(cfg.schema.labels, fitted)),
    )
