"""Model persistence: one self-describing JSON file with a content checksum.

The document-level classifiers dominate the raw parameter count, so their
embedding tables are stored as (seed, updated rows) deltas: untouched rows
are regenerated exactly from the seeded initializer on load. Everything else
is stored verbatim. All serialization is canonical (sorted keys, compact
separators), so identical models produce byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .doclevel import DocClfModel, init_embeddings
from .ensemble import LabelEnsemble
from .errors import DataError
from .features import FeatureSpace, TfidfModel
from .learners import GbdtModel, LinearModel, tree_from_dict, tree_to_dict
from .pipeline import TrainedLabel, TrainedPipeline, _parse_label_config
from .schema import LabelSchema

FORMAT_VERSION = 1


def canonical_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False, allow_nan=False)


def atomic_write_text(path: str | Path, text: str) -> None:
    """Whole-file atomic write: temp file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def _linear_to_dict(model: LinearModel) -> dict:
    out = {"weights": model.weights.tolist(), "bias": model.bias, "kind": model.kind}
    if model.calibration is not None:
        out["calibration"] = list(model.calibration)
    return out


def _linear_from_dict(obj: dict) -> LinearModel:
    calibration = obj.get("calibration")
    return LinearModel(
        weights=np.asarray(obj["weights"], dtype=np.float64),
        bias=float(obj["bias"]),
        kind=obj["kind"],
        calibration=tuple(calibration) if calibration is not None else None,
    )


def _gbdt_to_dict(model: GbdtModel) -> dict:
    return {
        "initial_score": model.initial_score,
        "shrinkage": model.shrinkage,
        "max_depth": model.max_depth,
        "trees": [tree_to_dict(tree) for tree in model.trees],
    }


def _gbdt_from_dict(obj: dict) -> GbdtModel:
    return GbdtModel(
        initial_score=float(obj["initial_score"]),
        trees=tuple(tree_from_dict(t) for t in obj["trees"]),
        shrinkage=float(obj["shrinkage"]),
        max_depth=int(obj["max_depth"]),
    )


def _doc_clf_to_dict(model: DocClfModel) -> dict:
    return {
        "seed": model.seed,
        "dim": model.dim,
        "bucket_count": model.bucket_count,
        "n_classes": model.n_classes,
        "output": model.output.tolist(),
        "rows": [[int(row), model.embeddings[row].tolist()]
                 for row in model.updated_rows],
    }


def _doc_clf_from_dict(obj: dict) -> DocClfModel:
    seed = int(obj["seed"])
    dim = int(obj["dim"])
    bucket_count = int(obj["bucket_count"])
    embeddings = init_embeddings(seed, bucket_count, dim)
    rows = []
    for row, values in obj["rows"]:
        embeddings[int(row)] = np.asarray(values, dtype=np.float64)
        rows.append(int(row))
    return DocClfModel(
        embeddings=embeddings,
        output=np.asarray(obj["output"], dtype=np.float64),
        bucket_count=bucket_count,
        dim=dim,
        n_classes=int(obj["n_classes"]),
        seed=seed,
        updated_rows=tuple(rows),
    )


def _payload(trained: TrainedPipeline) -> dict:
    labels = {}
    for label, entry in trained.labels.items():
        ens = entry.ensemble
        labels[label] = {
            "space": list(entry.space.names()),
            "weights": list(ens.weights),
            "logreg": _linear_to_dict(ens.logreg),
            "svm": _linear_to_dict(ens.svm),
            "gbdt": _gbdt_to_dict(ens.gbdt),
            "doc_clf": _doc_clf_to_dict(ens.doc_clf) if ens.doc_clf else None,
        }
    return {
        "format_version": FORMAT_VERSION,
        "seed": trained.seed,
        "config": trained.config_snapshot,
        "tfidf": {"n_docs": trained.tfidf.n_docs, "df": trained.tfidf.df},
        "gazetteers": {name: sorted(phrases)
                       for name, phrases in trained.gazetteers.items()},
        "ner_lexicon": dict(sorted(trained.ner_lexicon.items())),
        "labels": labels,
    }


def save_model(trained: TrainedPipeline, path: str | Path) -> None:
    payload = _payload(trained)
    digest = hashlib.sha256(canonical_dumps(payload).encode("utf-8")).hexdigest()
    payload["checksum"] = f"sha256:{digest}"
    atomic_write_text(path, canonical_dumps(payload) + "\n")


def load_model(path: str | Path) -> TrainedPipeline:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataError(f"model file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed model file ({exc.msg})") from exc
    if not isinstance(payload, dict) or "checksum" not in payload:
        raise DataError(f"{path}: not a model file (missing checksum)")
    stored = payload.pop("checksum")
    digest = hashlib.sha256(canonical_dumps(payload).encode("utf-8")).hexdigest()
    if stored != f"sha256:{digest}":
        raise DataError(f"{path}: checksum mismatch; the file is corrupted")
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise DataError(
            f"{path}: unsupported format_version {version!r} (reader supports {FORMAT_VERSION})"
        )

    snapshot = payload["config"]
    schema = _schema_from_snapshot(snapshot)
    df = {term: int(count) for term, count in payload["tfidf"]["df"].items()}
    tfidf = TfidfModel(
        vocabulary={term: i for i, term in enumerate(sorted(df))},
        df=df,
        n_docs=int(payload["tfidf"]["n_docs"]),
    )
    labels = {}
    for label, obj in payload["labels"].items():
        doc_clf = _doc_clf_from_dict(obj["doc_clf"]) if obj["doc_clf"] else None
        labels[label] = TrainedLabel(
            space=FeatureSpace.from_names(obj["space"]),
            ensemble=LabelEnsemble(
                logreg=_linear_from_dict(obj["logreg"]),
                svm=_linear_from_dict(obj["svm"]),
                gbdt=_gbdt_from_dict(obj["gbdt"]),
                weights=tuple(obj["weights"]),
                doc_clf=doc_clf,
            ),
        )
    missing = set(schema.labels) - set(labels)
    if missing:
        raise DataError(f"{path}: model is missing labels {sorted(missing)}")
    return TrainedPipeline(
        config_snapshot=snapshot,
        seed=int(payload["seed"]),
        schema=schema,
        tfidf=tfidf,
        gazetteers={name: frozenset(entries)
                    for name, entries in payload["gazetteers"].items()},
        ner_lexicon=dict(payload.get("ner_lexicon", {})),
        labels=labels,
    )


def _schema_from_snapshot(snapshot: dict) -> LabelSchema:
    label_order = snapshot["label_order"]
    configs = {
        label: _parse_label_config(label, snapshot["labels"].get(label, {}))
        for label in label_order
    }
    return LabelSchema(labels=tuple(label_order), configs=configs)
