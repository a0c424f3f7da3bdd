"""Per-label sparse feature extraction.

Four feature families feed each label's classifiers, kept collision-free by
name prefixes inside one per-label registry:

  tfidf:<term>            corpus-wide TF-IDF of document terms
  kw:<surface>            tokens covered by predicted entity spans
  tag:<tag>               entity tag counts (problem / treatment / test)
  gaz:<gazetteer>:<term>  tokens around gazetteer matches
  ctx:<label>:<term>      tokens around a label's trigger words
  dlc:met, dlc:not_met    document-level classifier probabilities

The TF-IDF weighting is raw term frequency times a smoothed inverse document
frequency, ln((1 + N) / (1 + df)) + 1, L2-normalized per document.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .corpus import Document, NerSpan, doc_byte_length, match_phrase_spans
from .errors import DataError
from .schema import LabelSchema


class SparseVec:
    """Sparse feature vector: integer feature id -> weight, no stored zeros."""

    __slots__ = ("_entries",)

    def __init__(self, entries: Mapping[int, float] | None = None):
        self._entries: dict[int, float] = {}
        if entries:
            for fid, weight in entries.items():
                self.add(fid, weight)

    def add(self, fid: int, weight: float) -> None:
        """Accumulate into one coordinate; entries that cancel to zero vanish."""
        if weight == 0.0:
            return
        total = self._entries.get(fid, 0.0) + weight
        if total == 0.0:
            del self._entries[fid]
        else:
            self._entries[fid] = total

    def get(self, fid: int) -> float:
        return self._entries.get(fid, 0.0)

    def items(self) -> list[tuple[int, float]]:
        """Entries in ascending feature-id order."""
        return sorted(self._entries.items())

    def update_scaled(self, other: "SparseVec", factor: float = 1.0) -> None:
        for fid, weight in other._entries.items():
            self.add(fid, factor * weight)

    def l2_norm(self) -> float:
        return math.sqrt(sum(w * w for w in self._entries.values()))

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SparseVec) and self._entries == other._entries

    def __repr__(self) -> str:
        return f"SparseVec({dict(self.items())!r})"


class FeatureSpace:
    """Bijective name <-> id registry, frozen after fitting.

    While building, unseen names are assigned the next id. Once frozen,
    unknown names resolve to None and callers drop them.
    """

    __slots__ = ("_ids", "_names", "_frozen")

    def __init__(self) -> None:
        self._ids: dict[str, int] = {}
        self._names: list[str] = []
        self._frozen = False

    @classmethod
    def from_names(cls, names: Iterable[str], frozen: bool = True) -> "FeatureSpace":
        space = cls()
        for name in names:
            space.intern(name)
        if frozen:
            space.freeze()
        return space

    def intern(self, name: str) -> int | None:
        fid = self._ids.get(name)
        if fid is not None:
            return fid
        if self._frozen:
            return None
        fid = len(self._names)
        self._ids[name] = fid
        self._names.append(name)
        return fid

    def freeze(self) -> None:
        self._frozen = True

    @property
    def frozen(self) -> bool:
        return self._frozen

    def id_of(self, name: str) -> int:
        return self._ids[name]

    def name_of(self, fid: int) -> str:
        return self._names[fid]

    def names(self) -> tuple[str, ...]:
        return tuple(self._names)

    def __contains__(self, name: str) -> bool:
        return name in self._ids

    def __len__(self) -> int:
        return len(self._names)

    def family_ids(self, prefix: str) -> list[int]:
        return [fid for name, fid in self._ids.items() if name.startswith(prefix)]


# ---------------------------------------------------------------------------
# TF-IDF


@dataclass(frozen=True)
class TfidfModel:
    vocabulary: dict[str, int]  # term -> column, sorted terms numbered in order
    df: dict[str, int]  # document frequency per vocabulary term
    n_docs: int

    def terms(self) -> list[str]:
        return sorted(self.vocabulary, key=self.vocabulary.__getitem__)


def fit_tfidf(train_docs: Sequence[Document], min_df: int = 1) -> TfidfModel:
    """Count document frequencies and keep terms with df >= min_df."""
    if not train_docs:
        raise DataError("cannot fit TF-IDF on an empty corpus")
    df: Counter[str] = Counter()
    for doc in train_docs:
        df.update({token.surface for token in doc.tokens})
    kept = sorted(term for term, count in df.items() if count >= min_df)
    return TfidfModel(
        vocabulary={term: i for i, term in enumerate(kept)},
        df={term: df[term] for term in kept},
        n_docs=len(train_docs),
    )


def tfidf_vector(model: TfidfModel, doc: Document) -> SparseVec:
    """L2-normalized tf * (ln((1+N)/(1+df)) + 1) over in-vocabulary terms."""
    counts: Counter[str] = Counter()
    for token in doc.tokens:
        if token.surface in model.vocabulary:
            counts[token.surface] += 1
    if not counts:
        return SparseVec()
    raw = {
        model.vocabulary[term]: tf * (math.log((1 + model.n_docs) / (1 + model.df[term])) + 1)
        for term, tf in counts.items()
    }
    norm = math.sqrt(sum(w * w for w in raw.values()))
    vec = SparseVec()
    for fid, weight in raw.items():
        vec.add(fid, weight / norm)
    return vec


# ---------------------------------------------------------------------------
# NER keyword / gazetteer / context families


def _add_named(vec: SparseVec, space: FeatureSpace, name: str, weight: float) -> None:
    fid = space.intern(name)
    if fid is not None:
        vec.add(fid, weight)


def ner_keyword_features(doc: Document, spans: Sequence[NerSpan], kw_weight: float,
                         space: FeatureSpace) -> SparseVec:
    """Keyword and tag-count features from predicted entity spans.

    Each token covered by at least one span contributes ``kw:<surface>`` once
    at kw_weight; each span contributes a ``tag:<tag>`` count of 1.
    """
    vec = SparseVec()
    if not spans:
        return vec
    limit = doc_byte_length(doc)
    for span in spans:
        if span.start < 0 or span.start >= span.end or span.end > limit:
            raise DataError(
                f"span [{span.start},{span.end}) outside document {doc.id!r}"
            )
    for token in doc.tokens:
        if any(span.start <= token.start and token.end <= span.end for span in spans):
            _add_named(vec, space, f"kw:{token.surface}", kw_weight)
    for span in spans:
        _add_named(vec, space, f"tag:{span.tag}", 1.0)
    return vec


def _window_features(doc: Document, phrases, window: int, weight: float,
                     space: FeatureSpace, prefix: str) -> SparseVec:
    vec = SparseVec()
    if weight == 0.0 or not phrases:
        return vec
    n = len(doc.tokens)
    for i, j, _phrase in match_phrase_spans(doc.tokens, phrases):
        for k in range(max(0, i - window), i):
            _add_named(vec, space, prefix + doc.tokens[k].surface, weight)
        for k in range(j, min(n, j + window)):
            _add_named(vec, space, prefix + doc.tokens[k].surface, weight)
    return vec


def gazetteer_features(doc: Document, phrases: frozenset[str] | set[str], window: int,
                       weight: float, space: FeatureSpace, name: str) -> SparseVec:
    """Context tokens around gazetteer matches, clipped at document edges.

    Matching is longest-match left-to-right; the matched tokens themselves are
    excluded, and overlapping windows from nearby matches accumulate.
    """
    return _window_features(doc, phrases, window, weight, space, f"gaz:{name}:")


def context_features(doc: Document, triggers: Iterable[str], window: int, weight: float,
                     space: FeatureSpace, owner: str) -> SparseVec:
    """Like gazetteer_features but keyed by the trigger set's owning label."""
    return _window_features(doc, set(triggers), window, weight, space, f"ctx:{owner}:")


# ---------------------------------------------------------------------------
# per-label assembly


def assemble(label: str, doc: Document, spans: Sequence[NerSpan],
             tfidf_model: TfidfModel | None,
             doc_clf_probs: tuple[float, float] | None,
             schema: LabelSchema, space: FeatureSpace,
             gazetteers: Mapping[str, frozenset[str]],
             tfidf_weight: float | None = None,
             kw_weight: float | None = None) -> SparseVec:
    """Sum the label's configured feature families into one vector.

    A family weight of zero disables that family entirely (for the NER keyword
    family this also suppresses the tag counts). ``tfidf_weight``/``kw_weight``
    override the config values when given, which the tuner uses to rescale
    families without re-reading configs.
    """
    cfg = schema.config_for(label)
    t_w = cfg.tfidf_weight if tfidf_weight is None else tfidf_weight
    k_w = cfg.kw_weight if kw_weight is None else kw_weight

    vec = SparseVec()
    if t_w != 0.0 and tfidf_model is not None:
        terms = tfidf_model.terms()
        for col, value in tfidf_vector(tfidf_model, doc).items():
            _add_named(vec, space, f"tfidf:{terms[col]}", t_w * value)
    if k_w != 0.0:
        vec.update_scaled(ner_keyword_features(doc, spans, k_w, space))
    for gaz in cfg.gazetteers:
        phrases = gazetteers[gaz.name]
        vec.update_scaled(
            gazetteer_features(doc, phrases, gaz.window, gaz.weight, space, gaz.name)
        )
    for owner in (label,) + cfg.imports:
        owner_cfg = schema.config_for(owner)
        for trig in owner_cfg.triggers:
            vec.update_scaled(
                context_features(doc, trig.words, trig.window, trig.weight, space, owner)
            )
    if cfg.use_doc_clf and doc_clf_probs is not None:
        _add_named(vec, space, "dlc:met", doc_clf_probs[0])
        _add_named(vec, space, "dlc:not_met", doc_clf_probs[1])
    return vec
