"""Deterministic synthetic corpus generator.

Produces a desk-scale stand-in for a restricted clinical dataset: per label,
positive documents carry planted cue phrases (drawn from that label's
gazetteer/trigger inventory) with probability 0.9 and negatives with
probability 0.1. A cued positive plants 3-5 occurrences while a cued negative
plants exactly one, so presence alone does not separate the classes but
counts do: the labels are learnable without being trivial.

The generator is a pure function of (seed, n_docs, schema); the matching
annotation file tags every planted cue with a per-label entity tag.
"""

from __future__ import annotations

import random

from .corpus import NER_TAGS, MET, NOT_MET, Document, NerSpan
from .errors import DataError
from .schema import LabelSchema

# neutral filler vocabulary; disjoint from every shipped cue inventory
FILLER_WORDS = (
    "patient", "visit", "settled", "followup", "review", "blood", "temperature",
    "normal", "heart", "rate", "daily", "morning", "clinic", "note", "exam",
    "mild", "chronic", "summary", "denies", "reports", "plan", "continue",
    "monitor", "weekly", "status", "general", "active", "alert", "oriented",
    "breathing", "steady", "sleep", "improved", "unchanged", "routine",
    "discussed", "scheduled", "tolerating", "well", "today",
)

MIN_DOCS = 10
_POS_CUE_PROB = 0.9
_NEG_CUE_PROB = 0.1


def label_tag(label_index: int) -> str:
    """Entity tag assigned to a label's planted cues (cycles problem/treatment/test)."""
    return NER_TAGS[label_index % len(NER_TAGS)]


def _draw_decisions(rng: random.Random, n_docs: int, labels: tuple[str, ...]
                    ) -> dict[str, list[bool]]:
    """Bernoulli(0.5) per (doc, label), then force >= 2 examples of each class."""
    met = {label: [rng.random() < 0.5 for _ in range(n_docs)] for label in labels}
    for label in labels:
        column = met[label]
        positives = sum(column)
        idx = 0
        while positives < 2:
            if not column[idx]:
                column[idx] = True
                positives += 1
            idx += 1
        idx = 0
        while n_docs - positives < 2:
            if column[idx]:
                column[idx] = False
                positives -= 1
            idx += 1
    return met


def generate_synthetic(seed: int, n_docs: int, schema: LabelSchema
                       ) -> tuple[list[Document], dict[str, list[NerSpan]],
                                  dict[str, dict[str, str]]]:
    """Generate (corpus, annotations, gold) deterministically from the seed."""
    if n_docs < MIN_DOCS:
        raise DataError(f"n_docs must be >= {MIN_DOCS}, got {n_docs}")
    for label in schema.labels:
        if not schema.config_for(label).cues:
            raise DataError(f"label {label!r} has no cue inventory for synthesis")

    rng = random.Random(seed)
    met = _draw_decisions(rng, n_docs, schema.labels)

    docs: list[Document] = []
    spans_by_doc: dict[str, list[NerSpan]] = {}
    gold: dict[str, dict[str, str]] = {}

    for d in range(n_docs):
        doc_id = f"doc{d:04d}"
        units: list[tuple[str, str]] = []  # (phrase, tag) with tag "" for filler
        n_filler = rng.randint(25, 45)
        for _ in range(n_filler):
            units.append((rng.choice(FILLER_WORDS), ""))
        for label_index, label in enumerate(schema.labels):
            cfg = schema.config_for(label)
            if met[label][d]:
                cued = rng.random() < _POS_CUE_PROB
                count = rng.randint(3, 5) if cued else 0
            else:
                cued = rng.random() < _NEG_CUE_PROB
                count = 1 if cued else 0
            for _ in range(count):
                units.append((rng.choice(cfg.cues), label_tag(label_index)))
        rng.shuffle(units)

        parts: list[str] = []
        pos = 0
        sentence_left = rng.randint(6, 12)
        spans: list[tuple[int, int, str, str]] = []
        for j, (phrase, tag) in enumerate(units):
            if j > 0:
                if sentence_left == 0:
                    sep = ". "
                    sentence_left = rng.randint(6, 12)
                else:
                    sep = " "
                parts.append(sep)
                pos += len(sep)
            sentence_left -= 1
            start = pos
            parts.append(phrase)
            pos += len(phrase)
            if tag:
                spans.append((start, pos, tag, phrase))
        parts.append(".")
        text = "".join(parts)

        doc = Document.from_text(doc_id, text)
        docs.append(doc)
        spans.sort(key=lambda s: (s[0], s[1]))
        spans_by_doc[doc_id] = [NerSpan(doc_id, s, e, t, p) for s, e, t, p in spans]
        gold[doc_id] = {
            label: MET if met[label][d] else NOT_MET for label in schema.labels
        }

    return docs, spans_by_doc, gold
