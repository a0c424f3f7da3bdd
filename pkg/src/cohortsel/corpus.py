"""Patient records, tokenization, entity spans, and the file formats around them.

File formats handled here:
  corpus       JSON-Lines, one ``{"id": ..., "text": ...}`` object per line
  annotations  TSV: doc_id, start, end, tag, surface (no header)
  gold labels  JSON: ``{doc_id: {LABEL: "met" | "not met"}}``
  phrase lists one lowercase phrase per line, ``#`` lines ignored

All offsets are UTF-8 byte offsets into the raw record text.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple

from .errors import DataError

MET = "met"
NOT_MET = "not met"
DECISIONS = (MET, NOT_MET)

NER_TAGS = ("problem", "treatment", "test")

_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)


class Token(NamedTuple):
    surface: str  # lowercased form
    start: int  # byte offset, inclusive
    end: int  # byte offset, exclusive


class NerSpan(NamedTuple):
    doc_id: str
    start: int
    end: int
    tag: str
    surface: str


@dataclass(frozen=True)
class Document:
    """One patient record: raw text plus its token stream."""

    id: str
    text: str
    tokens: tuple[Token, ...]

    @classmethod
    def from_text(cls, doc_id: str, text: str) -> "Document":
        return cls(id=doc_id, text=text, tokens=tuple(tokenize(text)))


def tokenize(text: str) -> list[Token]:
    """Split text into maximal alphanumeric runs, lowercased, with byte offsets.

    Punctuation and underscores are discarded. Offsets index the UTF-8
    encoding of ``text``, so ``text.encode()[start:end]`` recovers the
    original surface.
    """
    tokens: list[Token] = []
    if text.isascii():
        for m in _WORD_RE.finditer(text):
            tokens.append(Token(m.group().lower(), m.start(), m.end()))
        return tokens
    # general case: map character positions to byte positions first
    byte_at = [0] * (len(text) + 1)
    pos = 0
    for i, ch in enumerate(text):
        byte_at[i] = pos
        pos += len(ch.encode("utf-8"))
    byte_at[len(text)] = pos
    for m in _WORD_RE.finditer(text):
        tokens.append(Token(m.group().lower(), byte_at[m.start()], byte_at[m.end()]))
    return tokens


def doc_byte_length(doc: Document) -> int:
    return len(doc.text.encode("utf-8"))


# ---------------------------------------------------------------------------
# corpus JSON-Lines


def load_corpus(path: str | Path) -> list[Document]:
    """Read a JSON-Lines corpus; each line must be exactly {"id", "text"}."""
    path = Path(path)
    docs: list[Document] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            if not isinstance(obj, dict) or set(obj) != {"id", "text"}:
                raise DataError(
                    f"{path}:{lineno}: expected an object with exactly the keys 'id' and 'text'"
                )
            doc_id, text = obj["id"], obj["text"]
            if not isinstance(doc_id, str) or not isinstance(text, str):
                raise DataError(f"{path}:{lineno}: 'id' and 'text' must be strings")
            if doc_id in seen:
                raise DataError(f"{path}:{lineno}: duplicate document id {doc_id!r}")
            seen.add(doc_id)
            docs.append(Document.from_text(doc_id, text))
    return docs


def serialize_corpus(docs: Iterable[Document]) -> str:
    """Canonical JSON-Lines form: sorted keys, compact separators, LF endings."""
    lines = []
    for doc in docs:
        lines.append(
            json.dumps({"id": doc.id, "text": doc.text}, sort_keys=True,
                       ensure_ascii=False, separators=(",", ":"))
        )
    return "".join(line + "\n" for line in lines)


# ---------------------------------------------------------------------------
# NER annotations (standoff TSV)


def load_ner_annotations(path: str | Path, corpus: list[Document]) -> dict[str, list[NerSpan]]:
    """Read standoff entity spans and group them per document, sorted by start.

    Every document in ``corpus`` gets an entry (possibly empty). Rows naming
    unknown documents, unknown tags, or out-of-bounds offsets are errors.
    """
    path = Path(path)
    by_id = {doc.id: doc for doc in corpus}
    byte_len = {doc.id: doc_byte_length(doc) for doc in corpus}
    spans: dict[str, list[NerSpan]] = {doc.id: [] for doc in corpus}
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            cols = line.rstrip("\n").split("\t")
            if len(cols) != 5:
                raise DataError(f"{path}:{lineno}: expected 5 tab-separated columns, got {len(cols)}")
            doc_id, start_s, end_s, tag, surface = cols
            if doc_id not in by_id:
                raise DataError(f"{path}:{lineno}: unknown doc_id {doc_id!r}")
            try:
                start, end = int(start_s), int(end_s)
            except ValueError:
                raise DataError(f"{path}:{lineno}: offsets must be integers") from None
            if tag not in NER_TAGS:
                raise DataError(f"{path}:{lineno}: unknown tag {tag!r}")
            if start < 0 or start >= end or end > byte_len[doc_id]:
                raise DataError(
                    f"{path}:{lineno}: span [{start},{end}) out of bounds for doc {doc_id!r}"
                )
            spans[doc_id].append(NerSpan(doc_id, start, end, tag, surface))
    for doc_spans in spans.values():
        doc_spans.sort(key=lambda s: (s.start, s.end))
    return spans


def serialize_annotations(spans_by_doc: Mapping[str, list[NerSpan]],
                          doc_order: Iterable[str]) -> str:
    rows = []
    for doc_id in doc_order:
        for span in spans_by_doc.get(doc_id, []):
            rows.append(f"{span.doc_id}\t{span.start}\t{span.end}\t{span.tag}\t{span.surface}")
    return "".join(row + "\n" for row in rows)


# ---------------------------------------------------------------------------
# gold labels


def load_gold(path: str | Path) -> dict[str, dict[str, str]]:
    """Read a gold-label (or prediction) file: {doc_id: {LABEL: decision}}."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed JSON ({exc.msg})") from exc
    if not isinstance(raw, dict):
        raise DataError(f"{path}: top level must be an object keyed by doc id")
    gold: dict[str, dict[str, str]] = {}
    for doc_id, decisions in raw.items():
        if not isinstance(decisions, dict):
            raise DataError(f"{path}: entry for {doc_id!r} must be an object")
        for label, decision in decisions.items():
            if decision not in DECISIONS:
                raise DataError(
                    f"{path}: {doc_id!r}/{label!r}: decision must be 'met' or 'not met', "
                    f"got {decision!r}"
                )
        gold[doc_id] = dict(decisions)
    return gold


def validate_gold(gold: Mapping[str, Mapping[str, str]], docs: list[Document],
                  labels: Iterable[str]) -> None:
    """Check that every document has a decision for every schema label."""
    label_set = set(labels)
    for doc in docs:
        if doc.id not in gold:
            raise DataError(f"gold labels missing document {doc.id!r}")
        have = set(gold[doc.id])
        if have != label_set:
            missing = sorted(label_set - have)
            extra = sorted(have - label_set)
            detail = []
            if missing:
                detail.append(f"missing {missing}")
            if extra:
                detail.append(f"unexpected {extra}")
            raise DataError(f"gold labels for {doc.id!r}: {'; '.join(detail)}")


def serialize_gold(gold: Mapping[str, Mapping[str, str]]) -> str:
    return json.dumps(gold, sort_keys=True, ensure_ascii=False, indent=1) + "\n"


# ---------------------------------------------------------------------------
# phrase lists and dictionary tagging


def load_phrase_list(path: str | Path) -> list[str]:
    """Read a gazetteer/lexicon file: one lowercase phrase per line, '#' comments."""
    path = Path(path)
    phrases: list[str] = []
    seen: set[str] = set()
    for line in path.read_text(encoding="utf-8").splitlines():
        phrase = line.strip().lower()
        if not phrase or phrase.startswith("#"):
            continue
        if phrase not in seen:
            seen.add(phrase)
            phrases.append(phrase)
    return phrases


def match_phrase_spans(tokens: tuple[Token, ...] | list[Token],
                       phrases: Mapping[str, object] | frozenset[str] | set[str],
                       ) -> list[tuple[int, int, str]]:
    """Longest-match left-to-right phrase scan over token surfaces.

    Returns non-overlapping matches as (first_token_index, last_token_index + 1,
    matched_phrase) triples. Phrases are space-joined lowercase token runs.
    """
    if not phrases:
        return []
    max_len = max(phrase.count(" ") + 1 for phrase in phrases)
    surfaces = [t.surface for t in tokens]
    matches: list[tuple[int, int, str]] = []
    i = 0
    n = len(surfaces)
    while i < n:
        hit = None
        for length in range(min(max_len, n - i), 0, -1):
            candidate = " ".join(surfaces[i:i + length])
            if candidate in phrases:
                hit = (i, i + length, candidate)
                break
        if hit is None:
            i += 1
        else:
            matches.append(hit)
            i = hit[1]
    return matches


def dictionary_ner(doc: Document, lexicon: Mapping[str, str]) -> list[NerSpan]:
    """Tag a document with a phrase dictionary (fallback for an external NER tool).

    ``lexicon`` maps lowercase phrases to one of the three entity tags. Matching
    is longest-match left-to-right, so overlapping entries resolve to the longer
    phrase and emitted spans never overlap.
    """
    spans = []
    for i, j, phrase in match_phrase_spans(doc.tokens, lexicon):
        spans.append(
            NerSpan(doc.id, doc.tokens[i].start, doc.tokens[j - 1].end,
                    lexicon[phrase], phrase)
        )
    return spans
