import pytest

from cohortsel.corpus import MET, serialize_annotations, serialize_corpus, serialize_gold
from cohortsel.errors import DataError
from cohortsel.schema import default_schema
from cohortsel.synth import FILLER_WORDS, generate_synthetic


def _render_all(seed, n_docs, schema):
    docs, spans, gold = generate_synthetic(seed, n_docs, schema)
    return (
        serialize_corpus(docs),
        serialize_annotations(spans, [d.id for d in docs]),
        serialize_gold(gold),
    )


def test_deterministic_byte_identical():
    schema = default_schema()
    assert _render_all(42, 50, schema) == _render_all(42, 50, schema)


def test_different_seeds_differ():
    schema = default_schema()
    assert _render_all(42, 50, schema) != _render_all(43, 50, schema)


def test_gold_covers_all_labels_for_all_docs():
    schema = default_schema()
    docs, _, gold = generate_synthetic(42, 40, schema)
    assert len(gold) == 40
    for doc in docs:
        assert sorted(gold[doc.id]) == sorted(schema.labels)


def test_positive_rate_within_bounds_seed_42():
    schema = default_schema()
    docs, _, gold = generate_synthetic(42, 500, schema)
    for label in schema.labels:
        rate = sum(1 for doc in docs if gold[doc.id][label] == MET) / len(docs)
        assert 0.3 <= rate <= 0.7, f"{label}: {rate}"


def test_both_classes_present_per_label():
    schema = default_schema()
    docs, _, gold = generate_synthetic(9, 12, schema)
    for label in schema.labels:
        decisions = {gold[doc.id][label] for doc in docs}
        assert len(decisions) == 2


def test_too_few_docs_rejected():
    with pytest.raises(DataError, match=">= 10"):
        generate_synthetic(42, 9, default_schema())


def test_annotations_align_with_text():
    schema = default_schema()
    docs, spans, _ = generate_synthetic(7, 30, schema)
    for doc in docs:
        encoded = doc.text.encode("utf-8")
        for span in spans[doc.id]:
            assert encoded[span.start:span.end].decode("utf-8") == span.surface


def test_filler_vocabulary_disjoint_from_cues():
    schema = default_schema()
    cue_words = set()
    for label in schema.labels:
        for phrase in schema.config_for(label).cues:
            cue_words.update(phrase.split())
    assert not cue_words.intersection(FILLER_WORDS)
