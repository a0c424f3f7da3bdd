import math

import numpy as np
import pytest

from cohortsel.corpus import NerSpan, load_corpus
from cohortsel.errors import DataError
from cohortsel.features import (
    FeatureSpace,
    SparseVec,
    assemble,
    context_features,
    fit_tfidf,
    gazetteer_features,
    ner_keyword_features,
    tfidf_vector,
)
from cohortsel.schema import GazetteerRef, LabelConfig, LabelSchema, TriggerSet

from conftest import make_doc


def names_of(vec: SparseVec, space: FeatureSpace) -> dict[str, float]:
    return {space.name_of(fid): weight for fid, weight in vec.items()}


# ---------------------------------------------------------------------------
# SparseVec / FeatureSpace


def test_sparsevec_drops_zero_entries():
    vec = SparseVec()
    vec.add(3, 1.5)
    vec.add(3, -1.5)
    assert len(vec) == 0


def test_sparsevec_items_sorted_by_id():
    vec = SparseVec({9: 1.0, 2: 2.0, 5: 0.5})
    assert [fid for fid, _ in vec.items()] == [2, 5, 9]


def test_feature_space_bijection_and_freeze():
    space = FeatureSpace()
    a = space.intern("tfidf:x")
    b = space.intern("kw:x")
    assert space.intern("tfidf:x") == a
    space.freeze()
    assert space.intern("brand:new") is None
    assert space.name_of(a) == "tfidf:x"
    assert space.id_of("kw:x") == b
    assert len(space) == 2


# ---------------------------------------------------------------------------
# TF-IDF


def test_fit_tfidf_toy_counts():
    docs = [make_doc("a", "a b"), make_doc("b", "a c")]
    model = fit_tfidf(docs, min_df=1)
    assert model.df == {"a": 2, "b": 1, "c": 1}
    assert model.n_docs == 2
    assert list(model.vocabulary) == ["a", "b", "c"]


def test_fit_tfidf_min_df_filters():
    docs = [make_doc("a", "a b"), make_doc("b", "a c")]
    model = fit_tfidf(docs, min_df=2)
    assert list(model.vocabulary) == ["a"]


def test_fit_tfidf_empty_corpus_rejected():
    with pytest.raises(DataError):
        fit_tfidf([])


def test_fit_tfidf_fixture_hand_count(tfidf_fixture_path):
    docs = load_corpus(tfidf_fixture_path)
    model = fit_tfidf(docs, min_df=1)
    assert model.df == {"chloride": 1, "glucose": 3, "insulin": 1, "sodium": 2}
    assert model.n_docs == 3


def test_tfidf_vector_single_doc_hand_computation():
    docs = [make_doc("d", "a a b")]
    model = fit_tfidf(docs, min_df=1)
    vec = tfidf_vector(model, docs[0])
    # idf(a) = idf(b) = ln(2/2) + 1 = 1; raw (2, 1); norm sqrt(5)
    entries = dict(vec.items())
    assert entries[model.vocabulary["a"]] == pytest.approx(2 / math.sqrt(5), abs=1e-9)
    assert entries[model.vocabulary["b"]] == pytest.approx(1 / math.sqrt(5), abs=1e-9)


def test_tfidf_vector_fixture_hand_computation(tfidf_fixture_path):
    docs = load_corpus(tfidf_fixture_path)
    model = fit_tfidf(docs, min_df=1)
    idf = {
        "chloride": math.log(4 / 2) + 1,
        "glucose": math.log(4 / 4) + 1,
        "insulin": math.log(4 / 2) + 1,
        "sodium": math.log(4 / 3) + 1,
    }
    expected_raw = {
        "f1": {"glucose": 2 * idf["glucose"], "insulin": idf["insulin"]},
        "f2": {"glucose": idf["glucose"], "sodium": idf["sodium"]},
        "f3": {"sodium": 2 * idf["sodium"], "chloride": idf["chloride"],
               "glucose": idf["glucose"]},
    }
    for doc in docs:
        raw = expected_raw[doc.id]
        norm = math.sqrt(sum(w * w for w in raw.values()))
        vec = dict(tfidf_vector(model, doc).items())
        assert len(vec) == len(raw)
        for term, weight in raw.items():
            assert vec[model.vocabulary[term]] == pytest.approx(weight / norm, abs=1e-9)


def test_tfidf_vector_empty_and_oov():
    docs = [make_doc("d", "a a b")]
    model = fit_tfidf(docs, min_df=1)
    assert len(tfidf_vector(model, make_doc("e", ""))) == 0
    assert len(tfidf_vector(model, make_doc("o", "zz qq"))) == 0


def test_tfidf_norm_is_one_for_any_in_vocab_doc(tfidf_fixture_path):
    docs = load_corpus(tfidf_fixture_path)
    model = fit_tfidf(docs, min_df=1)
    for doc in docs:
        assert tfidf_vector(model, doc).l2_norm() == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# NER keyword features


def test_ner_keyword_features_example():
    doc = make_doc("d1", "chest pain after exercise")
    spans = [NerSpan("d1", 0, 10, "problem", "chest pain")]
    space = FeatureSpace()
    vec = ner_keyword_features(doc, spans, kw_weight=2.0, space=space)
    assert names_of(vec, space) == {"kw:chest": 2.0, "kw:pain": 2.0, "tag:problem": 1.0}


def test_ner_keyword_features_no_spans():
    doc = make_doc("d1", "chest pain")
    assert len(ner_keyword_features(doc, [], 2.0, FeatureSpace())) == 0


def test_ner_keyword_features_tag_counts_accumulate():
    doc = make_doc("d1", "troponin high and troponin stable")
    spans = [NerSpan("d1", 0, 8, "test", "troponin"),
             NerSpan("d1", 18, 26, "test", "troponin")]
    space = FeatureSpace()
    vec = ner_keyword_features(doc, spans, 1.0, space)
    assert names_of(vec, space)["tag:test"] == 2.0


def test_ner_keyword_features_span_outside_doc():
    doc = make_doc("d1", "short")
    with pytest.raises(DataError, match="outside"):
        ner_keyword_features(doc, [NerSpan("d1", 0, 99, "test", "x")], 1.0, FeatureSpace())


# ---------------------------------------------------------------------------
# gazetteer / context features


def test_gazetteer_features_example():
    doc = make_doc("d1", "takes ginseng daily")
    space = FeatureSpace()
    vec = gazetteer_features(doc, {"ginseng"}, window=2, weight=2.0, space=space, name="g")
    assert names_of(vec, space) == {"gaz:g:takes": 2.0, "gaz:g:daily": 2.0}


def test_gazetteer_match_at_document_start_clips_left():
    doc = make_doc("d1", "ginseng taken daily")
    space = FeatureSpace()
    vec = gazetteer_features(doc, {"ginseng"}, window=2, weight=1.0, space=space, name="g")
    assert names_of(vec, space) == {"gaz:g:taken": 1.0, "gaz:g:daily": 1.0}


def test_context_features_example():
    doc = make_doc("d1", "creatinine 2 1 mg dl")
    space = FeatureSpace()
    vec = context_features(doc, {"creatinine"}, window=3, weight=1.0,
                           space=space, owner="CREATININE")
    assert names_of(vec, space) == {
        "ctx:CREATININE:2": 1.0,
        "ctx:CREATININE:1": 1.0,
        "ctx:CREATININE:mg": 1.0,
    }


def test_context_features_absent_trigger():
    doc = make_doc("d1", "nothing of note")
    vec = context_features(doc, {"creatinine"}, 3, 1.0, FeatureSpace(), "CREATININE")
    assert len(vec) == 0


def _window_oracle(doc, phrases, window, weight):
    """Independent enumerator: longest-match scan, then walk each side."""
    surfaces = [t.surface for t in doc.tokens]
    max_len = max(len(p.split()) for p in phrases)
    matches = []
    pos = 0
    while pos < len(surfaces):
        hit = None
        for length in range(min(max_len, len(surfaces) - pos), 0, -1):
            if " ".join(surfaces[pos:pos + length]) in phrases:
                hit = length
                break
        if hit is None:
            pos += 1
        else:
            matches.append((pos, pos + hit))
            pos += hit
    feats: dict[str, float] = {}
    for start, stop in matches:
        for offset in range(1, window + 1):
            if start - offset >= 0:
                key = surfaces[start - offset]
                feats[key] = feats.get(key, 0.0) + weight
            if stop - 1 + offset < len(surfaces):
                key = surfaces[stop - 1 + offset]
                feats[key] = feats.get(key, 0.0) + weight
    return feats


def test_gazetteer_windows_match_brute_force_on_random_docs():
    rng = np.random.default_rng(17)
    vocab = ["aa", "bb", "cc", "dd", "ee", "ff"]
    phrases = {"aa", "bb cc"}
    for _ in range(60):
        words = [vocab[int(rng.integers(len(vocab)))]
                 for _ in range(int(rng.integers(3, 25)))]
        doc = make_doc("d", " ".join(words))
        window = int(rng.integers(1, 5))
        weight = float(rng.choice([0.5, 1.0, 2.0]))
        space = FeatureSpace()
        got = {
            name.removeprefix("gaz:g:"): value
            for name, value in names_of(
                gazetteer_features(doc, phrases, window, weight, space, "g"), space
            ).items()
        }
        assert got == _window_oracle(doc, phrases, window, weight)


def test_overlapping_windows_accumulate():
    doc = make_doc("d1", "x ginseng y ginseng z")
    space = FeatureSpace()
    vec = gazetteer_features(doc, {"ginseng"}, window=2, weight=2.0, space=space, name="g")
    named = names_of(vec, space)
    assert named["gaz:g:y"] == 4.0  # inside both windows
    oracle = _window_oracle(doc, {"ginseng"}, 2, 2.0)
    assert {k.removeprefix("gaz:g:"): v for k, v in named.items()} == oracle


def test_trigger_occurs_twice_contexts_accumulate():
    doc = make_doc("d1", "creatinine up creatinine down")
    space = FeatureSpace()
    vec = context_features(doc, {"creatinine"}, 2, 1.0, space, "C")
    named = names_of(vec, space)
    oracle = _window_oracle(doc, {"creatinine"}, 2, 1.0)
    assert {k.removeprefix("ctx:C:"): v for k, v in named.items()} == oracle


# ---------------------------------------------------------------------------
# assembly


def _toy_schema(**overrides):
    base = dict(
        label="AAA",
        tfidf_weight=1.0,
        kw_weight=1.0,
        gazetteers=(GazetteerRef("gaz/herbs.txt", window=2, weight=2.0),),
        triggers=(TriggerSet(("creatinine",), window=2, weight=1.0),),
        imports=(),
        use_doc_clf=True,
    )
    base.update(overrides)
    aaa = LabelConfig(**base)
    bbb = LabelConfig(label="BBB", triggers=(TriggerSet(("aspirin",), window=1, weight=3.0),))
    return LabelSchema(labels=("AAA", "BBB"), configs={"AAA": aaa, "BBB": bbb})


GAZ = {"herbs": frozenset({"ginseng"})}


def test_assemble_all_zero_weights_empty_vector():
    schema = _toy_schema(
        tfidf_weight=0.0, kw_weight=0.0,
        gazetteers=(GazetteerRef("gaz/herbs.txt", window=2, weight=0.0),),
        triggers=(TriggerSet(("creatinine",), window=2, weight=0.0),),
        use_doc_clf=False,
    )
    doc = make_doc("d", "creatinine ginseng daily")
    docs = [doc]
    model = fit_tfidf(docs)
    spans = [NerSpan("d", 0, 10, "test", "creatinine")]
    space = FeatureSpace()
    vec = assemble("AAA", doc, spans, model, None, schema, space, GAZ)
    assert len(vec) == 0


def test_assemble_imported_context_features():
    schema = _toy_schema(imports=("BBB",))
    doc = make_doc("d", "takes aspirin daily")
    model = fit_tfidf([doc])
    space = FeatureSpace()
    vec = assemble("AAA", doc, [], model, None, schema, space, GAZ,
                   tfidf_weight=0.0, kw_weight=0.0)
    named = names_of(vec, space)
    assert named["ctx:BBB:takes"] == 3.0
    assert named["ctx:BBB:daily"] == 3.0


def test_assemble_doc_clf_probs_become_features():
    schema = _toy_schema()
    doc = make_doc("d", "quiet visit")
    space = FeatureSpace()
    vec = assemble("AAA", doc, [], None, (0.7, 0.3), schema, space, GAZ,
                   tfidf_weight=0.0, kw_weight=0.0)
    named = names_of(vec, space)
    assert named["dlc:met"] == 0.7
    assert named["dlc:not_met"] == 0.3


def test_assemble_linear_in_tfidf_weight():
    schema = _toy_schema()
    doc = make_doc("d", "creatinine ginseng daily and more words")
    docs = [doc, make_doc("e", "daily words repeated")]
    model = fit_tfidf(docs)
    spans = [NerSpan("d", 0, 10, "test", "creatinine")]
    space = FeatureSpace()
    single = assemble("AAA", doc, spans, model, (0.5, 0.5), schema, space, GAZ,
                      tfidf_weight=1.0)
    double = assemble("AAA", doc, spans, model, (0.5, 0.5), schema, space, GAZ,
                      tfidf_weight=2.0)
    ones = names_of(single, space)
    twos = names_of(double, space)
    assert set(ones) == set(twos)
    for name, value in ones.items():
        if name.startswith("tfidf:"):
            assert twos[name] == pytest.approx(2.0 * value, rel=1e-12)
        else:
            assert twos[name] == value


def test_assemble_namespaces_disjoint():
    schema = _toy_schema()
    doc = make_doc("d", "creatinine ginseng daily visit")
    model = fit_tfidf([doc])
    spans = [NerSpan("d", 0, 10, "test", "creatinine")]
    space = FeatureSpace()
    assemble("AAA", doc, spans, model, (0.6, 0.4), schema, space, GAZ)
    families = {}
    for name in space.names():
        prefix = name.split(":", 1)[0]
        families.setdefault(prefix, set()).add(space.id_of(name))
    ids = [fid for group in families.values() for fid in group]
    assert len(ids) == len(set(ids))
    assert set(families) <= {"tfidf", "kw", "tag", "gaz", "ctx", "dlc"}


def test_default_schema_asp_for_mi_imports_creatinine_context():
    from cohortsel.schema import default_schema

    schema = default_schema()
    assert "CREATININE" in schema.config_for("ASP-FOR-MI").imports
    doc = make_doc("d", "creatinine level checked at visit")
    space = FeatureSpace()
    gazetteers = {"antiplatelet_drugs": frozenset()}
    vec = assemble("ASP-FOR-MI", doc, [], None, None, schema, space, gazetteers,
                   tfidf_weight=0.0, kw_weight=0.0)
    named = names_of(vec, space)
    imported = {name for name in named if name.startswith("ctx:CREATININE:")}
    # CREATININE's trigger config: window 4, weight 2.0
    assert imported == {"ctx:CREATININE:level", "ctx:CREATININE:checked",
                        "ctx:CREATININE:at", "ctx:CREATININE:visit"}
    assert named["ctx:CREATININE:level"] == 2.0


def test_ner_keyword_token_counted_once_under_overlapping_spans():
    doc = make_doc("d1", "chest pain radiating")
    spans = [NerSpan("d1", 0, 10, "problem", "chest pain"),
             NerSpan("d1", 6, 20, "problem", "pain radiating")]
    space = FeatureSpace()
    vec = ner_keyword_features(doc, spans, 1.0, space)
    named = names_of(vec, space)
    assert named["kw:pain"] == 1.0
    assert named["tag:problem"] == 2.0


def test_assemble_frozen_space_drops_unknown_names():
    schema = _toy_schema()
    doc_a = make_doc("a", "creatinine ginseng daily")
    doc_b = make_doc("b", "entirely novel words")
    model = fit_tfidf([doc_a, doc_b])
    space = FeatureSpace()
    assemble("AAA", doc_a, [], model, None, schema, space, GAZ)
    space.freeze()
    size_before = len(space)
    vec = assemble("AAA", doc_b, [], model, None, schema, space, GAZ)
    assert len(space) == size_before
    for fid, _ in vec.items():
        assert fid < size_before
