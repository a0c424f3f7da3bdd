import numpy as np
import pytest

from cohortsel.corpus import MET, NOT_MET
from cohortsel.ensemble import (
    LabelEnsemble,
    decide,
    ensemble_scores,
    ensemble_scores_from_probs,
    validate_weights,
)
from cohortsel.errors import DataError
from cohortsel.features import SparseVec
from cohortsel.learners import predict_proba, train_gbdt, train_linear_svm, train_logreg

from conftest import gbdt_fixture, linear_fixture


def test_scores_arithmetic_uniform_weights():
    scores = ensemble_scores_from_probs((1, 1, 1), (0.6, 0.7, 0.2))
    assert scores == (pytest.approx(1.5), pytest.approx(1.5))


def test_scores_arithmetic_weighted():
    scores = ensemble_scores_from_probs((2, 1, 1), (0.6, 0.7, 0.2))
    assert scores[0] == pytest.approx(2.1)
    assert scores[1] == pytest.approx(1.9)


def test_single_member_projection():
    scores = ensemble_scores_from_probs((1, 0, 0), (0.6, 0.7, 0.2))
    assert scores == (pytest.approx(0.6), pytest.approx(0.4))


def test_decide_rules():
    assert decide((2.1, 1.9)) == MET
    assert decide((1.5, 1.5)) == NOT_MET
    assert decide((0.0, 3.0)) == NOT_MET


def test_scores_sum_to_weight_total():
    rng = np.random.default_rng(4)
    for _ in range(200):
        weights = tuple(float(w) for w in rng.uniform(0, 3, size=3))
        probs = tuple(float(p) for p in rng.uniform(0, 1, size=3))
        score_met, score_not = ensemble_scores_from_probs(weights, probs)
        assert score_met + score_not == pytest.approx(sum(weights), abs=1e-12)


def test_positive_scale_invariance():
    rng = np.random.default_rng(8)
    for _ in range(300):
        weights = tuple(float(w) for w in rng.uniform(0.01, 2.5, size=3))
        probs = tuple(float(p) for p in rng.uniform(0, 1, size=3))
        base = decide(ensemble_scores_from_probs(weights, probs))
        for lam in (0.1, 3.0, 100.0):
            scaled = tuple(lam * w for w in weights)
            assert decide(ensemble_scores_from_probs(scaled, probs)) == base


def test_validate_weights():
    assert validate_weights([1, 0, 0.5]) == (1.0, 0.0, 0.5)
    with pytest.raises(DataError):
        validate_weights([0, 0, 0])
    with pytest.raises(DataError):
        validate_weights([1, -0.1, 0])
    with pytest.raises(DataError):
        validate_weights([1, 1])


def _trained_entry(weights):
    vectors, y = linear_fixture()
    gvectors, gy = gbdt_fixture(n=60)
    return (
        LabelEnsemble(
            logreg=train_logreg(vectors, y, n_features=2),
            svm=train_linear_svm(vectors, y, n_features=2, seed=2),
            gbdt=train_gbdt(gvectors, gy, n_features=5, rounds=5),
            weights=weights,
        ),
        vectors,
    )


def test_ensemble_scores_with_real_models_sum_rule():
    entry, vectors = _trained_entry((1.0, 0.5, 2.0))
    for vec in vectors[:10]:
        score_met, score_not = ensemble_scores(entry, vec)
        assert score_met + score_not == pytest.approx(3.5, abs=1e-12)


def test_all_weight_on_logreg_matches_standalone_decisions():
    entry, vectors = _trained_entry((1.0, 0.0, 0.0))
    for vec in vectors:
        expected = MET if predict_proba(entry.logreg, vec) > 0.5 else NOT_MET
        assert decide(ensemble_scores(entry, vec)) == expected


def test_identical_inputs_identical_decisions():
    entry, vectors = _trained_entry((1.0, 1.0, 1.0))
    for vec in vectors[:5]:
        first = decide(ensemble_scores(entry, vec))
        second = decide(ensemble_scores(entry, SparseVec(dict(vec.items()))))
        assert first == second
