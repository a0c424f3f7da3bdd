import math

import numpy as np
import pytest

from cohortsel.errors import DataError
from cohortsel.features import SparseVec
from cohortsel.learners import (
    densify,
    gbdt_decision,
    linear_decision,
    logreg_loss_grad,
    platt_calibrate,
    predict_proba,
    sigmoid,
    train_gbdt,
    train_linear_svm,
    train_logreg,
    tree_from_dict,
    tree_to_dict,
)

from conftest import gbdt_fixture, linear_fixture, platt_fixture


# ---------------------------------------------------------------------------
# logistic regression


def test_logreg_zero_model_predicts_half():
    vectors, y = linear_fixture()
    model = train_logreg(vectors, y, n_features=2, iters=0)
    for vec in vectors:
        assert predict_proba(model, vec) == 0.5


def test_logreg_gradient_single_point():
    # at w=0 on {(x=[1], y=1)}: (sigma(0) - 1) * 1 = -0.5
    dense_x = np.array([[1.0]])
    y = np.array([1.0])
    _, grad_w, grad_b = logreg_loss_grad(np.zeros(1), 0.0, dense_x, y, l2=0.0)
    assert grad_w[0] == pytest.approx(-0.5)
    assert grad_b == pytest.approx(-0.5)


def test_logreg_separable_fixture_perfect_training_accuracy():
    vectors, y = linear_fixture()
    model = train_logreg(vectors, y, n_features=2)
    correct = sum(
        1 for vec, target in zip(vectors, y)
        if (predict_proba(model, vec) > 0.5) == (target == 1)
    )
    assert correct == len(y)


def test_logreg_gradient_matches_finite_differences():
    vectors, y = linear_fixture()
    dense_x = densify(vectors, 2)
    y_arr = np.asarray(y, dtype=np.float64)
    rng = np.random.default_rng(123)
    l2 = 1e-4
    step = 1e-5
    for _ in range(10):
        weights = rng.normal(0.0, 1.0, size=2)
        bias = float(rng.normal())
        _, grad_w, grad_b = logreg_loss_grad(weights, bias, dense_x, y_arr, l2)
        numeric = np.empty(3)
        for j in range(2):
            delta = np.zeros(2)
            delta[j] = step
            up, _, _ = logreg_loss_grad(weights + delta, bias, dense_x, y_arr, l2)
            down, _, _ = logreg_loss_grad(weights - delta, bias, dense_x, y_arr, l2)
            numeric[j] = (up - down) / (2 * step)
        up, _, _ = logreg_loss_grad(weights, bias + step, dense_x, y_arr, l2)
        down, _, _ = logreg_loss_grad(weights, bias - step, dense_x, y_arr, l2)
        numeric[2] = (up - down) / (2 * step)
        analytic = np.array([grad_w[0], grad_w[1], grad_b])
        rel = np.linalg.norm(numeric - analytic) / max(np.linalg.norm(numeric), 1e-12)
        assert rel < 1e-4


def test_logreg_single_class_rejected():
    vectors = [SparseVec({0: 1.0}), SparseVec({0: 2.0})]
    with pytest.raises(DataError, match="both classes"):
        train_logreg(vectors, [1, 1])


def test_logreg_probability_monotone_in_decision_value():
    vectors, y = linear_fixture()
    model = train_logreg(vectors, y, n_features=2)
    rng = np.random.default_rng(5)
    probes = [SparseVec({0: float(rng.normal()), 1: float(rng.normal())})
              for _ in range(50)]
    probes.sort(key=lambda v: linear_decision(model, v))
    probs = [predict_proba(model, v) for v in probes]
    assert all(a <= b for a, b in zip(probs, probs[1:]))


# ---------------------------------------------------------------------------
# linear SVM


def test_svm_zero_weights_zero_decision():
    from cohortsel.learners import LinearModel

    model = LinearModel(weights=np.zeros(3), bias=0.0, kind="svm", calibration=(-1.0, 0.0))
    assert linear_decision(model, SparseVec({1: 5.0})) == 0.0


def test_svm_separable_fixture_positive_margins():
    vectors, y = linear_fixture()
    model = train_linear_svm(vectors, y, n_features=2, seed=0)
    for vec, target in zip(vectors, y):
        sign = 1.0 if target == 1 else -1.0
        assert sign * linear_decision(model, vec) > 0


def test_svm_deterministic_given_seed():
    vectors, y = linear_fixture()
    first = train_linear_svm(vectors, y, n_features=2, seed=9)
    second = train_linear_svm(vectors, y, n_features=2, seed=9)
    assert np.array_equal(first.weights, second.weights)
    assert first.bias == second.bias
    assert first.calibration == second.calibration


def test_svm_probability_uses_calibration():
    vectors, y = linear_fixture()
    model = train_linear_svm(vectors, y, n_features=2, seed=0)
    a, b = model.calibration
    for vec in vectors[:5]:
        expected = sigmoid(a * linear_decision(model, vec) + b)
        assert predict_proba(model, vec) == pytest.approx(expected)


# ---------------------------------------------------------------------------
# Platt calibration


def test_platt_symmetric_scores_give_zero_intercept():
    scores = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0]
    labels = [0, 0, 0, 1, 1, 1]
    a, b = platt_calibrate(scores, labels)
    assert abs(b) < 1e-6


def test_platt_zero_score_zero_intercept_is_half():
    assert sigmoid(123.0 * 0.0 + 0.0) == 0.5


def test_platt_matches_gradient_descent_oracle():
    scores, labels = platt_fixture()
    a, b = platt_calibrate(scores, labels)

    s = np.asarray(scores)
    t = np.asarray(labels, dtype=np.float64)
    oa = ob = 0.0
    lr = 0.5
    for _ in range(200_000):
        p = 1.0 / (1.0 + np.exp(-(oa * s + ob)))
        ga = float(np.mean((p - t) * s))
        gb = float(np.mean(p - t))
        oa -= lr * ga
        ob -= lr * gb
        if math.hypot(ga, gb) < 1e-12:
            break
    assert a == pytest.approx(oa, abs=1e-4)
    assert b == pytest.approx(ob, abs=1e-4)


def test_platt_single_class_rejected():
    with pytest.raises(DataError, match="both classes"):
        platt_calibrate([0.1, 0.2], [1, 1])


# ---------------------------------------------------------------------------
# GBDT


def test_gbdt_balanced_base_rate_zero_initial_score():
    vectors, _ = gbdt_fixture(n=20)
    y = [0, 1] * 10
    model = train_gbdt(vectors[:20], y, n_features=5, rounds=1)
    assert model.initial_score == 0.0


def test_gbdt_constant_features_tree_free_base_rate():
    vectors = [SparseVec({0: 1.0}) for _ in range(10)]
    y = [1, 1, 1, 0, 0, 0, 0, 0, 0, 0]
    model = train_gbdt(vectors, y, n_features=1, rounds=25)
    assert model.trees == ()
    prob = predict_proba(model, SparseVec({0: 1.0}))
    assert prob == pytest.approx(0.3, abs=1e-12)


def test_gbdt_no_trees_balanced_predicts_half():
    vectors = [SparseVec({0: 1.0}) for _ in range(10)]
    y = [1, 0] * 5
    model = train_gbdt(vectors, y, n_features=1, rounds=5)
    assert predict_proba(model, SparseVec({0: 99.0})) == 0.5


def _log_loss(model, vectors, y):
    total = 0.0
    for vec, target in zip(vectors, y):
        p = predict_proba(model, vec)
        total += -math.log(p if target == 1 else 1.0 - p)
    return total / len(y)


def test_gbdt_fixture_halves_log_loss_in_50_rounds():
    vectors, y = gbdt_fixture()
    base_rate = sum(y) / len(y)
    initial = -(base_rate * math.log(base_rate)
                + (1 - base_rate) * math.log(1 - base_rate))
    model = train_gbdt(vectors, y, n_features=5, rounds=50)
    assert _log_loss(model, vectors, y) <= 0.5 * initial


def _leaf_counts(node, dense_x, idx):
    if node.is_leaf:
        return [len(idx)]
    left = dense_x[idx, node.feature] <= node.threshold
    return (_leaf_counts(node.left, dense_x, idx[left])
            + _leaf_counts(node.right, dense_x, idx[~left]))


def test_gbdt_leaves_respect_min_leaf_and_partition():
    vectors, y = gbdt_fixture()
    min_leaf = 5
    model = train_gbdt(vectors, y, n_features=5, rounds=20, min_leaf=min_leaf)
    dense_x = densify(vectors, 5)
    idx = np.arange(len(y))
    assert model.trees
    for tree in model.trees:
        counts = _leaf_counts(tree, dense_x, idx)
        assert all(count >= min_leaf for count in counts)
        assert sum(counts) == len(y)


def test_gbdt_depth_limit():
    vectors, y = gbdt_fixture()
    model = train_gbdt(vectors, y, n_features=5, rounds=10, max_depth=2)

    def depth(node):
        if node.is_leaf:
            return 0
        return 1 + max(depth(node.left), depth(node.right))

    assert all(depth(tree) <= 2 for tree in model.trees)


def test_gbdt_deterministic():
    vectors, y = gbdt_fixture()
    first = train_gbdt(vectors, y, n_features=5, rounds=15)
    second = train_gbdt(vectors, y, n_features=5, rounds=15)
    assert len(first.trees) == len(second.trees)
    for vec in vectors[:20]:
        assert gbdt_decision(first, vec) == gbdt_decision(second, vec)


def test_gbdt_tie_break_prefers_lowest_feature_id():
    # two identical informative columns: splits must always pick column 0
    rng = np.random.default_rng(2)
    values = rng.uniform(0, 1, size=30)
    y = (values > 0.5).astype(int).tolist()
    vectors = [SparseVec({0: float(v), 1: float(v)}) for v in values]
    model = train_gbdt(vectors, y, n_features=2, rounds=5)

    def features_used(node, acc):
        if not node.is_leaf:
            acc.add(node.feature)
            features_used(node.left, acc)
            features_used(node.right, acc)
        return acc

    used = set()
    for tree in model.trees:
        features_used(tree, used)
    assert used == {0}


def test_tree_dict_round_trip():
    vectors, y = gbdt_fixture()
    model = train_gbdt(vectors, y, n_features=5, rounds=3)
    for tree in model.trees:
        clone = tree_from_dict(tree_to_dict(tree))
        for vec in vectors[:10]:
            x = dict(vec.items())
            node_a, node_b = tree, clone
            while not node_a.is_leaf:
                go_left = x.get(node_a.feature, 0.0) <= node_a.threshold
                node_a = node_a.left if go_left else node_a.right
                node_b = node_b.left if go_left else node_b.right
            assert node_b.is_leaf
            assert node_a.value == node_b.value


# ---------------------------------------------------------------------------
# probability interface


def test_predict_proba_strictly_inside_unit_interval():
    vectors, y = linear_fixture()
    logreg = train_logreg(vectors, y, n_features=2)
    svm = train_linear_svm(vectors, y, n_features=2, seed=1)
    gvectors, gy = gbdt_fixture()
    gbdt = train_gbdt(gvectors, gy, n_features=5, rounds=10)
    extreme = SparseVec({0: 1e6, 1: -1e6})
    for model in (logreg, svm):
        for vec in (extreme, SparseVec()):
            assert 0.0 < predict_proba(model, vec) < 1.0
    assert 0.0 < predict_proba(gbdt, SparseVec()) < 1.0


def test_predict_proba_ignores_unknown_feature_ids():
    vectors, y = linear_fixture()
    model = train_logreg(vectors, y, n_features=2)
    base = SparseVec({0: 1.0})
    extended = SparseVec({0: 1.0, 999: 123.0})
    assert predict_proba(model, base) == predict_proba(model, extended)
