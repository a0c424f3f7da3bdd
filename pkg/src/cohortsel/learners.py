"""The three base classifiers: logistic regression, linear SVM, and GBDT.

All three consume the per-label sparse vectors (materialized densely per
label space), emit a probability of "met", and are deterministic functions of
(data, params, seed):

  logreg  full-batch gradient descent on L2-regularized mean log loss
  svm     Pegasos SGD on hinge loss, probabilities via Platt scaling fit on
          out-of-fold decision values from an internal 3-fold split
  gbdt    stagewise regression trees on logistic-loss gradients, exact greedy
          splits with midpoint thresholds and Newton leaf values
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError
from .features import SparseVec

_GAIN_EPS = 1e-12
_LEAF_CLIP = 4.0


# |z| <= 36 keeps exp(-|z|) above float64 epsilon, so sigmoid stays strictly
# inside (0, 1) and p * (1 - p) never underflows to an exact zero
_Z_CLAMP = 36.0


def sigmoid(z: float) -> float:
    z = min(max(z, -_Z_CLAMP), _Z_CLAMP)
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def _sigmoid_arr(z: np.ndarray) -> np.ndarray:
    z = np.clip(z, -_Z_CLAMP, _Z_CLAMP)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def densify(X: Sequence[SparseVec], n_features: int) -> np.ndarray:
    mat = np.zeros((len(X), n_features))
    for row, vec in enumerate(X):
        for fid, weight in vec.items():
            if fid < n_features:
                mat[row, fid] = weight
    return mat


def _infer_width(X: Sequence[SparseVec]) -> int:
    width = 0
    for vec in X:
        for fid, _ in vec.items():
            width = max(width, fid + 1)
    return width


def _check_xy(X: Sequence[SparseVec], y: Sequence[int]) -> np.ndarray:
    if len(X) != len(y):
        raise DataError("X and y must have equal length")
    if len(X) < 2:
        raise DataError("need at least 2 training examples")
    arr = np.asarray(y, dtype=np.float64)
    if not (np.any(arr == 1) and np.any(arr == 0)):
        raise DataError("training labels must contain both classes")
    return arr


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float
    kind: str  # "logreg" or "svm"
    calibration: tuple[float, float] | None = None  # sigmoid (A, B), svm only


def sparse_dot(weights: np.ndarray, x: SparseVec) -> float:
    width = len(weights)
    return float(sum(weights[fid] * value for fid, value in x.items() if fid < width))


def linear_decision(model: LinearModel, x: SparseVec) -> float:
    return sparse_dot(model.weights, x) + model.bias


# ---------------------------------------------------------------------------
# logistic regression


def logreg_loss_grad(weights: np.ndarray, bias: float, dense_x: np.ndarray,
                     y: np.ndarray, l2: float) -> tuple[float, np.ndarray, float]:
    """Mean log loss + (l2/2)||w||^2 and its exact gradient (bias unpenalized)."""
    z = dense_x @ weights + bias
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z)) + 0.5 * l2 * float(weights @ weights)
    residual = _sigmoid_arr(z) - y
    grad_w = dense_x.T @ residual / len(y) + l2 * weights
    grad_b = float(residual.mean())
    return loss, grad_w, grad_b


def train_logreg_dense(dense_x: np.ndarray, y_arr: np.ndarray, l2: float = 1e-4,
                       iters: int = 200, lr: float = 0.5) -> LinearModel:
    weights = np.zeros(dense_x.shape[1])
    bias = 0.0
    for _ in range(iters):
        _, grad_w, grad_b = logreg_loss_grad(weights, bias, dense_x, y_arr, l2)
        weights = weights - lr * grad_w
        bias -= lr * grad_b
    return LinearModel(weights=weights, bias=bias, kind="logreg")


def train_logreg(X: Sequence[SparseVec], y: Sequence[int], n_features: int | None = None,
                 l2: float = 1e-4, iters: int = 200, lr: float = 0.5) -> LinearModel:
    y_arr = _check_xy(X, y)
    width = _infer_width(X) if n_features is None else n_features
    return train_logreg_dense(densify(X, width), y_arr, l2=l2, iters=iters, lr=lr)


# ---------------------------------------------------------------------------
# linear SVM (Pegasos) with Platt-scaled probabilities


def _pegasos(dense_x: np.ndarray, y_pm: np.ndarray, l2: float, epochs: int,
             rng: np.random.Generator) -> tuple[np.ndarray, float]:
    """Hinge-loss SGD, learning rate 1/(l2*t) at step t.

    The unregularized bias uses the decoupled rate 1/t: with the weight rate
    it would jump by 1/l2 on the first step and never recover at these
    iteration counts.
    """
    n, width = dense_x.shape
    weights = np.zeros(width)
    bias = 0.0
    step = 0
    for _ in range(epochs):
        for i in rng.permutation(n):
            step += 1
            eta = 1.0 / (l2 * step)
            margin = y_pm[i] * (dense_x[i] @ weights + bias)
            weights *= 1.0 - eta * l2
            if margin < 1.0:
                weights += eta * y_pm[i] * dense_x[i]
                bias += y_pm[i] / step
    return weights, bias


def _stratified_assignment(y: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Round-robin fold deal per class, shuffled; small local version for the
    SVM's internal calibration split."""
    fold = np.empty(len(y), dtype=np.int64)
    for cls in (1, 0):
        members = np.flatnonzero(y == cls)
        members = members[rng.permutation(len(members))]
        fold[members] = np.arange(len(members)) % k
    return fold


def train_svm_dense(dense_x: np.ndarray, y_arr: np.ndarray, l2: float = 1e-4,
                    epochs: int = 20, seed: int = 0) -> LinearModel:
    y_pm = 2.0 * y_arr - 1.0

    fold = _stratified_assignment(y_arr, 3, np.random.default_rng([seed, 1]))
    oof_scores = np.zeros(len(y_arr))
    for f in range(3):
        held = fold == f
        if held.all() or not held.any():
            continue
        w_f, b_f = _pegasos(dense_x[~held], y_pm[~held], l2, epochs,
                            np.random.default_rng([seed, 2, f]))
        oof_scores[held] = dense_x[held] @ w_f + b_f
    calibration = platt_calibrate(oof_scores, y_arr)

    weights, bias = _pegasos(dense_x, y_pm, l2, epochs, np.random.default_rng([seed, 0]))
    return LinearModel(weights=weights, bias=bias, kind="svm", calibration=calibration)


def train_linear_svm(X: Sequence[SparseVec], y: Sequence[int], n_features: int | None = None,
                     l2: float = 1e-4, epochs: int = 20, seed: int = 0) -> LinearModel:
    """Pegasos with learning rate 1/(l2*t), then Platt calibration on pooled
    out-of-fold decision values from a 3-fold split of the training set."""
    y_arr = _check_xy(X, y)
    width = _infer_width(X) if n_features is None else n_features
    return train_svm_dense(densify(X, width), y_arr, l2=l2, epochs=epochs, seed=seed)


def platt_calibrate(scores: Sequence[float], y: Sequence[int]) -> tuple[float, float]:
    """Fit (A, B) minimizing the mean log loss of sigmoid(A*s + B).

    Damped Newton iterations, at most 100, converged when the gradient norm
    drops below 1e-10.
    """
    s = np.asarray(scores, dtype=np.float64)
    t = np.asarray(y, dtype=np.float64)
    if not (np.any(t == 1) and np.any(t == 0)):
        raise DataError("calibration needs both classes")

    def loss_at(a: float, b: float) -> float:
        z = a * s + b
        return float(np.mean(np.logaddexp(0.0, z) - t * z))

    a, b = 0.0, 0.0
    current = loss_at(a, b)
    for _ in range(100):
        z = a * s + b
        p = _sigmoid_arr(z)
        residual = p - t
        grad_a = float(np.mean(residual * s))
        grad_b = float(np.mean(residual))
        if math.hypot(grad_a, grad_b) < 1e-10:
            return a, b
        w = p * (1.0 - p)
        h_aa = float(np.mean(w * s * s)) + 1e-12
        h_ab = float(np.mean(w * s))
        h_bb = float(np.mean(w)) + 1e-12
        det = h_aa * h_bb - h_ab * h_ab
        if det <= 0.0:
            det = 1e-12
        step_a = (h_bb * grad_a - h_ab * grad_b) / det
        step_b = (h_aa * grad_b - h_ab * grad_a) / det
        scale = 1.0
        next_a, next_b = a - step_a, b - step_b
        next_loss = loss_at(next_a, next_b)
        while next_loss > current + 1e-15 and scale > 1e-12:
            scale *= 0.5
            next_a, next_b = a - scale * step_a, b - scale * step_b
            next_loss = loss_at(next_a, next_b)
        a, b, current = next_a, next_b, next_loss
    z = a * s + b
    residual = _sigmoid_arr(z) - t
    if math.hypot(float(np.mean(residual * s)), float(np.mean(residual))) < 1e-10:
        return a, b
    raise DataError("calibration failed: no convergence after 100 iterations")


# ---------------------------------------------------------------------------
# gradient-boosted trees


@dataclass
class TreeNode:
    feature: int = -1  # -1 marks a leaf
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


@dataclass
class GbdtModel:
    initial_score: float
    trees: tuple[TreeNode, ...]
    shrinkage: float
    max_depth: int


class _TreeFitter:
    """Greedy squared-error tree on residuals, exact and deterministic.

    Columns are argsorted once per boosting run; every node filters the
    presorted order with its membership mask, scans all midpoint thresholds
    vectorized, and breaks gain ties toward the lowest feature id, then the
    lowest threshold.
    """

    def __init__(self, dense_x: np.ndarray, max_depth: int, min_leaf: int):
        self.x = dense_x
        self.xt = np.ascontiguousarray(dense_x.T)
        self.order = np.ascontiguousarray(np.argsort(dense_x, axis=0, kind="stable").T)
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.n, self.width = dense_x.shape
        self._rows = np.arange(self.width)[:, None]

    def fit(self, grad: np.ndarray, hess: np.ndarray) -> TreeNode | None:
        self.grad = grad
        self.hess = hess
        root_mask = np.ones(self.n, dtype=bool)
        split = self._best_split(root_mask, self.n)
        if split is None:
            return None
        return self._build(root_mask, self.n, 0, split)

    def _leaf(self, mask: np.ndarray) -> TreeNode:
        num = float(self.grad[mask].sum())
        den = max(float(self.hess[mask].sum()), 1e-16)
        value = min(max(num / den, -_LEAF_CLIP), _LEAF_CLIP)
        return TreeNode(value=value)

    def _build(self, mask: np.ndarray, count: int, depth: int, split=None) -> TreeNode:
        if depth >= self.max_depth or count < 2 * self.min_leaf:
            return self._leaf(mask)
        if split is None:
            split = self._best_split(mask, count)
        if split is None:
            return self._leaf(mask)
        feature, threshold, left_rows, right_rows = split
        left_mask = np.zeros(self.n, dtype=bool)
        left_mask[left_rows] = True
        right_mask = np.zeros(self.n, dtype=bool)
        right_mask[right_rows] = True
        return TreeNode(
            feature=feature,
            threshold=threshold,
            left=self._build(left_mask, len(left_rows), depth + 1),
            right=self._build(right_mask, len(right_rows), depth + 1),
        )

    def _best_split(self, mask: np.ndarray, count: int):
        if count < 2 * self.min_leaf:
            return None
        in_node = mask[self.order]  # width x n
        rows = self.order[in_node].reshape(self.width, count)
        vals = self.xt[self._rows, rows]
        g_sorted = self.grad[rows]
        g_cum = np.cumsum(g_sorted, axis=1)
        g_total = g_cum[:, -1:]

        n_left = np.arange(1, count, dtype=np.float64)
        n_right = count - n_left
        left_ok = n_left >= self.min_leaf
        right_ok = n_right >= self.min_leaf
        distinct = vals[:, :-1] < vals[:, 1:]
        valid = distinct & left_ok & right_ok

        g_left = g_cum[:, :-1]
        gains = (g_left ** 2) / n_left + (g_total - g_left) ** 2 / n_right \
            - (g_total ** 2) / count
        gains[~valid] = -np.inf

        per_feature_pos = np.argmax(gains, axis=1)  # first max: lowest threshold
        per_feature_gain = gains[np.arange(self.width), per_feature_pos]
        feature = int(np.argmax(per_feature_gain))  # first max: lowest feature id
        best_gain = per_feature_gain[feature]
        if not np.isfinite(best_gain) or best_gain <= _GAIN_EPS:
            return None
        pos = int(per_feature_pos[feature])
        threshold = 0.5 * (float(vals[feature, pos]) + float(vals[feature, pos + 1]))
        left_rows = rows[feature, : pos + 1]
        right_rows = rows[feature, pos + 1:]
        return feature, threshold, left_rows, right_rows


def _apply_tree(node: TreeNode, dense_x: np.ndarray, idx: np.ndarray,
                out: np.ndarray) -> None:
    if node.is_leaf:
        out[idx] = node.value
        return
    go_left = dense_x[idx, node.feature] <= node.threshold
    _apply_tree(node.left, dense_x, idx[go_left], out)
    _apply_tree(node.right, dense_x, idx[~go_left], out)


def train_gbdt_dense(dense_x: np.ndarray, y_arr: np.ndarray, rounds: int = 100,
                     max_depth: int = 3, shrinkage: float = 0.1,
                     min_leaf: int = 2) -> GbdtModel:
    base_rate = float(y_arr.mean())
    initial = math.log(base_rate / (1.0 - base_rate))
    scores = np.full(len(y_arr), initial)
    fitter = _TreeFitter(dense_x, max_depth, min_leaf)

    trees: list[TreeNode] = []
    for _ in range(rounds):
        prob = _sigmoid_arr(scores)
        grad = y_arr - prob
        hess = prob * (1.0 - prob)
        tree = fitter.fit(grad, hess)
        if tree is None:
            break
        leaf_values = np.empty(len(y_arr))
        _apply_tree(tree, dense_x, np.arange(len(y_arr)), leaf_values)
        scores = scores + shrinkage * leaf_values
        trees.append(tree)
    return GbdtModel(initial_score=initial, trees=tuple(trees),
                     shrinkage=shrinkage, max_depth=max_depth)


def train_gbdt(X: Sequence[SparseVec], y: Sequence[int], n_features: int | None = None,
               rounds: int = 100, max_depth: int = 3, shrinkage: float = 0.1,
               min_leaf: int = 2) -> GbdtModel:
    """Logistic-loss boosting: residuals y - sigmoid(F), Newton leaf values
    clipped to +/-4, F updated by shrinkage per round. A round whose root
    finds no valid split (e.g. constant features) ends the run with no tree
    appended."""
    y_arr = _check_xy(X, y)
    width = _infer_width(X) if n_features is None else n_features
    return train_gbdt_dense(densify(X, width), y_arr, rounds=rounds,
                            max_depth=max_depth, shrinkage=shrinkage,
                            min_leaf=min_leaf)


def _walk_tree(node: TreeNode, x: SparseVec) -> float:
    while not node.is_leaf:
        node = node.left if x.get(node.feature) <= node.threshold else node.right
    return node.value


def gbdt_decision(model: GbdtModel, x: SparseVec) -> float:
    return model.initial_score + model.shrinkage * sum(
        _walk_tree(tree, x) for tree in model.trees
    )


def tree_to_dict(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"value": node.value}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "left": tree_to_dict(node.left),
        "right": tree_to_dict(node.right),
    }


def tree_from_dict(obj: dict) -> TreeNode:
    if "value" in obj:
        return TreeNode(value=float(obj["value"]))
    return TreeNode(
        feature=int(obj["feature"]),
        threshold=float(obj["threshold"]),
        left=tree_from_dict(obj["left"]),
        right=tree_from_dict(obj["right"]),
    )


# ---------------------------------------------------------------------------
# probability interface shared by the three model kinds


def predict_proba(model: LinearModel | GbdtModel, x: SparseVec) -> float:
    """Probability of 'met'; strictly inside (0, 1) for any finite model."""
    if isinstance(model, GbdtModel):
        return sigmoid(gbdt_decision(model, x))
    if model.kind == "logreg":
        return sigmoid(linear_decision(model, x))
    if model.calibration is None:
        raise DataError("svm model is missing Platt calibration")
    a, b = model.calibration
    return sigmoid(a * linear_decision(model, x) + b)


def predict_proba_dense(model: LinearModel | GbdtModel, dense_x: np.ndarray) -> np.ndarray:
    """Row-wise probabilities over a dense matrix in the model's feature space."""
    if isinstance(model, GbdtModel):
        scores = np.full(len(dense_x), model.initial_score)
        idx = np.arange(len(dense_x))
        values = np.empty(len(dense_x))
        for tree in model.trees:
            _apply_tree(tree, dense_x, idx, values)
            scores += model.shrinkage * values
        return _sigmoid_arr(scores)
    z = dense_x @ model.weights + model.bias
    if model.kind == "svm":
        if model.calibration is None:
            raise DataError("svm model is missing Platt calibration")
        a, b = model.calibration
        z = a * z + b
    return _sigmoid_arr(z)
