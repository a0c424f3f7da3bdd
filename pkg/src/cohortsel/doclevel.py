"""Document-level bag-of-n-grams linear classifier.

Word unigrams and adjacent bigrams are hashed (FNV-1a 64-bit, modulo a bucket
count) into an embedding table; a document is the mean of its n-gram
embeddings, classified by a softmax over a dense output layer. Training is
plain SGD on cross-entropy, one example at a time, with the learning rate
decaying linearly to zero over all updates.

The two class probabilities of each label's model are later injected into
that label's feature vector (the ``dlc:`` family).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import Document
from .errors import DataError

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_FNV_MASK = 0xFFFFFFFFFFFFFFFF


def fnv1a_64(data: bytes) -> int:
    digest = _FNV_OFFSET
    for byte in data:
        digest = ((digest ^ byte) * _FNV_PRIME) & _FNV_MASK
    return digest


def ngram_ids(surfaces: Sequence[str], bucket_count: int) -> list[int]:
    """Hash each unigram and each adjacent bigram (joined by one space).

    Pure function of the surfaces: the same token list always produces the
    same id list, bigrams after unigrams.
    """
    if bucket_count < 1:
        raise DataError(f"bucket_count must be >= 1, got {bucket_count}")
    ids = [fnv1a_64(s.encode("utf-8")) % bucket_count for s in surfaces]
    for a, b in zip(surfaces, surfaces[1:]):
        ids.append(fnv1a_64(f"{a} {b}".encode("utf-8")) % bucket_count)
    return ids


@dataclass
class DocClfModel:
    embeddings: np.ndarray  # bucket_count x dim
    output: np.ndarray  # dim x n_classes
    bucket_count: int
    dim: int
    n_classes: int
    seed: int
    # rows touched during training; with the seed these reconstruct the table
    updated_rows: tuple[int, ...] = ()
    epoch_losses: tuple[float, ...] = field(default=(), compare=False)


def init_embeddings(seed: int, bucket_count: int, dim: int) -> np.ndarray:
    """Uniform in [-1/dim, 1/dim]; the zero output layer makes an untrained
    model predict exactly uniform probabilities."""
    rng = np.random.default_rng(seed)
    return rng.uniform(-1.0 / dim, 1.0 / dim, size=(bucket_count, dim))


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max()
    exp = np.exp(shifted)
    return exp / exp.sum()


def train_doc_classifier(token_lists: Sequence[Sequence[str]], labels: Sequence[int],
                         n_classes: int = 2, dim: int = 16, bucket_count: int = 1 << 18,
                         epochs: int = 5, lr0: float = 0.1, seed: int = 0) -> DocClfModel:
    """SGD on softmax cross-entropy over hashed bag-of-n-gram features.

    Every class in [0, n_classes) must occur at least once in ``labels``.
    Deterministic given the seed: example order is reshuffled per epoch from a
    seeded generator and the learning rate decays linearly from lr0 to 0.
    """
    n = len(token_lists)
    if n != len(labels):
        raise DataError("token_lists and labels must have equal length")
    if n == 0:
        raise DataError("cannot train on an empty corpus")
    present = set(int(y) for y in labels)
    if not present.issubset(range(n_classes)):
        raise DataError(f"labels must lie in [0, {n_classes})")
    if len(present) < n_classes:
        raise DataError("degenerate labels: every class needs at least one example")

    # per doc: unique bucket ids with multiplicities (repeats accumulate)
    grams = []
    for toks in token_lists:
        ids = np.asarray(ngram_ids(toks, bucket_count), dtype=np.int64)
        uids, counts = np.unique(ids, return_counts=True)
        grams.append((uids, counts.astype(np.float64), float(ids.size)))
    rng = np.random.default_rng(seed)
    embeddings = init_embeddings(seed, bucket_count, dim)
    output = np.zeros((dim, n_classes))

    total_updates = epochs * n
    step = 0
    epoch_losses = []
    for _ in range(epochs):
        order = rng.permutation(n)
        for i in order:
            lr = lr0 * (1.0 - step / total_updates)
            step += 1
            uids, counts, size = grams[i]
            if size == 0.0:
                continue
            hidden = counts @ embeddings[uids] / size
            probs = _softmax(hidden @ output)
            delta = probs.copy()
            delta[labels[i]] -= 1.0
            grad_hidden = output @ delta
            output -= lr * np.outer(hidden, delta)
            embeddings[uids] += np.outer(counts, (-lr / size) * grad_hidden)
        epoch_losses.append(_mean_cross_entropy(embeddings, output, grams, labels))

    touched = sorted({int(b) for uids, _, _ in grams for b in uids})
    return DocClfModel(
        embeddings=embeddings, output=output, bucket_count=bucket_count, dim=dim,
        n_classes=n_classes, seed=seed, updated_rows=tuple(touched),
        epoch_losses=tuple(epoch_losses),
    )


def _mean_cross_entropy(embeddings, output, grams, labels) -> float:
    total = 0.0
    for (uids, counts, size), y in zip(grams, labels):
        if size == 0.0:
            probs = np.full(output.shape[1], 1.0 / output.shape[1])
        else:
            probs = _softmax((counts @ embeddings[uids] / size) @ output)
        total += -float(np.log(max(probs[y], 1e-300)))
    return total / len(grams)


def class_probs(model: DocClfModel, surfaces: Sequence[str]) -> tuple[float, ...]:
    """Class probabilities for a token list; empty input is exactly uniform."""
    ids = ngram_ids(surfaces, model.bucket_count)
    if not ids:
        return tuple([1.0 / model.n_classes] * model.n_classes)
    hidden = model.embeddings[np.asarray(ids, dtype=np.int64)].mean(axis=0)
    return tuple(float(p) for p in _softmax(hidden @ model.output))


def doc_class_probs(model: DocClfModel, doc: Document) -> tuple[float, ...]:
    """Probability tuple for a document; index 0 is the 'met' class in the
    binary per-label setup."""
    return class_probs(model, [t.surface for t in doc.tokens])


def predict_class(model: DocClfModel, surfaces: Sequence[str]) -> int:
    probs = class_probs(model, surfaces)
    return int(np.argmax(probs))
