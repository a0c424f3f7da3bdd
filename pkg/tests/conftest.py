from pathlib import Path

import numpy as np
import pytest

from cohortsel.corpus import Document
from cohortsel.features import SparseVec

DATA_DIR = Path(__file__).parent / "data"
TFIDF_FIXTURE = DATA_DIR / "tfidf_fixture.jsonl"


def make_doc(doc_id: str, text: str) -> Document:
    return Document.from_text(doc_id, text)


def gbdt_fixture(n: int = 200, seed: int = 7):
    """Two informative features (label = x0 + x1 > 1) plus three noise columns."""
    rng = np.random.default_rng(seed)
    points = rng.uniform(0.0, 1.0, size=(n, 5))
    y = (points[:, 0] + points[:, 1] > 1.0).astype(int)
    vectors = [
        SparseVec({j: float(points[i, j]) for j in range(5)}) for i in range(n)
    ]
    return vectors, y.tolist()


def linear_fixture(n: int = 40, seed: int = 3):
    """Linearly separable two-feature set with a wide margin."""
    rng = np.random.default_rng(seed)
    vectors, y = [], []
    for i in range(n):
        label = i % 2
        center = 2.0 if label == 1 else -2.0
        vectors.append(
            SparseVec({
                0: float(center + rng.normal(0.0, 0.3)),
                1: float(rng.normal(0.0, 0.5)),
            })
        )
        y.append(label)
    return vectors, y


def platt_fixture():
    """20 (score, label) pairs, overlapping so the log-loss optimum is finite."""
    scores = [-2.1, -1.7, -1.3, -1.2, -0.9, -0.8, -0.45, -0.3, -0.15, 0.05,
              -0.6, 0.1, 0.25, 0.4, 0.55, 0.8, 1.1, 1.4, 1.9, 2.3]
    labels = [0, 0, 0, 0, 0, 1, 0, 0, 1, 0,
              1, 1, 1, 0, 1, 1, 1, 1, 1, 1]
    return scores, labels


def three_class_doc_fixture():
    """30 token lists over three disjoint vocabularies, 10 per class."""
    vocab = {
        0: ["alpha", "beta", "gamma"],
        1: ["delta", "epsilon", "zeta"],
        2: ["theta", "iota", "kappa"],
    }
    rng = np.random.default_rng(11)
    token_lists, labels = [], []
    for cls in range(3):
        for _ in range(10):
            length = int(rng.integers(5, 9))
            token_lists.append([vocab[cls][int(rng.integers(3))] for _ in range(length)])
            labels.append(cls)
    return token_lists, labels


@pytest.fixture
def tfidf_fixture_path() -> Path:
    return TFIDF_FIXTURE
