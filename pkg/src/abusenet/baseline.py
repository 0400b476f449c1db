"""Multinomial Naive Bayes over TF-IDF weights: the classical reference model.

Preprocessing keeps it deliberately simple: lowercase, strip the platform
marker tokens and punctuation, drop stop words (a fixed list covering 14
languages), and keep only the most frequent vocabulary (top 10k by default).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from importlib import resources as importlib_resources

import numpy as np

from .text import HASHTAG_TOKEN, NUMBER_TOKEN, URL_TOKEN, USER_TOKEN, tokenize

MARKER_TOKENS = {URL_TOKEN, USER_TOKEN, NUMBER_TOKEN, HASHTAG_TOKEN}


def _load_stopwords() -> frozenset[str]:
    text = importlib_resources.files("abusenet.resources").joinpath("stopwords.txt").read_text("utf-8")
    return frozenset(line.strip() for line in text.splitlines()
                     if line.strip() and not line.startswith("#"))


STOPWORDS = _load_stopwords()


def preprocess_baseline(text: str, vocabulary: set[str] | None = None) -> list[str]:
    """Lowercase, drop markers/punctuation/stop words; filter to the vocabulary."""
    tokens = []
    for tok in tokenize(text):
        if tok in MARKER_TOKENS or tok in STOPWORDS:
            continue
        if len(tok) == 1 and not tok.isalnum():
            continue
        if vocabulary is not None and tok not in vocabulary:
            continue
        tokens.append(tok)
    return tokens


@dataclass
class TfidfModel:
    """Top-k vocabulary with smoothed idf; rows L2-normalize on transform."""

    top_k: int = 10000
    vocabulary: dict[str, int] = field(default_factory=dict)
    idf: np.ndarray | None = None
    n_documents: int = 0

    def fit(self, documents: list[list[str]]) -> "TfidfModel":
        term_counts: Counter = Counter()
        for doc in documents:
            term_counts.update(doc)
        kept = sorted(term_counts, key=lambda t: (-term_counts[t], t))[: self.top_k]
        self.vocabulary = {t: i for i, t in enumerate(kept)}
        self.n_documents = len(documents)
        df = np.zeros(len(kept), dtype=np.float64)
        for doc in documents:
            for t in set(doc):
                idx = self.vocabulary.get(t)
                if idx is not None:
                    df[idx] += 1
        self.idf = np.log((1.0 + self.n_documents) / (1.0 + df)) + 1.0
        return self

    def transform(self, documents: list[list[str]]) -> np.ndarray:
        if self.idf is None:
            raise ValueError("TfidfModel must be fitted first")
        out = np.zeros((len(documents), len(self.vocabulary)), dtype=np.float64)
        for i, doc in enumerate(documents):
            for t in doc:
                idx = self.vocabulary.get(t)
                if idx is not None:
                    out[i, idx] += 1.0
        out *= self.idf[None, :]
        norms = np.linalg.norm(out, axis=1, keepdims=True)
        np.divide(out, norms, out=out, where=norms > 0)
        return out

    def fit_transform(self, documents: list[list[str]]) -> np.ndarray:
        return self.fit(documents).transform(documents)


@dataclass
class NaiveBayes:
    """Multinomial NB with Laplace smoothing, consuming TF-IDF weights."""

    alpha: float = 1.0
    log_prior: np.ndarray | None = None
    log_likelihood: np.ndarray | None = None  # [classes, terms]
    n_classes: int = 0

    def fit(self, matrix: np.ndarray, labels: np.ndarray, n_classes: int | None = None) -> "NaiveBayes":
        labels = np.asarray(labels)
        self.n_classes = int(labels.max()) + 1 if n_classes is None else n_classes
        counts = np.bincount(labels, minlength=self.n_classes).astype(np.float64)
        if (counts == 0).any():
            raise ValueError("every class needs at least one training sample")
        self.log_prior = np.log(counts / counts.sum())
        n_terms = matrix.shape[1]
        weights = np.zeros((self.n_classes, n_terms), dtype=np.float64)
        for cls in range(self.n_classes):
            weights[cls] = matrix[labels == cls].sum(axis=0)
        smoothed = weights + self.alpha
        self.log_likelihood = np.log(smoothed / smoothed.sum(axis=1, keepdims=True))
        return self

    def joint_log_scores(self, matrix: np.ndarray) -> np.ndarray:
        if self.log_prior is None:
            raise ValueError("NaiveBayes must be fitted first")
        return self.log_prior[None, :] + matrix @ self.log_likelihood.T

    def predict_proba(self, matrix: np.ndarray) -> np.ndarray:
        scores = self.joint_log_scores(matrix)
        scores -= scores.max(axis=1, keepdims=True)
        e = np.exp(scores)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, matrix: np.ndarray) -> np.ndarray:
        # argmax takes the lowest class index on ties
        return self.joint_log_scores(matrix).argmax(axis=1)


def nb_fit(matrix: np.ndarray, labels: np.ndarray, n_classes: int | None = None,
           alpha: float = 1.0) -> NaiveBayes:
    return NaiveBayes(alpha=alpha).fit(matrix, labels, n_classes)


def nb_predict(model: NaiveBayes, matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(predictions, posteriors) for a document-term matrix."""
    return model.predict(matrix), model.predict_proba(matrix)
