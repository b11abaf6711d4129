"""Vocabulary building, sparse bag-of-words / TF-IDF vectors, and vector metrics."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimMismatch,
    EmptyCorpus,
    InconsistentStats,
    InvalidInput,
    ZeroVector,
)


class NormScheme(Enum):
    """How a count/weight vector is normalized before comparison."""

    NONE = "none"
    L1 = "l1"
    L2 = "l2"


class VectorMetric(Enum):
    """Which norm measures the difference of two vectors."""

    L1 = "l1"
    L2 = "l2"


@dataclass(frozen=True)
class Vocabulary:
    """Ordered set of unique tokens with stable integer ids."""

    words: tuple[str, ...]
    index: dict[str, int] = field(repr=False)

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def lookup(self, token: str) -> int:
        return self.index[token]


class SparseVector:
    """Sparse nonnegative vector over a fixed-dimension id space.

    Entries are stored as parallel ``ids`` / ``values`` arrays with ids
    strictly increasing and values strictly positive, so equal vectors
    have identical representations.
    """

    __slots__ = ("dim", "ids", "values")

    def __init__(self, dim: int, ids: np.ndarray, values: np.ndarray):
        ids = np.asarray(ids, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if dim < 0:
            raise InvalidInput(f"negative dimension {dim}")
        if ids.ndim != 1 or values.ndim != 1 or ids.size != values.size:
            raise InvalidInput("ids and values must be 1-D arrays of equal length")
        if ids.size:
            if not np.all(np.diff(ids) > 0):
                raise InvalidInput("ids must be strictly increasing")
            if ids[0] < 0 or ids[-1] >= dim:
                raise InvalidInput("ids out of range")
            if not np.all(np.isfinite(values)) or not np.all(values > 0):
                raise InvalidInput("values must be finite and > 0")
        ids.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "values", values)

    def __setattr__(self, name, value):
        raise AttributeError("SparseVector is immutable")

    @classmethod
    def from_pairs(cls, dim: int, pairs: Iterable[tuple[int, float]]) -> "SparseVector":
        pairs = sorted((int(i), float(v)) for i, v in pairs if v != 0.0)
        ids = np.array([i for i, _ in pairs], dtype=np.int64)
        values = np.array([v for _, v in pairs], dtype=np.float64)
        return cls(dim, ids, values)

    @property
    def entries(self) -> list[tuple[int, float]]:
        return list(zip(self.ids.tolist(), self.values.tolist()))

    @property
    def nnz(self) -> int:
        return int(self.ids.size)

    def sum(self) -> float:
        return math.fsum(self.values.tolist())

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.ids] = self.values
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseVector):
            return NotImplemented
        return (
            self.dim == other.dim
            and np.array_equal(self.ids, other.ids)
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self) -> str:
        return f"SparseVector(dim={self.dim}, nnz={self.nnz})"


def build_vocabulary(documents: Sequence[Sequence[str]]) -> Vocabulary:
    """Collect the distinct tokens of ``documents``, ordered by first occurrence."""
    if not documents:
        raise EmptyCorpus("no documents")
    index: dict[str, int] = {}
    for doc in documents:
        for tok in doc:
            if not tok:
                raise InvalidInput("empty token")
            if tok not in index:
                index[tok] = len(index)
    return Vocabulary(words=tuple(index), index=index)


def bow_vector(doc: Sequence[str], vocab: Vocabulary) -> tuple[SparseVector, int]:
    """Count in-vocabulary occurrences; returns (vector, number of dropped tokens)."""
    counts: Counter[int] = Counter()
    dropped = 0
    for tok in doc:
        i = vocab.index.get(tok)
        if i is None:
            dropped += 1
        else:
            counts[i] += 1
    vec = SparseVector.from_pairs(len(vocab), counts.items())
    return vec, dropped


def document_frequencies(
    documents: Iterable[Sequence[str]], vocab: Vocabulary
) -> np.ndarray:
    """Number of documents each vocabulary word appears in."""
    df = np.zeros(len(vocab), dtype=np.int64)
    for doc in documents:
        seen = {vocab.index[t] for t in doc if t in vocab.index}
        for i in seen:
            df[i] += 1
    return df


def tfidf_vector(
    doc: Sequence[str],
    vocab: Vocabulary,
    doc_freq: np.ndarray,
    n_docs: int,
) -> SparseVector:
    """Weight each in-vocabulary word by count * log2(n_docs / doc_freq).

    Words occurring in every document get weight zero and are omitted.
    """
    if n_docs < 1:
        raise InconsistentStats(f"n_docs must be >= 1, got {n_docs}")
    counts, _ = bow_vector(doc, vocab)
    pairs = []
    for i, c in zip(counts.ids.tolist(), counts.values.tolist()):
        df = int(doc_freq[i])
        if df < 1 or df > n_docs:
            raise InconsistentStats(
                f"word {vocab.words[i]!r} has document frequency {df} "
                f"out of range [1, {n_docs}]"
            )
        w = c * math.log2(n_docs / df)
        if w > 0.0:
            pairs.append((i, w))
    return SparseVector.from_pairs(len(vocab), pairs)


def normalize(v: SparseVector, scheme: NormScheme) -> SparseVector:
    """Rescale ``v`` per ``scheme``; identity for ``NormScheme.NONE``."""
    if scheme is NormScheme.NONE:
        return v
    if v.nnz == 0:
        raise ZeroVector("cannot normalize an empty vector")
    if scheme is NormScheme.L1:
        total = math.fsum(v.values.tolist())
    else:
        total = math.sqrt(math.fsum((x * x for x in v.values.tolist())))
    return SparseVector(v.dim, v.ids, v.values / total)


def _aligned(a: SparseVector, b: SparseVector) -> tuple[np.ndarray, np.ndarray]:
    ids = np.union1d(a.ids, b.ids)
    av = np.zeros(ids.size)
    bv = np.zeros(ids.size)
    av[np.searchsorted(ids, a.ids)] = a.values
    bv[np.searchsorted(ids, b.ids)] = b.values
    return av, bv


def vector_distance(a: SparseVector, b: SparseVector, metric: VectorMetric) -> float:
    """Distance between two sparse vectors under the given metric."""
    if a.dim != b.dim:
        raise DimMismatch(f"dimensions differ: {a.dim} != {b.dim}")
    av, bv = _aligned(a, b)
    diff = av - bv
    if metric is VectorMetric.L1:
        return math.fsum(np.abs(diff).tolist())
    return math.sqrt(math.fsum((diff * diff).tolist()))
