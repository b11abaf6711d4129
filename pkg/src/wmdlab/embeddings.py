"""Word embedding storage: loading, unit-norm scaling, cost matrices, PCA."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .errors import (
    DimMismatch,
    InvalidInput,
    MissingWord,
    ParseError,
    RankDeficient,
    ZeroVector,
)

TEXT = "text"
WORD2VEC_BINARY = "word2vec-binary"


class EmbeddingStore:
    """Immutable token -> dense vector map."""

    __slots__ = ("tokens", "matrix", "index", "dim", "normalized")

    def __init__(self, tokens: Sequence[str], matrix: np.ndarray,
                 normalized: bool = False):
        matrix = np.ascontiguousarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != len(tokens):
            raise InvalidInput("matrix must be (n_tokens, dim)")
        matrix.setflags(write=False)
        object.__setattr__(self, "tokens", tuple(tokens))
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.tokens)})
        object.__setattr__(self, "dim", int(matrix.shape[1]))
        object.__setattr__(self, "normalized", bool(normalized))

    def __setattr__(self, name, value):
        raise AttributeError("EmbeddingStore is immutable")

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def vector(self, token: str) -> np.ndarray:
        try:
            return self.matrix[self.index[token]]
        except KeyError:
            raise MissingWord(token) from None

    def rows(self, words: Sequence[str]) -> np.ndarray:
        idx = []
        for w in words:
            i = self.index.get(w)
            if i is None:
                raise MissingWord(w)
            idx.append(i)
        return self.matrix[idx]


def _load_text(path: str) -> tuple[list[str], list[np.ndarray]]:
    tokens: list[str] = []
    vectors: list[np.ndarray] = []
    seen: set[str] = set()
    dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            fields = line.split()
            if not fields:
                continue
            if lineno == 1 and len(fields) == 2:
                try:
                    int(fields[0]), int(fields[1])
                    continue  # optional "count dim" header
                except ValueError:
                    pass
            token = fields[0]
            try:
                vec = np.array([float(x) for x in fields[1:]], dtype=np.float64)
            except ValueError as exc:
                raise ParseError(f"line {lineno}: {exc}", line=lineno) from None
            if vec.size == 0:
                raise ParseError(f"line {lineno}: no vector components", line=lineno)
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise DimMismatch(
                    f"line {lineno}: expected {dim} components, got {vec.size}"
                )
            if token not in seen:
                seen.add(token)
                tokens.append(token)
                vectors.append(vec)
    if not tokens:
        raise ParseError("no embedding records found", line=1)
    return tokens, vectors


def _load_word2vec_binary(path: str) -> tuple[list[str], list[np.ndarray]]:
    with open(path, "rb") as fh:
        data = fh.read()
    nl = data.find(b"\n")
    if nl < 0:
        raise ParseError("missing header line", offset=0)
    header = data[:nl].split()
    if len(header) != 2:
        raise ParseError("header must be 'count dim'", offset=0)
    try:
        count, dim = int(header[0]), int(header[1])
    except ValueError:
        raise ParseError("header must be 'count dim'", offset=0) from None
    if count < 1 or dim < 1:
        raise ParseError(f"bad header counts {count} {dim}", offset=0)
    tokens: list[str] = []
    vectors: list[np.ndarray] = []
    seen: set[str] = set()
    pos = nl + 1
    rec_bytes = 4 * dim
    for _ in range(count):
        while pos < len(data) and data[pos:pos + 1] == b"\n":
            pos += 1
        sp = data.find(b" ", pos)
        if sp < 0:
            raise ParseError("truncated record: no token terminator", offset=pos)
        try:
            token = data[pos:sp].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"bad token bytes: {exc}", offset=pos) from None
        end = sp + 1 + rec_bytes
        if end > len(data):
            raise ParseError("truncated record: short vector", offset=sp + 1)
        vec = np.frombuffer(data[sp + 1:end], dtype="<f4").astype(np.float64)
        if token not in seen:
            seen.add(token)
            tokens.append(token)
            vectors.append(vec)
        pos = end
    return tokens, vectors


def load_embeddings(path: str, format: str = TEXT) -> EmbeddingStore:
    """Read an embedding file in the text or word2vec-binary layout."""
    if format == TEXT:
        tokens, vectors = _load_text(path)
    elif format == WORD2VEC_BINARY:
        tokens, vectors = _load_word2vec_binary(path)
    else:
        raise InvalidInput(f"unknown embedding format {format!r}")
    return EmbeddingStore(tokens, np.vstack(vectors))


def l2_normalize(store: EmbeddingStore) -> EmbeddingStore:
    """Scale every vector to unit Euclidean norm."""
    norms = np.linalg.norm(store.matrix, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ZeroVector(store.tokens[int(zero[0])])
    return EmbeddingStore(store.tokens, store.matrix / norms[:, None],
                          normalized=True)


def cost_submatrix(store: EmbeddingStore, src_words: Sequence[str],
                   dst_words: Sequence[str]) -> np.ndarray:
    """Pairwise Euclidean distances between two word lists' embeddings."""
    out = cdist(store.rows(src_words), store.rows(dst_words))
    if store.normalized:
        # unit vectors are at most diameter 2 apart; trim float overshoot
        np.minimum(out, 2.0, out=out)
    return out


def project_pca(store: EmbeddingStore, target_dim: int,
                fit_vocab: Sequence[str]) -> EmbeddingStore:
    """Project the whole store onto the top principal directions of a vocabulary.

    The projection is fit on the mean-centered embeddings of ``fit_vocab``
    (duplicates ignored) via eigendecomposition of the sample covariance.
    Each principal direction is sign-fixed so its largest-magnitude entry
    is positive, making the output deterministic.
    """
    if not 1 <= target_dim <= store.dim:
        raise InvalidInput(
            f"target_dim {target_dim} out of range [1, {store.dim}]"
        )
    fit_words = list(dict.fromkeys(fit_vocab))
    if len(fit_words) < target_dim:
        raise InvalidInput(
            f"need at least {target_dim} fit words, got {len(fit_words)}"
        )
    x = store.rows(fit_words)
    mean = x.mean(axis=0)
    if x.shape[0] < 2:
        raise RankDeficient("cannot fit a covariance on fewer than 2 vectors")
    cov = np.cov(x, rowvar=False, ddof=1).reshape(store.dim, store.dim)
    eigvals, eigvecs = np.linalg.eigh(cov)
    eigvals = eigvals[::-1]
    eigvecs = eigvecs[:, ::-1]
    tol = max(float(eigvals[0]), 0.0) * max(x.shape) * np.finfo(np.float64).eps
    n_nonzero = int(np.count_nonzero(eigvals > tol))
    if n_nonzero < target_dim:
        raise RankDeficient(
            f"{n_nonzero} nonzero principal directions, need {target_dim}"
        )
    basis = eigvecs[:, :target_dim].copy()
    for c in range(target_dim):
        k = int(np.argmax(np.abs(basis[:, c])))
        if basis[k, c] < 0:
            basis[:, c] = -basis[:, c]
    projected = (store.matrix - mean) @ basis
    return EmbeddingStore(store.tokens, projected, normalized=False)
