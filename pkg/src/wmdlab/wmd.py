"""Word mover's distance between documents and batch distance matrices."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .embeddings import EmbeddingStore, cost_submatrix
from .errors import EmptySupport, InvalidInput, ParseError
from .ot_core import TransportPlan, TransportProblem, solve_transport
from .textrep import (
    NormScheme,
    SparseVector,
    VectorMetric,
    Vocabulary,
    bow_vector,
    normalize,
    tfidf_vector,
    vector_distance,
)

UNIFORM_COUNT = "uniform-count"
TFIDF_WEIGHTING = "tfidf"


@dataclass(frozen=True)
class DocumentMeasure:
    """A document as a probability distribution over its support words."""

    words: tuple[str, ...]
    weights: np.ndarray

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=np.float64)
        if len(self.words) != weights.size:
            raise InvalidInput("words and weights lengths differ")
        if len(set(self.words)) != len(self.words):
            raise InvalidInput("support words must be unique")
        if weights.size == 0:
            raise EmptySupport("measure has no support")
        if not np.all(np.isfinite(weights)) or not np.all(weights > 0):
            raise InvalidInput("weights must be finite and > 0")
        total = math.fsum(weights.tolist())
        if abs(total - 1.0) > 1e-9:
            raise InvalidInput(f"weights sum to {total!r}, expected 1")
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)


@dataclass(frozen=True)
class Method:
    """A document-distance method: transport-based or a vector baseline."""

    kind: str  # 'wmd' | 'wmd-tfidf' | 'bow' | 'tfidf'
    norm: NormScheme | None = None
    metric: VectorMetric | None = None

    def __post_init__(self):
        if self.kind in ("wmd", "wmd-tfidf"):
            if self.norm is not None or self.metric is not None:
                raise InvalidInput(f"{self.kind} takes no norm/metric")
        elif self.kind in ("bow", "tfidf"):
            if self.norm is None or self.metric is None:
                raise InvalidInput(f"{self.kind} requires a norm and a metric")
        else:
            raise InvalidInput(f"unknown method kind {self.kind!r}")

    @property
    def uses_transport(self) -> bool:
        return self.kind in ("wmd", "wmd-tfidf")

    @property
    def label(self) -> str:
        if self.uses_transport:
            return self.kind
        return f"{self.kind}({self.norm.value},{self.metric.value})"

    @classmethod
    def parse(cls, spec: str, default_norm: str = "l1",
              default_metric: str = "l1") -> "Method":
        """Parse e.g. ``wmd``, ``bow(l1,l1)``, ``tfidf(none,l2)``."""
        spec = spec.strip().lower()
        if spec in ("wmd", "wmd-tfidf"):
            return cls(spec)
        kind, sep, rest = spec.partition("(")
        if kind not in ("bow", "tfidf"):
            raise InvalidInput(f"unknown method {spec!r}")
        if sep:
            if not rest.endswith(")"):
                raise InvalidInput(f"unbalanced parentheses in {spec!r}")
            parts = [p.strip() for p in rest[:-1].split(",")]
            if len(parts) != 2:
                raise InvalidInput(f"expected (norm,metric) in {spec!r}")
            norm_s, metric_s = parts
        else:
            norm_s, metric_s = default_norm, default_metric
        try:
            return cls(kind, NormScheme(norm_s), VectorMetric(metric_s))
        except ValueError as exc:
            raise InvalidInput(f"bad norm/metric in {spec!r}: {exc}") from None


@dataclass(frozen=True)
class DistanceMatrix:
    """Distances from each query document to each reference document.

    Cells are finite and nonnegative, except for a +inf sentinel marking
    documents unusable under the method; ``unusable_ids`` lists them when
    the matrix was produced in-process (the cache format does not carry it).
    """

    row_ids: tuple[int, ...]
    col_ids: tuple[int, ...]
    values: np.ndarray
    unusable_ids: tuple[int, ...] = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (len(self.row_ids), len(self.col_ids)):
            raise InvalidInput(
                f"values shape {values.shape} does not match ids "
                f"({len(self.row_ids)}, {len(self.col_ids)})"
            )
        if np.any(np.isnan(values)) or np.any(values < 0):
            raise InvalidInput("distances must be >= 0 and not NaN")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_rows(self) -> int:
        return len(self.row_ids)

    @property
    def n_cols(self) -> int:
        return len(self.col_ids)

    def row(self, doc_id: int) -> np.ndarray:
        return self.values[self.row_ids.index(doc_id)]

    def submatrix(self, row_ids: Sequence[int],
                  col_ids: Sequence[int]) -> "DistanceMatrix":
        rpos = {d: i for i, d in enumerate(self.row_ids)}
        cpos = {d: j for j, d in enumerate(self.col_ids)}
        ri = [rpos[d] for d in row_ids]
        ci = [cpos[d] for d in col_ids]
        return DistanceMatrix(
            tuple(row_ids), tuple(col_ids),
            self.values[np.ix_(ri, ci)].copy(),
            unusable_ids=tuple(d for d in self.unusable_ids
                               if d in rpos or d in cpos),
        )


@dataclass
class Resources:
    """Shared inputs for batch distance computation.

    ``tokens`` maps document id to its (already vocabulary-filtered)
    token sequence. ``doc_freq``/``n_docs`` are corpus-level statistics
    used by the tfidf weightings.
    """

    tokens: Mapping[int, Sequence[str]]
    vocab: Vocabulary
    store: EmbeddingStore | None = None
    doc_freq: np.ndarray | None = None
    n_docs: int | None = None
    workers: int = 1


def make_measure(
    doc: Sequence[str],
    weighting: str,
    vocab: Vocabulary,
    doc_freq: np.ndarray | None = None,
    n_docs: int | None = None,
) -> DocumentMeasure:
    """Turn a token list into an L1-normalized measure over its support."""
    if weighting == UNIFORM_COUNT:
        vec, _ = bow_vector(doc, vocab)
    elif weighting == TFIDF_WEIGHTING:
        if doc_freq is None or n_docs is None:
            raise InvalidInput("tfidf weighting needs doc_freq and n_docs")
        vec = tfidf_vector(doc, vocab, doc_freq, n_docs)
    else:
        raise InvalidInput(f"unknown weighting {weighting!r}")
    if vec.nnz == 0:
        raise EmptySupport("document has no usable words")
    total = math.fsum(vec.values.tolist())
    words = tuple(vocab.words[i] for i in vec.ids.tolist())
    return DocumentMeasure(words=words, weights=vec.values / total)


def transport_plan(
    m1: DocumentMeasure, m2: DocumentMeasure, store: EmbeddingStore
) -> tuple[TransportPlan, np.ndarray]:
    """Optimal coupling between two document measures plus its cost matrix."""
    cost = cost_submatrix(store, m1.words, m2.words)
    plan = solve_transport(TransportProblem(m1.weights, m2.weights, cost))
    return plan, cost


def wmd_distance(
    m1: DocumentMeasure, m2: DocumentMeasure, store: EmbeddingStore
) -> float:
    """Minimum total embedding distance to move one document onto the other."""
    plan, _ = transport_plan(m1, m2, store)
    return plan.objective


# -- batch computation --------------------------------------------------------

_STATE: dict = {}


def _prepare_reps(ids: Sequence[int], method: Method, res: Resources) -> dict:
    """Per-document representation (measure or normalized vector) or None."""
    reps: dict[int, object] = {}
    for doc_id in ids:
        doc = res.tokens[doc_id]
        if method.uses_transport:
            weighting = (UNIFORM_COUNT if method.kind == "wmd"
                         else TFIDF_WEIGHTING)
            try:
                reps[doc_id] = make_measure(doc, weighting, res.vocab,
                                            res.doc_freq, res.n_docs)
            except EmptySupport:
                reps[doc_id] = None
        else:
            if method.kind == "bow":
                vec, _ = bow_vector(doc, res.vocab)
            else:
                if res.doc_freq is None or res.n_docs is None:
                    raise InvalidInput("tfidf methods need doc_freq and n_docs")
                vec = tfidf_vector(doc, res.vocab, res.doc_freq, res.n_docs)
            if vec.nnz == 0 and method.norm is not NormScheme.NONE:
                reps[doc_id] = None
            else:
                reps[doc_id] = normalize(vec, method.norm)
    return reps


def _cell(method: Method, store, a, b) -> float:
    if method.uses_transport:
        return wmd_distance(a, b, store)
    return vector_distance(a, b, method.metric)


def _row_values(query_id: int, reps: Mapping, ref_ids: Sequence[int],
                method: Method, store) -> np.ndarray:
    out = np.empty(len(ref_ids))
    a = reps[query_id]
    for j, ref_id in enumerate(ref_ids):
        b = reps[ref_id]
        if a is None or b is None:
            out[j] = np.inf
        elif query_id == ref_id:
            out[j] = 0.0
        else:
            out[j] = _cell(method, store, a, b)
    return out


def _init_worker(reps, ref_ids, method, store):
    _STATE["args"] = (reps, ref_ids, method, store)


def _worker_row(args):
    idx, query_id = args
    reps, ref_ids, method, store = _STATE["args"]
    return idx, _row_values(query_id, reps, ref_ids, method, store)


def pairwise_distances(
    queries: Sequence[int],
    refs: Sequence[int],
    method: Method,
    resources: Resources,
) -> DistanceMatrix:
    """Distance matrix between query and reference documents.

    Rows are computed independently (optionally across processes); cells
    between a document and itself are 0 by definition, and documents with
    no usable representation produce +inf sentinel cells.
    """
    store = resources.store if method.uses_transport else None
    if method.uses_transport and store is None:
        raise InvalidInput(f"method {method.label} needs an embedding store")
    all_ids = list(dict.fromkeys(list(queries) + list(refs)))
    reps = _prepare_reps(all_ids, method, resources)
    unusable = tuple(sorted(d for d, r in reps.items() if r is None))

    values = np.empty((len(queries), len(refs)))
    workers = max(1, int(resources.workers))
    if workers == 1 or len(queries) < 2:
        for i, q in enumerate(queries):
            values[i] = _row_values(q, reps, refs, method, store)
    else:
        tasks = list(enumerate(queries))
        with ProcessPoolExecutor(
            max_workers=workers,
            initializer=_init_worker,
            initargs=(reps, tuple(refs), method, store),
        ) as pool:
            for idx, row in pool.map(_worker_row, tasks,
                                     chunksize=max(1, len(tasks) // (4 * workers))):
                values[idx] = row
    return DistanceMatrix(tuple(queries), tuple(refs), values,
                          unusable_ids=unusable)


# -- cache file format ---------------------------------------------------------


def write_distance_matrix(dm: DistanceMatrix, path: str) -> None:
    """Serialize with 17 significant digits so float64 round-trips losslessly."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{dm.n_rows} {dm.n_cols}\n")
        fh.write(" ".join(str(i) for i in dm.row_ids) + "\n")
        fh.write(" ".join(str(j) for j in dm.col_ids) + "\n")
        for row in dm.values:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def read_distance_matrix(path: str) -> DistanceMatrix:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if len(lines) < 3:
        raise ParseError("distance cache too short", line=len(lines))
    try:
        n_rows, n_cols = (int(x) for x in lines[0].split())
    except ValueError:
        raise ParseError("bad size header", line=1) from None
    try:
        row_ids = tuple(int(x) for x in lines[1].split())
        col_ids = tuple(int(x) for x in lines[2].split())
    except ValueError:
        raise ParseError("bad id line", line=2) from None
    if len(row_ids) != n_rows or len(col_ids) != n_cols:
        raise ParseError("id counts do not match header", line=2)
    if len(lines) < 3 + n_rows:
        raise ParseError("missing data rows", line=len(lines))
    values = np.empty((n_rows, n_cols))
    for i in range(n_rows):
        fields = lines[3 + i].split()
        if len(fields) != n_cols:
            raise ParseError(f"expected {n_cols} values", line=4 + i)
        try:
            values[i] = [float(x) for x in fields]
        except ValueError:
            raise ParseError("bad float literal", line=4 + i) from None
    return DistanceMatrix(row_ids, col_ids, values)
