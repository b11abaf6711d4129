"""Nearest-neighbor classification from distance matrices, tuning, and scoring."""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    DivisionByZero,
    EmptyValidation,
    InvalidInput,
    NotEnoughNeighbors,
)
from .wmd import DistanceMatrix

KNN = "knn"
WKNN = "wknn"
WKNN_FIXED_K = 19


@dataclass(frozen=True)
class LabeledSplit:
    """Train/test document ids with labels and an optional validation subset."""

    train_ids: tuple[int, ...]
    test_ids: tuple[int, ...]
    labels: Mapping[int, str]
    validation_ids: tuple[int, ...] = ()

    def __post_init__(self):
        train = set(self.train_ids)
        test = set(self.test_ids)
        if train & test:
            raise InvalidInput("train and test ids overlap")
        if not set(self.validation_ids) <= train:
            raise InvalidInput("validation ids must be a subset of train ids")
        for i in self.train_ids + self.test_ids:
            if not self.labels.get(i):
                raise InvalidInput(f"document {i} has no label")


@dataclass(frozen=True)
class TuningGrid:
    """Hyperparameter candidates: neighborhood sizes and vote temperatures."""

    k_candidates: tuple[int, ...] = tuple(range(1, 20))
    gamma_candidates: tuple[float, ...] = tuple(
        0.005 * i for i in range(1, 21)
    )


@dataclass(frozen=True)
class Hyperparams:
    k: int
    gamma: float | None = None


@dataclass(frozen=True)
class EvalResult:
    error_percent: float
    n_used: int
    n_excluded: int
    predictions: Mapping[int, str]


def _nearest(dist_row: np.ndarray, k: int,
             train_ids: np.ndarray) -> np.ndarray:
    """Positions of the k smallest finite distances; ties go to lower ids."""
    dist_row = np.asarray(dist_row, dtype=np.float64)
    order = np.lexsort((train_ids, dist_row))
    finite = order[np.isfinite(dist_row[order])]
    if finite.size == 0:
        raise NotEnoughNeighbors("no finite-distance training sample")
    if finite.size < k:
        warnings.warn(
            f"only {finite.size} finite neighbors available, clamping k={k}",
            stacklevel=3,
        )
        k = finite.size
    return finite[:k]


def _vote(picked: np.ndarray, dist_row: np.ndarray,
          train_labels: Sequence[str], weights: np.ndarray) -> str:
    """Weighted majority with deterministic tie-breaks.

    Vote ties are resolved by the smaller summed distance among the tied
    labels, then by the lexicographically smallest label.
    """
    votes: dict[str, float] = {}
    dist_sum: dict[str, float] = {}
    for pos, w in zip(picked.tolist(), weights.tolist()):
        lab = train_labels[pos]
        votes[lab] = votes.get(lab, 0.0) + w
        dist_sum[lab] = dist_sum.get(lab, 0.0) + float(dist_row[pos])
    return min(votes, key=lambda lab: (-votes[lab], dist_sum[lab], lab))


def knn_predict(dist_row: np.ndarray, train_labels: Sequence[str], k: int,
                train_ids: Sequence[int] | None = None) -> str:
    """Majority label of the k nearest training samples."""
    if k < 1:
        raise InvalidInput(f"k must be >= 1, got {k}")
    ids = (np.arange(len(train_labels)) if train_ids is None
           else np.asarray(train_ids))
    picked = _nearest(dist_row, k, ids)
    return _vote(picked, np.asarray(dist_row, dtype=np.float64), train_labels,
                 np.ones(picked.size))


def wknn_predict(dist_row: np.ndarray, train_labels: Sequence[str], k: int,
                 gamma: float,
                 train_ids: Sequence[int] | None = None) -> str:
    """Label with the largest exp(-d/gamma)-weighted vote among the k nearest.

    Weights are computed relative to the nearest distance, which multiplies
    every vote by the same positive constant (the argmax is unchanged) and
    keeps tiny gamma values from underflowing all weights to zero.
    """
    if k < 1:
        raise InvalidInput(f"k must be >= 1, got {k}")
    if not gamma > 0:
        raise InvalidInput(f"gamma must be > 0, got {gamma}")
    ids = (np.arange(len(train_labels)) if train_ids is None
           else np.asarray(train_ids))
    dist_row = np.asarray(dist_row, dtype=np.float64)
    picked = _nearest(dist_row, k, ids)
    d = dist_row[picked]
    weights = np.exp(-(d - d.min()) / gamma)
    return _vote(picked, dist_row, train_labels, weights)


def _predict(classifier: str, row: np.ndarray, labels: Sequence[str],
             ids: np.ndarray, hp: Hyperparams) -> str:
    if classifier == KNN:
        return knn_predict(row, labels, hp.k, train_ids=ids)
    if classifier == WKNN:
        if hp.gamma is None:
            raise InvalidInput("wknn needs a gamma")
        return wknn_predict(row, labels, hp.k, hp.gamma, train_ids=ids)
    raise InvalidInput(f"unknown classifier {classifier!r}")


def _error_rate(sub: DistanceMatrix, labels: Mapping[int, str],
                classifier: str, hp: Hyperparams) -> tuple[float, int, int,
                                                           dict[int, str]]:
    col_labels = [labels[c] for c in sub.col_ids]
    col_ids = np.asarray(sub.col_ids)
    wrong = used = excluded = 0
    preds: dict[int, str] = {}
    for i, rid in enumerate(sub.row_ids):
        try:
            p = _predict(classifier, sub.values[i], col_labels, col_ids, hp)
        except NotEnoughNeighbors:
            excluded += 1
            continue
        preds[rid] = p
        used += 1
        if p != labels[rid]:
            wrong += 1
    rate = wrong / used if used else math.nan
    return rate, used, excluded, preds


def make_validation_split(split: LabeledSplit, fraction: float = 0.2,
                          seed: int | Sequence[int] = 0) -> LabeledSplit:
    """Carve a seeded uniform validation subset out of the training ids."""
    if not 0 < fraction < 1:
        raise InvalidInput(f"fraction must be in (0, 1), got {fraction}")
    n = len(split.train_ids)
    if n < 2:
        raise EmptyValidation("need at least 2 training documents")
    n_val = min(max(1, round(n * fraction)), n - 1)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    val = tuple(sorted(split.train_ids[i] for i in perm[:n_val]))
    return LabeledSplit(split.train_ids, split.test_ids, split.labels, val)


def tune(dist: DistanceMatrix, split: LabeledSplit, classifier: str,
         grid: TuningGrid | None = None) -> Hyperparams:
    """Pick the hyperparameter with the lowest validation error.

    kNN tunes the neighborhood size; wkNN keeps k fixed at WKNN_FIXED_K and
    tunes gamma. Ties go to the earlier (smaller) candidate.
    """
    grid = grid or TuningGrid()
    val = split.validation_ids
    if not val:
        raise EmptyValidation("split has no validation ids")
    val_set = set(val)
    ref = tuple(t for t in split.train_ids if t not in val_set)
    if not ref:
        raise EmptyValidation("no training ids left outside validation")
    sub = dist.submatrix(val, ref)

    if classifier == KNN:
        candidates = [Hyperparams(k=k) for k in grid.k_candidates]
    elif classifier == WKNN:
        candidates = [Hyperparams(k=WKNN_FIXED_K, gamma=g)
                      for g in grid.gamma_candidates]
    else:
        raise InvalidInput(f"unknown classifier {classifier!r}")

    best: Hyperparams | None = None
    best_err = math.inf
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # clamp warnings on tiny fixtures
        for hp in candidates:
            err, used, _, _ = _error_rate(sub, split.labels, classifier, hp)
            if used and err < best_err:
                best_err = err
                best = hp
    if best is None:
        raise EmptyValidation("no usable validation document")
    return best


def evaluate(dist: DistanceMatrix, split: LabeledSplit, classifier: str,
             hyperparams: Hyperparams) -> EvalResult:
    """Test error in percent; unusable test documents are excluded and counted."""
    sub = dist.submatrix(split.test_ids, split.train_ids)
    rate, used, excluded, preds = _error_rate(sub, split.labels, classifier,
                                              hyperparams)
    pct = 100.0 * rate if used else math.nan
    return EvalResult(error_percent=pct, n_used=used, n_excluded=excluded,
                      predictions=preds)


def relative_performance(
    errors: Mapping[str, Mapping[str, float]], base: str
) -> dict[str, float]:
    """Mean over datasets of each method's error divided by the base method's."""
    if base not in errors:
        raise InvalidInput(f"base method {base!r} not in errors")
    base_errors = errors[base]
    out: dict[str, float] = {}
    for method, per_dataset in errors.items():
        shared = sorted(set(per_dataset) & set(base_errors))
        if not shared:
            raise InvalidInput(f"no shared datasets between {method!r} and base")
        zero = [ds for ds in shared if base_errors[ds] == 0]
        if zero:
            raise DivisionByZero(
                f"base error is zero on dataset(s): {', '.join(zero)}"
            )
        out[method] = math.fsum(
            per_dataset[ds] / base_errors[ds] for ds in shared
        ) / len(shared)
    return out


# -- report files --------------------------------------------------------------

REPORT_COLUMNS = ["dataset", "method", "norm", "metric", "classifier",
                  "k", "gamma", "fold", "error_percent", "excluded_docs"]


def write_report_csv(rows: Sequence[Mapping[str, object]], path: str) -> None:
    """One CSV row per (method, fold) evaluation."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({c: row.get(c, "") for c in REPORT_COLUMNS})


def summarize(rows: Sequence[Mapping[str, object]],
              base_method: str | None = None) -> dict:
    """Per-(dataset, method) mean/std over folds plus relative scores."""
    grouped: dict[tuple[str, str], list[float]] = {}
    for row in rows:
        key = (str(row["dataset"]), str(row["method"]))
        grouped.setdefault(key, []).append(float(row["error_percent"]))
    summary: dict = {"methods": {}}
    means: dict[str, dict[str, float]] = {}
    for (dataset, method), errs in sorted(grouped.items()):
        mean = math.fsum(errs) / len(errs)
        std = float(np.std(errs, ddof=1)) if len(errs) > 1 else None
        summary["methods"].setdefault(method, {})[dataset] = {
            "mean_error_percent": mean,
            "std_error_percent": std,
            "folds": len(errs),
        }
        means.setdefault(method, {})[dataset] = mean
    if base_method and base_method in means:
        try:
            summary["relative_to_base"] = relative_performance(means,
                                                               base_method)
            summary["base_method"] = base_method
        except DivisionByZero as exc:
            summary["relative_to_base"] = None
            summary["relative_error"] = str(exc)
    return summary


def write_summary_json(summary: Mapping, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
