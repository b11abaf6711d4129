"""Command-line entry point: reproducible distance, evaluation, and analysis runs.

Subcommands:
  dists    compute and cache distance matrices per (fold, method)
  eval     tune + evaluate classifiers from the cached distances
  dedup    audit and remove duplicate documents
  analyze  transport histograms, distance scatter, dimension sweep
  project  re-export an embedding file after PCA projection

Configuration comes from an optional ``key = value`` file plus flags;
flags win. Every run writes a manifest recording the resolved
configuration, the seed, and content hashes of the inputs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__, analysis, corpus as corpus_mod, knn_eval, wmd
from .embeddings import (
    TEXT,
    WORD2VEC_BINARY,
    l2_normalize,
    load_embeddings,
    project_pca,
)
from .errors import ParseError, WmdlabError
from .textrep import NormScheme, VectorMetric, bow_vector, build_vocabulary, \
    document_frequencies, normalize, vector_distance
from .wmd import Method, Resources, pairwise_distances, read_distance_matrix, \
    write_distance_matrix

logger = logging.getLogger("wmdlab")

CACHE_ENV = "WMDLAB_CACHE_DIR"
DEFAULT_METHODS = "bow(l1,l1),wmd"
BASE_METHOD = "bow(l1,l1)"


class CliError(WmdlabError):
    pass


@dataclass
class RunConfig:
    dataset: str | None = None
    embeddings: str | None = None
    format: str = TEXT
    methods: str = DEFAULT_METHODS
    norm: str = "l1"
    metric: str = "l1"
    classifier: str = knn_eval.KNN
    clean: bool = False
    keep_oov: bool = False
    stopwords: str | None = None
    dims: str = ""
    seed: int = 0
    workers: int = 0  # 0 -> available parallelism
    out: str = "runs"
    no_compute: bool = False
    folds: int = 1
    train_fraction: float = 0.7
    bin_width: float = 0.02
    pairs: int = 200
    target_dim: int = 5
    renormalize: bool = False
    out_file: str | None = None
    cache_dir: str | None = None

    def method_list(self) -> list[Method]:
        # split on commas outside parentheses: "bow(l1,l1),wmd" is 2 methods
        specs, depth, cur = [], 0, []
        for ch in self.methods:
            if ch == "," and depth == 0:
                specs.append("".join(cur))
                cur = []
                continue
            depth += ch == "("
            depth -= ch == ")"
            cur.append(ch)
        specs.append("".join(cur))
        specs = [s.strip() for s in specs if s.strip()]
        if not specs:
            raise CliError("empty method list")
        return [Method.parse(s, self.norm, self.metric) for s in specs]

    def dim_list(self) -> list[int]:
        if not self.dims:
            return []
        try:
            return [int(d) for d in self.dims.split(",") if d.strip()]
        except ValueError as exc:
            raise CliError(f"bad --dims value: {exc}") from None

    def effective_workers(self) -> int:
        return self.workers if self.workers > 0 else (os.cpu_count() or 1)

    def resolved_cache_dir(self) -> Path:
        env = os.environ.get(CACHE_ENV)
        if env:
            return Path(env)
        if self.cache_dir:
            return Path(self.cache_dir)
        return Path(self.out) / "cache"


_BOOL_KEYS = {"clean", "keep_oov", "no_compute", "renormalize"}
_INT_KEYS = {"seed", "workers", "folds", "pairs", "target_dim"}
_FLOAT_KEYS = {"train_fraction", "bin_width"}


def read_config_file(path: str) -> dict[str, object]:
    """Parse a flat ``key = value`` file (# starts a comment)."""
    values: dict[str, object] = {}
    known = set(RunConfig.__dataclass_fields__)
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip().replace("-", "_")
            value = value.strip().strip('"').strip("'")
            if not sep or not key:
                raise ParseError(f"{path}: expected key = value", line=lineno)
            if key not in known:
                raise ParseError(f"{path}: unknown key {key!r}", line=lineno)
            if key in _BOOL_KEYS:
                if value.lower() not in ("true", "false", "1", "0"):
                    raise ParseError(f"{path}: bad boolean {value!r}",
                                     line=lineno)
                values[key] = value.lower() in ("true", "1")
            elif key in _INT_KEYS:
                values[key] = int(value)
            elif key in _FLOAT_KEYS:
                values[key] = float(value)
            else:
                values[key] = value
    return values


def build_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, overlaid by the config file, overlaid by explicit flags."""
    cfg = RunConfig()
    if getattr(args, "config", None):
        for key, value in read_config_file(args.config).items():
            setattr(cfg, key, value)
    for key in RunConfig.__dataclass_fields__:
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    return cfg


def _sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _config_dict(cfg: RunConfig) -> dict:
    return {k: getattr(cfg, k) for k in sorted(RunConfig.__dataclass_fields__)}


def write_manifest(cfg: RunConfig, out_dir: Path) -> dict:
    manifest = {
        "version": __version__,
        "seed": cfg.seed,
        "config": _config_dict(cfg),
        "inputs": {},
    }
    for name in ("dataset", "embeddings", "stopwords"):
        path = getattr(cfg, name)
        manifest["inputs"][name] = _sha256(path) if path else None
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


# -- pipeline ------------------------------------------------------------------


@dataclass
class Pipeline:
    cfg: RunConfig
    corpus: corpus_mod.Corpus
    store: object
    resources: Resources
    labels: dict[int, str] = field(default_factory=dict)


def build_pipeline(cfg: RunConfig, need_store: bool = True) -> Pipeline:
    if not cfg.dataset:
        raise CliError("--dataset is required")
    store = None
    if cfg.embeddings:
        store = l2_normalize(load_embeddings(cfg.embeddings, cfg.format))
    elif need_store:
        raise CliError("--embeddings is required for this command")

    corp = corpus_mod.load_corpus(cfg.dataset)
    stopwords = (corpus_mod.read_stopwords(cfg.stopwords)
                 if cfg.stopwords else None)
    if store is not None or stopwords is not None:
        corp = corpus_mod.filter_vocabulary(
            corp, store if store is not None else _Everything(),
            stopwords=stopwords, keep_oov=cfg.keep_oov or store is None,
        )
    if cfg.clean:
        corp = corpus_mod.deduplicate(corp, corpus_mod.find_duplicates(corp))
    if not corp.folds:
        corp = corpus_mod.make_folds(corp, cfg.folds, cfg.train_fraction,
                                     cfg.seed)
    docs = corp.tokens_by_id()
    vocab = build_vocabulary(list(docs.values()))
    df = document_frequencies(docs.values(), vocab)
    resources = Resources(tokens=docs, vocab=vocab, store=store,
                          doc_freq=df, n_docs=len(docs),
                          workers=cfg.effective_workers())
    return Pipeline(cfg=cfg, corpus=corp, store=store, resources=resources,
                    labels=corp.labels_by_id())


class _Everything:
    def __contains__(self, token: str) -> bool:
        return True


def _check_methods(cfg: RunConfig, methods: list[Method]) -> None:
    if cfg.keep_oov and any(m.uses_transport for m in methods):
        raise CliError(
            "--keep-oov only applies to bow/tfidf methods: out-of-vocabulary "
            "words have no embedding to transport"
        )


# -- distance caching ----------------------------------------------------------


def _cache_name(dataset: str, fold: int, method: Method, tag: str) -> str:
    safe = method.label.replace("(", "_").replace(")", "").replace(",", "_")
    return f"{dataset}.fold{fold}.{safe}.{tag}.dists"


def _cache_key(cfg: RunConfig, manifest: dict, fold: int, method: Method,
               tag: str) -> str:
    payload = {
        "inputs": manifest["inputs"],
        "fold": fold,
        "method": method.label,
        "tag": tag,
        "seed": cfg.seed,
        "clean": cfg.clean,
        "keep_oov": cfg.keep_oov,
        "folds": cfg.folds,
        "train_fraction": cfg.train_fraction,
    }
    return hashlib.sha256(
        json.dumps(payload, sort_keys=True).encode()
    ).hexdigest()


class DistanceCache:
    """Content-keyed distance matrices on disk, reused across runs."""

    def __init__(self, directory: Path):
        self.directory = directory
        self.index_path = directory / "cache_index.json"
        self.index: dict[str, str] = {}
        if self.index_path.exists():
            try:
                self.index = json.loads(self.index_path.read_text())
            except json.JSONDecodeError:
                logger.warning("unreadable cache index; starting fresh")

    def get(self, name: str, key: str) -> wmd.DistanceMatrix | None:
        path = self.directory / name
        if self.index.get(name) != key or not path.exists():
            return None
        try:
            dm = read_distance_matrix(path)
        except (ParseError, OSError) as exc:
            logger.warning("corrupted cache %s (%s); recomputing", name, exc)
            return None
        logger.info("cache hit: %s", name)
        return dm

    def put(self, name: str, key: str, dm: wmd.DistanceMatrix) -> None:
        self.directory.mkdir(parents=True, exist_ok=True)
        write_distance_matrix(dm, self.directory / name)
        self.index[name] = key
        self.index_path.write_text(
            json.dumps(self.index, indent=2, sort_keys=True) + "\n"
        )


def _fold_matrix(pipe: Pipeline, cache: DistanceCache, manifest: dict,
                 fold_idx: int, method: Method, queries, refs,
                 tag: str = "eval") -> wmd.DistanceMatrix:
    cfg = pipe.cfg
    name = _cache_name(pipe.corpus.name, fold_idx, method, tag)
    key = _cache_key(cfg, manifest, fold_idx, method, tag)
    dm = cache.get(name, key)
    if dm is not None:
        return dm
    if cfg.no_compute:
        raise CliError(f"missing cache {name} and --no-compute is set")
    logger.info("computing %s (%d x %d)", name, len(queries), len(refs))
    dm = pairwise_distances(queries, refs, method, pipe.resources)
    if dm.unusable_ids:
        logger.warning("%s: %d unusable document(s): %s", name,
                       len(dm.unusable_ids), list(dm.unusable_ids)[:10])
    cache.put(name, key, dm)
    return dm


# -- subcommands ---------------------------------------------------------------


def cmd_dists(cfg: RunConfig) -> int:
    methods = cfg.method_list()
    _check_methods(cfg, methods)
    pipe = build_pipeline(cfg, need_store=any(m.uses_transport
                                              for m in methods))
    out_dir = Path(cfg.out)
    manifest = write_manifest(cfg, out_dir)
    cache = DistanceCache(cfg.resolved_cache_dir())
    all_ids = list(pipe.corpus.ids())
    for fold_idx, fold in enumerate(pipe.corpus.folds):
        for method in methods:
            _fold_matrix(pipe, cache, manifest, fold_idx, method,
                         all_ids, list(fold.train_ids))
    return 0


def cmd_eval(cfg: RunConfig) -> int:
    methods = cfg.method_list()
    _check_methods(cfg, methods)
    pipe = build_pipeline(cfg, need_store=any(m.uses_transport
                                              for m in methods))
    out_dir = Path(cfg.out)
    manifest = write_manifest(cfg, out_dir)
    cache = DistanceCache(cfg.resolved_cache_dir())
    all_ids = list(pipe.corpus.ids())
    rows = []
    for fold_idx, fold in enumerate(pipe.corpus.folds):
        split = knn_eval.LabeledSplit(fold.train_ids, fold.test_ids,
                                      pipe.labels)
        split = knn_eval.make_validation_split(split, 0.2,
                                               seed=(cfg.seed, fold_idx))
        for method in methods:
            dm = _fold_matrix(pipe, cache, manifest, fold_idx, method,
                              all_ids, list(fold.train_ids))
            hp = knn_eval.tune(dm, split, cfg.classifier)
            result = knn_eval.evaluate(dm, split, cfg.classifier, hp)
            logger.info("%s fold %d %s: error %.2f%% (k=%d gamma=%s)",
                        pipe.corpus.name, fold_idx, method.label,
                        result.error_percent, hp.k, hp.gamma)
            rows.append({
                "dataset": pipe.corpus.name,
                "method": method.label,
                "norm": method.norm.value if method.norm else "",
                "metric": method.metric.value if method.metric else "",
                "classifier": cfg.classifier,
                "k": hp.k,
                "gamma": "" if hp.gamma is None else f"{hp.gamma:.3f}",
                "fold": fold_idx,
                "error_percent": f"{result.error_percent:.4f}",
                "excluded_docs": result.n_excluded,
            })
    knn_eval.write_report_csv(rows, str(out_dir / "report.csv"))
    base = BASE_METHOD if any(r["method"] == BASE_METHOD for r in rows) else None
    summary = knn_eval.summarize(rows, base_method=base)
    knn_eval.write_summary_json(summary, str(out_dir / "summary.json"))
    logger.info("wrote %s and %s", out_dir / "report.csv",
                out_dir / "summary.json")
    return 0


def cmd_dedup(cfg: RunConfig) -> int:
    if not cfg.dataset:
        raise CliError("--dataset is required")
    out_dir = Path(cfg.out)
    write_manifest(cfg, out_dir)
    corp = corpus_mod.load_corpus(cfg.dataset)
    if cfg.embeddings:
        store = l2_normalize(load_embeddings(cfg.embeddings, cfg.format))
        stop = (corpus_mod.read_stopwords(cfg.stopwords)
                if cfg.stopwords else None)
        corp = corpus_mod.filter_vocabulary(corp, store, stopwords=stop,
                                            keep_oov=cfg.keep_oov)
    report = corpus_mod.find_duplicates(corp)
    payload = {
        "dataset": corp.name,
        "n_documents": len(corp.documents),
        "n_pairs": report.n_pairs,
        "n_samples": report.n_samples,
        "pairs": [list(p) for p in report.pairs],
        "samples": list(report.samples),
        "cross_split": [list(p) for p in report.cross_split],
        "conflicting": [list(p) for p in report.conflicting],
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / f"{corp.name}.duplicates.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    clean = corpus_mod.deduplicate(corp, report)
    clean_path = out_dir / f"{corp.name}.clean.txt"
    corpus_mod.write_corpus(clean, clean_path)
    logger.info("%d duplicate pairs, %d samples; wrote %s and %s",
                report.n_pairs, report.n_samples, report_path, clean_path)
    return 0


def cmd_analyze(cfg: RunConfig) -> int:
    pipe = build_pipeline(cfg, need_store=True)
    out_dir = Path(cfg.out)
    manifest = write_manifest(cfg, out_dir)
    cache = DistanceCache(cfg.resolved_cache_dir())
    out_dir.mkdir(parents=True, exist_ok=True)
    corp = pipe.corpus

    wmd_method = Method.parse("wmd")
    if corp.split_type == corpus_mod.ONE_FOLD:
        queries = list(corp.folds[0].train_ids)
        refs = list(corp.folds[0].test_ids)
        mode = analysis.CROSS_SPLIT
    else:
        queries = list(corp.ids())
        refs = list(corp.ids())
        mode = analysis.LEAVE_ONE_OUT
    dm = _fold_matrix(pipe, cache, manifest, 0, wmd_method, queries, refs,
                      tag="nn")
    usable_rows = [r for r in dm.row_ids if r not in dm.unusable_ids]
    dm_usable = dm.submatrix(
        usable_rows, [c for c in dm.col_ids if c not in dm.unusable_ids]
    )
    nn_pairs = analysis.nearest_neighbor_pairs(dm_usable, mode)

    measures = {}
    for doc_id, tokens in pipe.resources.tokens.items():
        if tokens:
            measures[doc_id] = wmd.make_measure(tokens, wmd.UNIFORM_COUNT,
                                                pipe.resources.vocab)
    hist = analysis.transport_histogram(nn_pairs, measures, pipe.store,
                                        cfg.bin_width)
    analysis.write_histogram_csv(hist, str(out_dir / "transport_histogram.csv"))

    sampled = analysis.sample_document_pairs(sorted(measures), cfg.pairs,
                                             cfg.seed)
    bows = {i: normalize(bow_vector(pipe.resources.tokens[i],
                                    pipe.resources.vocab)[0], NormScheme.L1)
            for i in measures}
    points = []
    for a, b in sampled:
        bow_d = vector_distance(bows[a], bows[b], VectorMetric.L1)
        wmd_d = wmd.wmd_distance(measures[a], measures[b], pipe.store)
        points.append((bow_d, wmd_d))
    analysis.write_scatter_csv(points, str(out_dir / "scatter.csv"))
    r = analysis.pearson([p[0] for p in points], [p[1] for p in points])
    with open(out_dir / "scatter_pearson.json", "w", encoding="utf-8") as fh:
        json.dump({"pearson": r, "n_pairs": len(points)}, fh, indent=2)
        fh.write("\n")

    dims = cfg.dim_list()
    if dims:
        table = analysis.dim_comparison(corp, pipe.store, dims, cfg.pairs,
                                        cfg.seed)
        with open(out_dir / "dim_comparison.csv", "w", encoding="utf-8") as fh:
            fh.write("dim,pearson\n")
            for d in dims:
                fh.write(f"{d},{table[d]:.17g}\n")
    logger.info("analysis outputs written to %s", out_dir)
    return 0


def cmd_project(cfg: RunConfig) -> int:
    if not cfg.embeddings:
        raise CliError("--embeddings is required")
    if not cfg.out_file:
        raise CliError("--out-file is required")
    store = l2_normalize(load_embeddings(cfg.embeddings, cfg.format))
    if cfg.dataset:
        corp = corpus_mod.load_corpus(cfg.dataset)
        corp = corpus_mod.filter_vocabulary(corp, store)
        fit_vocab = build_vocabulary(
            [d.tokens for d in corp.documents]
        ).words
    else:
        fit_vocab = store.tokens
    projected = project_pca(store, cfg.target_dim, fit_vocab)
    if cfg.renormalize:
        projected = l2_normalize(projected)
    out_path = Path(cfg.out_file)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(projected)} {projected.dim}\n")
        for token, row in zip(projected.tokens, projected.matrix):
            fh.write(token + " " + " ".join(f"{v:.17g}" for v in row) + "\n")
    logger.info("wrote %s (%d tokens, dim %d)", out_path, len(projected),
                projected.dim)
    return 0


# -- argument parsing ----------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--dataset", help="corpus file (label TAB tokens per line)")
    p.add_argument("--embeddings", help="embedding file")
    p.add_argument("--format", choices=[TEXT, WORD2VEC_BINARY],
                   help="embedding file format")
    p.add_argument("--method", dest="methods",
                   help=f"comma list, e.g. {DEFAULT_METHODS!r}")
    p.add_argument("--norm", choices=["none", "l1", "l2"],
                   help="default normalization for bare bow/tfidf methods")
    p.add_argument("--metric", choices=["l1", "l2"],
                   help="default metric for bare bow/tfidf methods")
    p.add_argument("--classifier", choices=[knn_eval.KNN, knn_eval.WKNN])
    p.add_argument("--clean", action="store_const", const=True,
                   help="remove duplicate documents before evaluating")
    p.add_argument("--keep-oov", dest="keep_oov", action="store_const",
                   const=True, help="keep words missing from the embeddings")
    p.add_argument("--stopwords", help="stopword file, one token per line")
    p.add_argument("--dims", help="comma list of projection dimensions")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--no-compute", dest="no_compute", action="store_const",
                   const=True, help="fail instead of computing missing caches")
    p.add_argument("--folds", type=int,
                   help="random folds to generate when the corpus has none")
    p.add_argument("--train-fraction", dest="train_fraction", type=float)
    p.add_argument("--bin-width", dest="bin_width", type=float)
    p.add_argument("--pairs", type=int, help="sampled pairs for scatter/dims")
    p.add_argument("--cache-dir", dest="cache_dir",
                   help=f"cache directory (or ${CACHE_ENV})")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wmdlab",
        description="Document distances, nearest-neighbor evaluation, and "
                    "transport analyses.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in [
        ("dists", "compute and cache distance matrices"),
        ("eval", "tune and evaluate classifiers"),
        ("dedup", "report and remove duplicate documents"),
        ("analyze", "histograms, scatter, and dimension sweep"),
        ("project", "PCA-project an embedding file"),
    ]:
        p = sub.add_parser(name, help=helptext)
        _add_common(p)
        if name == "project":
            p.add_argument("--target-dim", dest="target_dim", type=int)
            p.add_argument("--out-file", dest="out_file",
                           help="path of the projected embedding file")
            p.add_argument("--renormalize", action="store_const", const=True,
                           help="re-apply unit L2 norm after projection")
    return parser


_COMMANDS = {
    "dists": cmd_dists,
    "eval": cmd_eval,
    "dedup": cmd_dedup,
    "analyze": cmd_analyze,
    "project": cmd_project,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    args = make_parser().parse_args(argv)
    try:
        cfg = build_config(args)
        return _COMMANDS[args.command](cfg)
    except WmdlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
