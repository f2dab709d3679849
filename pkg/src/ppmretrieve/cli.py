"""Command-line interface: fit an index, query it, evaluate it, generate
synthetic corpora, and run the small-n exact search.

Exit codes: 0 on success, 2 on usage errors (argparse), 1 on data errors.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from . import io as pio
from .errors import DataError
from .evaluation import (
    PRCurve,
    SyntheticCorpusConfig,
    average_precision,
    combine_ground_truth,
    generate_synthetic_corpus,
    mean_average_precision,
    pr_curve,
    top1_match_eval,
)
from .retrieval import (
    combined_rank,
    de_correlation_rank,
    likelihood_rank,
    model_distance_rank,
)
from .search import (
    BRUTE_FORCE_MAX_N,
    SearchConfig,
    brute_force_map,
    candidate_sweep,
    greedy_map_search,
    kmeans,
    midpoint_k,
    restricted_map_search,
)
from .types import (
    ExpressionMatrix,
    FitMetadata,
    GroundTruth,
    Hyperparameters,
    ModelIndex,
    ModelIndexEntry,
    relevance_matrix,
)

METHODS = ("greedy", "restricted", "kmeans-fixed")
SCHEMES = ("nid", "likelihood", "de", "combined")


def _load_toml(path: Optional[str]) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise DataError(f"config file does not exist: {p}")
    try:
        return tomllib.loads(p.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise DataError(f"{p}: invalid TOML ({exc})")


def _hyperparameters(config: dict, eta0: Optional[float]) -> Hyperparameters:
    section = config.get("hyperparameters", {})
    fields = {k: float(v) for k, v in section.items()}
    if eta0 is not None:
        fields["eta0"] = eta0
    return Hyperparameters(**fields)


def _search_config(config: dict, seed: Optional[int]) -> SearchConfig:
    section = dict(config.get("search", {}))
    if "operator_probs" in section:
        section["operator_probs"] = tuple(float(v) for v in section["operator_probs"])
    if seed is not None:
        section["seed"] = seed
    return SearchConfig(**section)


def _fit_one(
    d: ExpressionMatrix, h: Hyperparameters, method: str, cfg: SearchConfig
) -> ModelIndexEntry:
    if method == "greedy":
        clustering, score = greedy_map_search(d, h, cfg)
    elif method == "restricted":
        candidates = candidate_sweep(d, seed=cfg.seed)
        clustering, score = restricted_map_search(d, candidates, h)
    elif method == "kmeans-fixed":
        candidate = kmeans(d, midpoint_k(d.n_genes), seed=cfg.seed)
        clustering, score = restricted_map_search(d, [candidate], h)
    else:
        raise DataError(f"unknown method {method!r}")
    return ModelIndexEntry(
        experiment_id=d.experiment_id,
        gene_ids=d.gene_ids,
        clustering=clustering,
        fit=FitMetadata(method=method, log_score=score, seed=cfg.seed),
    )


def _load_corpus(manifest: pio.CorpusManifest) -> list[ExpressionMatrix]:
    return [pio.load_matrix(e.matrix, e.experiment_id) for e in manifest.entries]


def _prepare_corpus(
    manifest: pio.CorpusManifest, top_k: Optional[int]
) -> tuple[list[ExpressionMatrix], list[str]]:
    """Load, select genes, align, and normalize every experiment."""
    corpus = _load_corpus(manifest)
    scores = {
        e.experiment_id: pio.load_scores(e.scores)
        for e in manifest.entries
        if e.scores is not None
    }
    genes = pio.select_genes(corpus, scores or None, top_k)
    prepared = [pio.zscore_normalize(pio.align(d, genes)) for d in corpus]
    return prepared, genes


def cmd_fit(args: argparse.Namespace) -> int:
    config = _load_toml(args.config)
    h = _hyperparameters(config, args.eta0)
    cfg = _search_config(config, args.seed)
    manifest = pio.load_manifest(args.manifest)
    top_k = args.top_k if args.top_k and args.top_k > 0 else None
    prepared, genes = _prepare_corpus(manifest, top_k)
    entries = []
    for d in prepared:
        entries.append(_fit_one(d, h, args.method, cfg))
        print(
            f"fit {d.experiment_id}: k={entries[-1].clustering.k} "
            f"log_score={entries[-1].fit.log_score:.4f}",
            file=sys.stderr,
        )
    pio.save_index(ModelIndex(entries), args.out)
    print(f"wrote {len(entries)} entries ({len(genes)} genes) to {args.out}", file=sys.stderr)
    return 0


def _write_ranking_csv(path: str, result) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "experiment_id", "score"])
        for rank, (eid, score) in enumerate(result.entries, start=1):
            writer.writerow([rank, eid, repr(score)])


def cmd_query(args: argparse.Namespace) -> int:
    config = _load_toml(args.config)
    h = _hyperparameters(config, args.eta0)
    cfg = _search_config(config, args.seed)
    index = pio.load_index(args.index)
    if len(index) == 0:
        raise DataError(f"index {args.index} is empty")
    gene_list = list(index.entries[0].gene_ids)

    if args.scheme == "de":
        if not args.manifest:
            raise DataError("--scheme de requires --manifest for the stored profiles")
        manifest = pio.load_manifest(args.manifest)
        profiles = [
            pio.load_de_profile(e.de_profile, e.experiment_id)
            for e in manifest.entries
            if e.de_profile is not None
        ]
        if not profiles:
            raise DataError("manifest lists no DE profiles")
        query_profile = pio.load_de_profile(args.data)
        result = de_correlation_rank(query_profile, profiles)
    else:
        data = pio.zscore_normalize(pio.align(pio.load_matrix(args.data), gene_list))
        if args.scheme == "likelihood":
            result = likelihood_rank(data, index, h)
        else:
            entry = _fit_one(data, h, args.method, cfg)
            distances = model_distance_rank(entry.clustering, index, data.gene_ids)
            if args.scheme == "nid":
                result = distances
            else:  # combined
                if not args.manifest or not args.keywords:
                    raise DataError(
                        "--scheme combined requires --manifest and --keywords TYPE=VALUE"
                    )
                label_type, _, wanted = args.keywords.partition("=")
                if not wanted:
                    raise DataError("--keywords must look like TYPE=VALUE")
                files = dict(pio.load_manifest(args.manifest).label_files)
                if label_type not in files:
                    raise DataError(f"label type {label_type!r} not in manifest")
                labels = pio.load_labels(files[label_type])
                mask = {eid: labels.get(eid) == wanted for eid in index.ids()}
                result = combined_rank(mask, distances)

    _write_ranking_csv(args.out, result)
    print(f"wrote {len(result.entries)} ranked experiments to {args.out}", file=sys.stderr)
    return 0


def _write_pr_csv(path: Path, curve: PRCurve) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cutoff", "recall", "precision"])
        for cutoff, (rec, prec) in enumerate(curve.points, start=1):
            writer.writerow([cutoff, repr(rec), repr(prec)])


def write_pr_svg(curves: dict[str, PRCurve], path: Path, title: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4.5))
    for name, curve in curves.items():
        if not curve.points:
            continue
        rec = [pt[0] for pt in curve.points]
        prec = [pt[1] for pt in curve.points]
        ax.plot(rec, prec, marker=".", markersize=3, label=name)
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_title(title)
    ax.set_xlim(0, 1.02)
    ax.set_ylim(0, 1.02)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def cmd_eval(args: argparse.Namespace) -> int:
    config = _load_toml(args.config)
    h = _hyperparameters(config, args.eta0)
    index = pio.load_index(args.index)
    manifest = pio.load_manifest(args.manifest)
    ids = index.ids()
    if set(ids) != {e.experiment_id for e in manifest.entries}:
        raise DataError("index and manifest cover different experiments")

    label_types = [t.strip() for t in args.labels.split(",") if t.strip()]
    files = dict(manifest.label_files)
    matrices = []
    for lt in label_types:
        if lt not in files:
            raise DataError(f"label type {lt!r} not in manifest")
        table = pio.load_labels(files[lt])
        gt = GroundTruth(label_type=lt, labels={eid: table.get(eid) for eid in ids})
        matrices.append(relevance_matrix(gt, ids))
    t = args.t if args.t is not None else 1
    relevance = combine_ground_truth(matrices, t, mode=args.mode)

    schemes = [s.strip() for s in args.schemes.split(",") if s.strip()]
    for s in schemes:
        if s not in ("nid", "likelihood", "de"):
            raise DataError(f"eval supports schemes nid, likelihood, de; got {s!r}")

    gene_list = list(index.entries[0].gene_ids)
    prepared = {}
    if "likelihood" in schemes:
        for entry in manifest.entries:
            d = pio.load_matrix(entry.matrix, entry.experiment_id)
            prepared[entry.experiment_id] = pio.zscore_normalize(pio.align(d, gene_list))
    profiles = {}
    if "de" in schemes:
        for entry in manifest.entries:
            if entry.de_profile is None:
                raise DataError(f"{entry.experiment_id}: no DE profile in manifest")
            profiles[entry.experiment_id] = pio.load_de_profile(
                entry.de_profile, entry.experiment_id
            )

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    curves: dict[str, PRCurve] = {}
    summary_rows = []
    rel_sets = {
        q: {ids[j] for j in np.flatnonzero(relevance[i])} for i, q in enumerate(ids)
    }
    for scheme in schemes:
        rankings = {}
        for q in ids:
            rest = index.without(q)
            if scheme == "nid":
                rankings[q] = model_distance_rank(index.get(q).clustering, rest)
            elif scheme == "likelihood":
                rankings[q] = likelihood_rank(prepared[q], rest, h)
            else:
                others = [profiles[e] for e in ids if e != q]
                rankings[q] = de_correlation_rank(profiles[q], others)
        curve = pr_curve(rankings, relevance, ids)
        curves[scheme] = curve
        _write_pr_csv(out_dir / f"pr_{scheme}.csv", curve)
        aps = {}
        for q in ids:
            if rel_sets[q]:
                aps[q] = average_precision(rankings[q], rel_sets[q])
        with open(out_dir / f"ap_{scheme}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["query_id", "average_precision"])
            for q, ap in aps.items():
                writer.writerow([q, repr(ap)])
        map_value = mean_average_precision(aps.values()) if aps else float("nan")
        top1 = top1_match_eval(rankings, relevance, ids)
        summary_rows.append(
            [scheme, repr(map_value), repr(top1), curve.query_count, len(curve.skipped_queries)]
        )
        print(
            f"{scheme}: mAP={map_value:.4f} top1={top1:.4f} "
            f"queries={curve.query_count} skipped={len(curve.skipped_queries)}",
            file=sys.stderr,
        )
    with open(out_dir / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scheme", "map", "top1_fraction", "queries_used", "queries_skipped"])
        writer.writerows(summary_rows)
    label_desc = "+".join(label_types) + f" (t={t}, {args.mode})"
    write_pr_svg(curves, out_dir / "pr_curves.svg", f"leave-one-out retrieval vs {label_desc}")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    raw = _load_toml(args.config)
    if "base_clusters" in raw and raw["base_clusters"] is not None:
        raw["base_clusters"] = int(raw["base_clusters"])
    cfg = SyntheticCorpusConfig(**raw)
    matrices, gt = generate_synthetic_corpus(cfg)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    experiments = []
    for d in matrices:
        fname = f"{d.experiment_id}.tsv"
        pio.save_matrix(d, out_dir / fname)
        experiments.append({"id": d.experiment_id, "matrix": fname})
    labels_file = f"labels_{gt.label_type}.tsv"
    pio.save_labels({k: v for k, v in gt.labels.items() if v is not None}, out_dir / labels_file)
    pio.save_manifest(
        out_dir / "manifest.json",
        experiments,
        labels=[{"type": gt.label_type, "path": labels_file}],
    )
    print(
        f"wrote {len(matrices)} experiments and manifest.json to {out_dir}",
        file=sys.stderr,
    )
    return 0


def cmd_oracle(args: argparse.Namespace) -> int:
    d = pio.load_matrix(args.data)
    if args.n is not None:
        if not 1 <= args.n <= d.n_genes:
            raise DataError(f"--n must be in [1, {d.n_genes}]")
        d = ExpressionMatrix(
            experiment_id=d.experiment_id,
            gene_ids=d.gene_ids[: args.n],
            sample_ids=d.sample_ids,
            values=d.values[: args.n],
        )
    if d.n_genes > BRUTE_FORCE_MAX_N:
        raise DataError(
            f"brute-force search is limited to n <= {BRUTE_FORCE_MAX_N}; "
            f"got n = {d.n_genes} (use --n to subset)"
        )
    h = Hyperparameters(eta0=args.eta0 if args.eta0 is not None else 1.0)
    clustering, score = brute_force_map(d, h)
    print(f"n={d.n_genes} k={clustering.k} log_score={score!r}")
    for c, block in enumerate(clustering.blocks(), start=1):
        genes = ", ".join(d.gene_ids[i] for i in block)
        print(f"cluster {c}: {genes}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ppmretrieve",
        description=(
            "Characterize expression experiments by a clustering of their genes "
            "and retrieve related experiments by clustering distance."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit a clustering per experiment and write an index")
    p_fit.add_argument("--manifest", required=True)
    p_fit.add_argument("--out", required=True)
    p_fit.add_argument("--method", choices=METHODS, default="greedy")
    p_fit.add_argument("--seed", type=int, default=None)
    p_fit.add_argument("--top-k", type=int, default=0, help="top genes per experiment (0 = all)")
    p_fit.add_argument("--eta0", type=float, default=None)
    p_fit.add_argument("--config", default=None, help="TOML with [hyperparameters] and [search]")
    p_fit.set_defaults(func=cmd_fit)

    p_query = sub.add_parser("query", help="rank stored experiments against a query")
    p_query.add_argument("--index", required=True)
    p_query.add_argument("--data", required=True, help="matrix file; DE profile for --scheme de")
    p_query.add_argument("--scheme", choices=SCHEMES, default="nid")
    p_query.add_argument("--keywords", default=None, help="TYPE=VALUE filter for --scheme combined")
    p_query.add_argument("--manifest", default=None)
    p_query.add_argument("--method", choices=METHODS, default="greedy")
    p_query.add_argument("--seed", type=int, default=None)
    p_query.add_argument("--eta0", type=float, default=None)
    p_query.add_argument("--config", default=None)
    p_query.add_argument("--out", required=True)
    p_query.set_defaults(func=cmd_query)

    p_eval = sub.add_parser("eval", help="leave-one-out retrieval evaluation")
    p_eval.add_argument("--index", required=True)
    p_eval.add_argument("--manifest", required=True)
    p_eval.add_argument("--labels", required=True, help="label type, or comma-separated types")
    p_eval.add_argument("--t", type=int, default=None, help="matches required (default 1)")
    p_eval.add_argument("--mode", choices=("at_least", "exact"), default="at_least")
    p_eval.add_argument("--schemes", default="nid,likelihood")
    p_eval.add_argument("--eta0", type=float, default=None)
    p_eval.add_argument("--config", default=None)
    p_eval.add_argument("--out-dir", required=True)
    p_eval.set_defaults(func=cmd_eval)

    p_synth = sub.add_parser("synth", help="generate a synthetic corpus with a manifest")
    p_synth.add_argument("--config", required=True, help="TOML with corpus fields")
    p_synth.add_argument("--out-dir", required=True)
    p_synth.set_defaults(func=cmd_synth)

    p_oracle = sub.add_parser("oracle", help=f"exact search for n <= {BRUTE_FORCE_MAX_N}")
    p_oracle.add_argument("--data", required=True)
    p_oracle.add_argument("--n", type=int, default=None, help="use only the first N rows")
    p_oracle.add_argument("--eta0", type=float, default=None)
    p_oracle.set_defaults(func=cmd_oracle)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
