"""Leave-one-out retrieval evaluation: precision-recall curves, average
precision, ground-truth combination, top-1 agreement, and a synthetic corpus
generator for desk-scale experiments."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Collection, Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import DataError
from .retrieval import RankedResult
from .types import ExpressionMatrix, GroundTruth


@dataclass(frozen=True)
class PRCurve:
    """Averaged precision/recall per rank cutoff, over queries with any relevant item."""

    points: tuple[tuple[float, float], ...]  # (recall, precision) per cutoff 1..M-1
    query_count: int
    skipped_queries: tuple[str, ...] = ()


def _relevant_sets(
    rankings: Mapping[str, RankedResult],
    relevance: np.ndarray,
    ids: Sequence[str],
) -> dict[str, set[str]]:
    m = len(ids)
    relevance = np.asarray(relevance)
    if relevance.shape != (m, m):
        raise DataError(f"relevance matrix shape {relevance.shape} does not match {m} ids")
    by_id = {}
    for qi, q in enumerate(ids):
        if q not in rankings:
            raise DataError(f"no ranking supplied for query {q!r}")
        if q in rankings[q].ids():
            raise DataError(f"ranking for query {q!r} contains the query itself")
        by_id[q] = {ids[j] for j in np.flatnonzero(relevance[qi])}
    return by_id


def pr_curve(
    rankings: Mapping[str, RankedResult],
    relevance: np.ndarray,
    ids: Sequence[str],
) -> PRCurve:
    """Average precision/recall over all rank cutoffs, one ranking per query.

    Queries without a single relevant experiment carry no recall signal;
    they are skipped and reported rather than averaged in.
    """
    relevant = _relevant_sets(rankings, relevance, ids)
    used = [q for q in ids if relevant[q]]
    skipped = tuple(q for q in ids if not relevant[q])
    m = len(ids)
    if not used or m < 2:
        return PRCurve(points=(), query_count=0, skipped_queries=skipped)

    cutoffs = range(1, m)
    hits_by_query = {}
    for q in used:
        flags = [1 if eid in relevant[q] else 0 for eid in rankings[q].ids()]
        hits_by_query[q] = np.cumsum(flags) if flags else np.zeros(0, dtype=np.int64)

    points = []
    for r in cutoffs:
        precisions, recalls = [], []
        for q in used:
            cum = hits_by_query[q]
            hits = int(cum[min(r, len(cum)) - 1]) if len(cum) else 0
            precisions.append(hits / r)
            recalls.append(hits / len(relevant[q]))
        points.append((float(np.mean(recalls)), float(np.mean(precisions))))
    return PRCurve(points=tuple(points), query_count=len(used), skipped_queries=skipped)


def average_precision(ranking: RankedResult, relevant: Collection[str]) -> float:
    """Mean of precision at each relevant item's rank; unfound items count zero."""
    relevant = set(relevant)
    if not relevant:
        raise DataError("relevant set is empty")
    hits = 0
    total = 0.0
    for rank, (eid, _) in enumerate(ranking.entries, start=1):
        if eid in relevant:
            hits += 1
            total += hits / rank
    return total / len(relevant)


def mean_average_precision(values: Iterable[float]) -> float:
    values = list(values)
    if not values:
        raise DataError("need at least one query")
    return float(np.mean(values))


def combine_ground_truth(
    matrices: Sequence[np.ndarray], t: int, mode: str = "at_least"
) -> np.ndarray:
    """Combine per-label-type relevance matrices: a pair is relevant when it
    matches in at least (or exactly) t of them."""
    if not matrices:
        raise DataError("no matrices to combine")
    if mode not in ("at_least", "exact"):
        raise DataError(f"mode must be 'at_least' or 'exact', got {mode!r}")
    if not 1 <= t <= len(matrices):
        raise DataError(f"t must be in [1, {len(matrices)}], got {t}")
    first = np.asarray(matrices[0])
    total = np.zeros(first.shape, dtype=np.int64)
    for g in matrices:
        g = np.asarray(g)
        if g.shape != first.shape:
            raise DataError(f"matrix shapes differ: {g.shape} vs {first.shape}")
        total += g != 0
    if mode == "at_least":
        return (total >= t).astype(np.int64)
    return (total == t).astype(np.int64)


def top1_match_eval(
    rankings: Mapping[str, RankedResult],
    relevance: np.ndarray,
    ids: Sequence[str],
) -> float:
    """Fraction of queries whose single best-ranked experiment is relevant."""
    relevant = _relevant_sets(rankings, relevance, ids)
    used = [q for q in ids if relevant[q]]
    if not used:
        return 0.0
    hits = 0
    for q in used:
        top = rankings[q].ids()
        if top and top[0] in relevant[q]:
            hits += 1
    return hits / len(used)


@dataclass(frozen=True)
class SyntheticCorpusConfig:
    """Corpus of experiments grouped into conditions that share a planted
    gene partition; experiments perturb their condition's partition and draw
    cluster-level Gaussian signal on top of noise."""

    num_experiments: int = 30
    num_conditions: int = 5
    num_genes: int = 60
    num_samples: int = 8
    noise_sigma: float = 1.0
    perturbation: float = 0.1
    seed: int = 0
    base_clusters: Optional[int] = None  # default: ceil(sqrt(num_genes)/2), min 2
    mean_scale: float = 3.0

    def __post_init__(self) -> None:
        if self.num_experiments < 1 or self.num_genes < 1 or self.num_samples < 1:
            raise DataError("corpus dimensions must be positive")
        if not 1 <= self.num_conditions <= self.num_experiments:
            raise DataError(
                f"num_conditions must be in [1, {self.num_experiments}], "
                f"got {self.num_conditions}"
            )
        if not 0.0 <= self.perturbation <= 1.0:
            raise DataError(f"perturbation must be in [0, 1], got {self.perturbation}")
        if self.noise_sigma < 0:
            raise DataError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.base_clusters is not None and not 1 <= self.base_clusters <= self.num_genes:
            raise DataError("base_clusters out of range")


def generate_synthetic_corpus(
    cfg: SyntheticCorpusConfig,
) -> tuple[list[ExpressionMatrix], GroundTruth]:
    """Deterministically generate (matrices, condition ground truth) for cfg.

    Each condition draws one base partition of the genes. Every experiment in
    the condition relabels each gene with probability cfg.perturbation, then
    per (cluster, sample) draws a mean from N(0, mean_scale^2) and emits
    gene values mean + N(0, noise_sigma^2). Relatedness is therefore planted
    at the partition level, which is exactly what clustering-based retrieval
    is supposed to recover.
    """
    rng = np.random.default_rng(cfg.seed)
    n, p = cfg.num_genes, cfg.num_samples
    k = cfg.base_clusters or max(2, math.ceil(math.sqrt(n) / 2.0))
    k = min(k, n)

    base = []
    for _ in range(cfg.num_conditions):
        while True:
            labels = rng.integers(1, k + 1, size=n)
            if np.unique(labels).size == k:
                break
        base.append(labels)

    width = len(str(max(cfg.num_experiments - 1, 1)))
    gene_ids = [f"gene-{i:0{len(str(n - 1))}d}" for i in range(n)]
    sample_ids = [f"sample-{j}" for j in range(p)]
    matrices = []
    labels_by_id: dict[str, str] = {}
    for e in range(cfg.num_experiments):
        cond = e % cfg.num_conditions
        labels = base[cond].copy()
        flip = rng.random(n) < cfg.perturbation
        if flip.any():
            labels[flip] = rng.integers(1, k + 1, size=int(flip.sum()))
        means = rng.normal(0.0, cfg.mean_scale, size=(k, p))
        values = means[labels - 1] + rng.normal(0.0, cfg.noise_sigma, size=(n, p))
        eid = f"exp-{e:0{width}d}"
        matrices.append(
            ExpressionMatrix(
                experiment_id=eid,
                gene_ids=gene_ids,
                sample_ids=sample_ids,
                values=values,
            )
        )
        labels_by_id[eid] = f"cond-{cond}"
    return matrices, GroundTruth(label_type="condition", labels=labels_by_id)
