"""Ranking schemes over a model index.

Four ways to order stored experiments against a query: by clustering
distance (the primary scheme), by marginal likelihood of the query data
under each stored clustering, by Pearson correlation of differential
expression p-value profiles, and by a keyword filter refined with the
distance ranking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import DataError
from .metrics import nid
from .ppm import marginal_likelihood_of_query
from .types import Clustering, ExpressionMatrix, Hyperparameters, ModelIndex

ASCENDING = "ascending"
DESCENDING = "descending"


@dataclass(frozen=True)
class RankedResult:
    """Sorted (experiment_id, score) list with the score's polarity.

    Ascending polarity means smaller is better (distances); descending means
    larger is better (likelihoods, correlations). Ties always break by
    experiment id, so rankings are reproducible.
    """

    entries: tuple[tuple[str, float], ...]
    polarity: str

    def __post_init__(self) -> None:
        if self.polarity not in (ASCENDING, DESCENDING):
            raise DataError(f"polarity must be {ASCENDING!r} or {DESCENDING!r}")
        seen = set()
        for eid, score in self.entries:
            if not math.isfinite(score):
                raise DataError(f"non-finite score for {eid!r}")
            if eid in seen:
                raise DataError(f"duplicate experiment id in ranking: {eid!r}")
            seen.add(eid)

    @classmethod
    def from_scores(
        cls, scores: Iterable[tuple[str, float]], polarity: str
    ) -> "RankedResult":
        items = [(eid, float(v)) for eid, v in scores]
        if polarity == ASCENDING:
            items.sort(key=lambda t: (t[1], t[0]))
        else:
            items.sort(key=lambda t: (-t[1], t[0]))
        return cls(entries=tuple(items), polarity=polarity)

    def ids(self) -> list[str]:
        return [eid for eid, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class DEProfile:
    """Per-gene differential expression p-values for one experiment."""

    experiment_id: str
    gene_ids: tuple[str, ...]
    p_values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "gene_ids", tuple(self.gene_ids))
        vals = np.array(self.p_values, dtype=float)
        if vals.ndim != 1 or vals.size != len(self.gene_ids):
            raise DataError(
                f"{self.experiment_id}: {vals.size} p-values for {len(self.gene_ids)} genes"
            )
        if not ((vals > 0) & (vals <= 1)).all():
            raise DataError(f"{self.experiment_id}: p-values must lie in (0, 1]")
        vals.setflags(write=False)
        object.__setattr__(self, "p_values", vals)


def _check_gene_universe(
    index: ModelIndex, query_gene_ids: Optional[Sequence[str]]
) -> None:
    reference = tuple(query_gene_ids) if query_gene_ids is not None else None
    for entry in index:
        if reference is None:
            reference = entry.gene_ids
            continue
        if entry.gene_ids != reference:
            missing = sorted(set(reference) - set(entry.gene_ids))
            if missing:
                raise DataError(
                    f"gene universe mismatch for {entry.experiment_id!r}: "
                    f"missing {', '.join(missing[:10])}"
                    + ("..." if len(missing) > 10 else "")
                )
            raise DataError(
                f"gene universe mismatch for {entry.experiment_id!r}: "
                "same genes in a different order (align first)"
            )


def model_distance_rank(
    query: Clustering,
    index: ModelIndex,
    query_gene_ids: Optional[Sequence[str]] = None,
) -> RankedResult:
    """Rank stored experiments by clustering distance to the query clustering.

    All index entries (and the query, when its gene list is supplied) must
    share one aligned gene universe.
    """
    _check_gene_universe(index, query_gene_ids)
    scores = [(e.experiment_id, nid(query, e.clustering)) for e in index]
    return RankedResult.from_scores(scores, ASCENDING)


def likelihood_rank(
    query_data: ExpressionMatrix,
    index: ModelIndex,
    h: Hyperparameters = Hyperparameters(),
) -> RankedResult:
    """Rank stored experiments by the marginal likelihood they assign to the query data."""
    _check_gene_universe(index, query_data.gene_ids)
    scores = [
        (e.experiment_id, marginal_likelihood_of_query(query_data, e.clustering, h))
        for e in index
    ]
    return RankedResult.from_scores(scores, DESCENDING)


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float((dx * dx).sum())
    sy = float((dy * dy).sum())
    return float((dx * dy).sum()) / math.sqrt(sx * sy)


def de_correlation_rank(
    query: DEProfile, profiles: Sequence[DEProfile]
) -> RankedResult:
    """Rank experiments by Pearson correlation of their p-value profiles with the query.

    Each candidate is compared on the genes it shares with the query; fewer
    than two shared genes or a zero-variance vector is an error naming the
    offending profile.
    """
    query_pos = {g: i for i, g in enumerate(query.gene_ids)}
    scores = []
    for prof in profiles:
        shared_q, shared_p = [], []
        for j, g in enumerate(prof.gene_ids):
            i = query_pos.get(g)
            if i is not None:
                shared_q.append(i)
                shared_p.append(j)
        if len(shared_q) < 2:
            raise DataError(
                f"profile {prof.experiment_id!r} shares fewer than 2 genes with "
                f"query {query.experiment_id!r}"
            )
        x = query.p_values[shared_q]
        y = prof.p_values[shared_p]
        if np.ptp(x) == 0:
            raise DataError(
                f"query profile {query.experiment_id!r} has zero variance on the "
                f"genes shared with {prof.experiment_id!r}"
            )
        if np.ptp(y) == 0:
            raise DataError(f"profile {prof.experiment_id!r} has zero variance")
        scores.append((prof.experiment_id, _pearson(x, y)))
    return RankedResult.from_scores(scores, DESCENDING)


def combined_rank(
    keyword_mask: Mapping[str, bool], distances: RankedResult
) -> RankedResult:
    """Keep only keyword-matching experiments, ordered by clustering distance.

    A literal product of the binary match vector with a distance vector would
    rank non-matching experiments (score 0) best under ascending polarity, so
    non-matching experiments are dropped instead.
    """
    if distances.polarity != ASCENDING:
        raise DataError("combined ranking expects ascending distances")
    ranked_ids = set(distances.ids())
    mask_ids = set(keyword_mask)
    if ranked_ids != mask_ids:
        missing = sorted(mask_ids ^ ranked_ids)
        raise DataError(
            "keyword mask and distance ranking cover different experiments: "
            + ", ".join(missing[:10])
        )
    kept = tuple((eid, v) for eid, v in distances.entries if keyword_mask[eid])
    return RankedResult(entries=kept, polarity=ASCENDING)
