"""Information-theoretic comparison of clusterings.

Entropy and mutual information are taken over the empirical cluster-membership
distributions induced by partitions of the same item set; the normalized
information distance derived from them is a true metric on partitions with
values in [0, 1], which is what makes it usable as a retrieval score.
All logarithms are natural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .types import Clustering


@dataclass(frozen=True)
class ContingencyTable:
    """Co-occurrence counts of two partitions plus their marginals."""

    counts: np.ndarray  # k x k'
    row_totals: np.ndarray
    col_totals: np.ndarray
    n: int


def contingency_table(s: Clustering, s2: Clustering) -> ContingencyTable:
    if s.n != s2.n:
        raise DataError(f"clusterings cover different item counts: {s.n} vs {s2.n}")
    counts = np.zeros((s.k, s2.k), dtype=np.int64)
    np.add.at(counts, (s.labels - 1, s2.labels - 1), 1)
    return ContingencyTable(
        counts=counts,
        row_totals=counts.sum(axis=1),
        col_totals=counts.sum(axis=0),
        n=s.n,
    )


def entropy(s: Clustering) -> float:
    """Entropy (nats) of the cluster-membership distribution of s."""
    sizes = s.sizes()
    n = s.n
    if sizes.min() == sizes.max():
        # uniform case short-circuit keeps H exactly log(k) (and 0 for k = 1)
        return math.log(s.k)
    return math.log(n) - math.fsum(m * math.log(m) for m in sizes.tolist()) / n


def mutual_information(s: Clustering, s2: Clustering) -> float:
    """Mutual information (nats) between two partitions of the same items."""
    table = contingency_table(s, s2)
    n = table.n
    terms = []
    nz = np.argwhere(table.counts > 0)
    for c, c2 in nz:
        joint = int(table.counts[c, c2])
        # integer products inside the log keep independent pairs at exactly 0
        terms.append(joint * math.log((joint * n) / (int(table.row_totals[c]) * int(table.col_totals[c2]))))
    return math.fsum(terms) / n


def nid(s: Clustering, s2: Clustering) -> float:
    """Normalized information distance between two partitions, in [0, 1].

    Zero exactly when the canonical forms coincide (including the degenerate
    pair of single-cluster partitions, where the normalizer vanishes).
    """
    if s.n != s2.n:
        raise DataError(f"clusterings cover different item counts: {s.n} vs {s2.n}")
    if s == s2:
        return 0.0
    # evaluate on a fixed ordering of the pair so the result is exactly symmetric
    if s2.labels.tobytes() < s.labels.tobytes():
        s, s2 = s2, s
    h_max = max(entropy(s), entropy(s2))
    if h_max == 0.0:
        return 0.0
    v = 1.0 - mutual_information(s, s2) / h_max
    return min(1.0, max(0.0, v))
