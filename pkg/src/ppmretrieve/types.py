"""Core domain types: data matrices, partitions, priors, index records, labels."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional, Sequence

import numpy as np

from .errors import DataError


def _check_unique(ids: Sequence[str], kind: str) -> None:
    seen = set()
    for x in ids:
        if x in seen:
            raise DataError(f"duplicate {kind} id: {x!r}")
        seen.add(x)


@dataclass(frozen=True)
class ExpressionMatrix:
    """An n x p data matrix with gene (row) and sample (column) identifiers."""

    experiment_id: str
    gene_ids: tuple[str, ...]
    sample_ids: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "gene_ids", tuple(self.gene_ids))
        object.__setattr__(self, "sample_ids", tuple(self.sample_ids))
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 2:
            raise DataError(f"{self.experiment_id}: values must be 2-D, got shape {vals.shape}")
        n, p = vals.shape
        if n < 1 or p < 1:
            raise DataError(f"{self.experiment_id}: matrix must be at least 1x1, got {n}x{p}")
        if len(self.gene_ids) != n:
            raise DataError(f"{self.experiment_id}: {len(self.gene_ids)} gene ids for {n} rows")
        if len(self.sample_ids) != p:
            raise DataError(f"{self.experiment_id}: {len(self.sample_ids)} sample ids for {p} columns")
        _check_unique(self.gene_ids, "gene")
        _check_unique(self.sample_ids, "sample")
        if not np.isfinite(vals).all():
            bad = np.argwhere(~np.isfinite(vals))[0]
            raise DataError(
                f"{self.experiment_id}: non-finite value at row {bad[0] + 1} "
                f"(gene {self.gene_ids[bad[0]]!r}), column {bad[1] + 1} "
                f"(sample {self.sample_ids[bad[1]]!r})"
            )
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n_genes(self) -> int:
        return self.values.shape[0]

    @property
    def n_samples(self) -> int:
        return self.values.shape[1]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ExpressionMatrix):
            return NotImplemented
        return (
            self.experiment_id == other.experiment_id
            and self.gene_ids == other.gene_ids
            and self.sample_ids == other.sample_ids
            and np.array_equal(self.values, other.values)
        )


class Clustering:
    """A partition of n items into k non-empty clusters.

    Labels are canonicalized to {1..k} in order of first appearance, so two
    clusterings describing the same partition compare (and hash) equal no
    matter how the input was labelled.
    """

    __slots__ = ("_labels", "_k")

    def __init__(self, labels: Iterable[int]):
        arr = np.asarray(list(labels) if not isinstance(labels, np.ndarray) else labels)
        if arr.ndim != 1 or arr.size < 1:
            raise DataError("clustering labels must be a non-empty 1-D sequence")
        if not np.issubdtype(arr.dtype, np.integer):
            raise DataError(f"clustering labels must be integers, got dtype {arr.dtype}")
        _, first_idx, inverse = np.unique(arr, return_index=True, return_inverse=True)
        order = np.argsort(first_idx)
        rank = np.empty_like(order)
        rank[order] = np.arange(order.size)
        canonical = (rank[inverse] + 1).astype(np.int64)
        canonical.setflags(write=False)
        self._labels = canonical
        self._k = int(order.size)

    @classmethod
    def from_blocks(cls, blocks: Sequence[Sequence[int]]) -> "Clustering":
        """Build from explicit blocks of 0-based item indices covering 0..n-1."""
        n = sum(len(b) for b in blocks)
        labels = np.full(n, -1, dtype=np.int64)
        for c, block in enumerate(blocks):
            for i in block:
                if not 0 <= i < n or labels[i] != -1:
                    raise DataError("blocks must disjointly cover 0..n-1")
                labels[i] = c + 1
        return cls(labels)

    @property
    def n(self) -> int:
        return int(self._labels.size)

    @property
    def k(self) -> int:
        return self._k

    @property
    def labels(self) -> np.ndarray:
        """Canonical 1-based label vector (read-only)."""
        return self._labels

    def sizes(self) -> np.ndarray:
        """Cluster sizes indexed by label-1."""
        return np.bincount(self._labels, minlength=self._k + 1)[1:]

    def blocks(self) -> list[np.ndarray]:
        """Item indices of each cluster, in label order."""
        order = np.argsort(self._labels, kind="stable")
        bounds = np.searchsorted(self._labels[order], np.arange(2, self._k + 1))
        return np.split(order, bounds)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Clustering):
            return NotImplemented
        return self._k == other._k and np.array_equal(self._labels, other._labels)

    def __hash__(self) -> int:
        return hash((self._k, self._labels.tobytes()))

    def __repr__(self) -> str:
        return f"Clustering(n={self.n}, k={self._k})"


@dataclass(frozen=True)
class Hyperparameters:
    """Normal-Gamma prior parameters plus the concentration of the partition prior."""

    mu0: float = 0.0
    rho0: float = 1.0
    alpha0: float = 1.0
    beta0: float = 1.0
    eta0: float = 1.0

    def __post_init__(self) -> None:
        for name in ("rho0", "alpha0", "beta0", "eta0"):
            if not getattr(self, name) > 0:
                raise DataError(f"hyperparameter {name} must be > 0, got {getattr(self, name)}")


@dataclass(frozen=True)
class FitMetadata:
    method: str
    log_score: float
    seed: int
    timestamp: Optional[str] = None


@dataclass(frozen=True)
class ModelIndexEntry:
    """One stored experiment: its gene universe and fitted clustering."""

    experiment_id: str
    gene_ids: tuple[str, ...]
    clustering: Clustering
    fit: FitMetadata

    def __post_init__(self) -> None:
        object.__setattr__(self, "gene_ids", tuple(self.gene_ids))
        if self.clustering.n != len(self.gene_ids):
            raise DataError(
                f"{self.experiment_id}: clustering covers {self.clustering.n} items "
                f"but {len(self.gene_ids)} gene ids given"
            )


class ModelIndex:
    """Immutable snapshot of stored experiment models, looked up by experiment id."""

    __slots__ = ("_entries", "_by_id")

    def __init__(self, entries: Iterable[ModelIndexEntry] = ()):
        self._entries = tuple(entries)
        self._by_id: dict[str, ModelIndexEntry] = {}
        for e in self._entries:
            if e.experiment_id in self._by_id:
                raise DataError(f"duplicate experiment id in index: {e.experiment_id!r}")
            self._by_id[e.experiment_id] = e

    @property
    def entries(self) -> tuple[ModelIndexEntry, ...]:
        return self._entries

    def ids(self) -> list[str]:
        return [e.experiment_id for e in self._entries]

    def get(self, experiment_id: str) -> ModelIndexEntry:
        try:
            return self._by_id[experiment_id]
        except KeyError:
            raise DataError(f"unknown experiment id: {experiment_id!r}") from None

    def with_entry(self, entry: ModelIndexEntry) -> "ModelIndex":
        return ModelIndex(self._entries + (entry,))

    def without(self, experiment_id: str) -> "ModelIndex":
        self.get(experiment_id)
        return ModelIndex(e for e in self._entries if e.experiment_id != experiment_id)

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[ModelIndexEntry]:
        return iter(self._entries)

    def __contains__(self, experiment_id: str) -> bool:
        return experiment_id in self._by_id

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ModelIndex):
            return NotImplemented
        return self._entries == other._entries


@dataclass(frozen=True)
class GroundTruth:
    """Per-experiment categorical labels for one label type (e.g. "cell type").

    A value of None marks an experiment known to the corpus but unannotated
    under this label type; such experiments are relevant to nothing.
    """

    label_type: str
    labels: Mapping[str, Optional[str]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "labels", dict(self.labels))


def relevance_matrix(gt: GroundTruth, ids: Sequence[str]) -> np.ndarray:
    """Binary M x M matrix marking pairs of distinct experiments with equal labels.

    Symmetric with zero diagonal. Experiments whose label is absent match
    nothing.
    """
    for x in ids:
        if x not in gt.labels:
            raise DataError(f"experiment id {x!r} not covered by ground truth {gt.label_type!r}")
    values = [gt.labels[x] for x in ids]
    m = len(ids)
    g = np.zeros((m, m), dtype=np.int64)
    for i in range(m):
        if values[i] is None:
            continue
        for j in range(i + 1, m):
            if values[j] == values[i]:
                g[i, j] = g[j, i] = 1
    return g
