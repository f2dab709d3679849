"""Search for the best-scoring clustering of a data matrix.

Two routes: a stochastic greedy search over the full partition space driven
by move/split/merge proposals, and a restricted space of heuristic solutions
(k-means, complete linkage over a k-range) scored under the same objective.
A brute-force enumerator over all set partitions serves as the exact oracle
for small n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from .errors import DataError
from .ppm import ArrayLike, ClusterStats, _values, log_posterior_score
from .types import Clustering, Hyperparameters

BRUTE_FORCE_MAX_N = 12


@dataclass(frozen=True)
class SearchConfig:
    seed: int = 0
    max_sweeps_without_improvement: int = 10
    restarts: int = 3
    operator_probs: tuple[float, float, float] = (0.6, 0.2, 0.2)  # move, split, merge

    def __post_init__(self) -> None:
        if self.restarts < 1:
            raise DataError(f"restarts must be >= 1, got {self.restarts}")
        if self.max_sweeps_without_improvement < 1:
            raise DataError("max_sweeps_without_improvement must be >= 1")
        if len(self.operator_probs) != 3 or any(p < 0 for p in self.operator_probs):
            raise DataError("operator_probs must be three non-negative values")
        if abs(sum(self.operator_probs) - 1.0) > 1e-9:
            raise DataError(f"operator_probs must sum to 1, got {sum(self.operator_probs)}")


def default_k_range(n: int) -> list[int]:
    """Cluster-count sweep 2..ceil(sqrt(n)), clipped to what n allows."""
    if n == 1:
        return [1]
    hi = max(2, math.ceil(math.sqrt(n)))
    return list(range(2, min(hi, n) + 1))


def midpoint_k(n: int) -> int:
    """Single fixed cluster count ceil(sqrt(n)/2), the midpoint of the sweep."""
    return min(n, max(1, math.ceil(math.sqrt(n) / 2.0)))


def iter_partition_labels(n: int) -> Iterator[np.ndarray]:
    """All set partitions of n items as canonical 0-based label vectors.

    Enumerates restricted growth strings in lexicographic order, which is
    also the canonical-form order used for tie-breaking.
    """
    if n < 1:
        raise DataError("n must be >= 1")
    a = np.zeros(n, dtype=np.int64)
    b = np.zeros(n, dtype=np.int64)  # b[i] = max(a[:i]); a[i] may rise to b[i] + 1
    while True:
        yield a.copy()
        j = n - 1
        while j > 0 and a[j] == b[j] + 1:
            j -= 1
        if j == 0:
            return
        a[j] += 1
        for i in range(j + 1, n):
            a[i] = 0
            b[i] = max(b[i - 1], a[i - 1])


class _GreedyState:
    """Mutable partition state with cached per-cluster stats and marginals."""

    def __init__(self, x: np.ndarray, labels: np.ndarray, h: Hyperparameters):
        self.x = x
        self.h = h
        self.n = x.shape[0]
        canonical = Clustering(labels)
        self.assign = canonical.labels.astype(np.int64) - 1  # item -> cluster slot
        self.assign = self.assign.copy()
        self.members: list[list[int]] = [[] for _ in range(canonical.k)]
        for i, c in enumerate(self.assign):
            self.members[c].append(int(i))
        self.stats: list[ClusterStats] = [
            ClusterStats.from_rows(x[m]) for m in self.members
        ]
        self.logm: list[float] = [st.log_marginal(h) for st in self.stats]
        self.log_eta = math.log(h.eta0)

    @property
    def k(self) -> int:
        return len(self.members)

    def score(self) -> float:
        sizes = np.array([len(m) for m in self.members], dtype=np.int64)
        from .ppm import log_crp_prior_from_sizes

        return float(sum(self.logm)) + log_crp_prior_from_sizes(sizes, self.n, self.h.eta0)

    def labels(self) -> np.ndarray:
        return self.assign + 1

    # -- proposals ---------------------------------------------------------
    # Each returns the score delta and an apply() closure, or None when the
    # drawn proposal is a no-op (e.g. moving a singleton to a new cluster).

    def propose_move(self, rng: np.random.Generator):
        i = int(rng.integers(self.n))
        a = int(self.assign[i])
        size_a = len(self.members[a])
        # targets: every other existing cluster, plus a fresh singleton
        t = int(rng.integers(self.k))  # (k - 1) others + 1 new
        others = [c for c in range(self.k) if c != a]
        if t < len(others):
            b = others[t]
            new_cluster = False
        else:
            b = -1
            new_cluster = True
        if new_cluster and size_a == 1:
            return None  # singleton to fresh singleton: identical partition

        row = self.x[i]
        lg = math.lgamma
        if size_a == 1:
            logm_a_after = 0.0
            lik_delta_a = -self.logm[a]
            prior_a = -lg(size_a) - self.log_eta  # cluster disappears
        else:
            st_a_after = self.stats[a].remove_row(row)
            logm_a_after = st_a_after.log_marginal(self.h)
            lik_delta_a = logm_a_after - self.logm[a]
            prior_a = lg(size_a - 1) - lg(size_a)

        if new_cluster:
            st_b_after = ClusterStats.from_rows(row[None, :])
            lik_delta_b = st_b_after.log_marginal(self.h)
            prior_b = self.log_eta  # lgamma(1) == 0
        else:
            size_b = len(self.members[b])
            st_b_after = self.stats[b].add_row(row)
            lik_delta_b = st_b_after.log_marginal(self.h) - self.logm[b]
            prior_b = lg(size_b + 1) - lg(size_b)

        delta = lik_delta_a + lik_delta_b + prior_a + prior_b

        def apply() -> None:
            self._move_item(i, a, b if not new_cluster else None)

        return delta, apply

    def propose_split(self, rng: np.random.Generator):
        c = int(rng.integers(self.k))
        m = len(self.members[c])
        if m < 2:
            return None
        side = rng.integers(2, size=m)
        if side.min() == side.max():
            return None  # all items landed on one side
        idx = np.asarray(self.members[c])
        left, right = idx[side == 0], idx[side == 1]
        st_l = ClusterStats.from_rows(self.x[left])
        st_r = ClusterStats.from_rows(self.x[right])
        lg = math.lgamma
        delta = (
            st_l.log_marginal(self.h)
            + st_r.log_marginal(self.h)
            - self.logm[c]
            + self.log_eta
            + lg(left.size)
            + lg(right.size)
            - lg(m)
        )

        def apply() -> None:
            self._split_cluster(c, left, right)

        return delta, apply

    def propose_merge(self, rng: np.random.Generator):
        if self.k < 2:
            return None
        a, b = (int(v) for v in rng.choice(self.k, size=2, replace=False))
        st_ab = self.stats[a].merged(self.stats[b])
        sa, sb = len(self.members[a]), len(self.members[b])
        lg = math.lgamma
        delta = (
            st_ab.log_marginal(self.h)
            - self.logm[a]
            - self.logm[b]
            - self.log_eta
            + lg(sa + sb)
            - lg(sa)
            - lg(sb)
        )

        def apply() -> None:
            self._merge_clusters(a, b)

        return delta, apply

    # -- state updates (recompute affected stats exactly to stop FP drift) --

    def _refresh(self, c: int) -> None:
        self.stats[c] = ClusterStats.from_rows(self.x[self.members[c]])
        self.logm[c] = self.stats[c].log_marginal(self.h)

    def _drop_cluster(self, c: int) -> None:
        last = self.k - 1
        if c != last:
            self.members[c] = self.members[last]
            self.stats[c] = self.stats[last]
            self.logm[c] = self.logm[last]
            for i in self.members[c]:
                self.assign[i] = c
        self.members.pop()
        self.stats.pop()
        self.logm.pop()

    def _move_item(self, i: int, a: int, b: Optional[int]) -> None:
        self.members[a].remove(i)
        if b is None:
            self.members.append([i])
            self.stats.append(ClusterStats.from_rows(self.x[i][None, :]))
            self.logm.append(self.stats[-1].log_marginal(self.h))
            self.assign[i] = self.k - 1
        else:
            self.members[b].append(i)
            self.assign[i] = b
            self._refresh(b)
        if self.members[a]:
            self._refresh(a)
        else:
            self._drop_cluster(a)

    def _split_cluster(self, c: int, left: np.ndarray, right: np.ndarray) -> None:
        self.members[c] = [int(v) for v in left]
        self._refresh(c)
        self.members.append([int(v) for v in right])
        for i in right:
            self.assign[i] = self.k - 1
        self.stats.append(ClusterStats.from_rows(self.x[right]))
        self.logm.append(self.stats[-1].log_marginal(self.h))

    def _merge_clusters(self, a: int, b: int) -> None:
        keep, gone = (a, b) if a < b else (b, a)
        self.members[keep].extend(self.members[gone])
        for i in self.members[gone]:
            self.assign[i] = keep
        self.members[gone] = []
        self._drop_cluster(gone)
        self._refresh(keep)


def _run_restart(
    x: np.ndarray,
    init_labels: np.ndarray,
    h: Hyperparameters,
    cfg: SearchConfig,
    rng: np.random.Generator,
    trace: Optional[list[float]] = None,
) -> np.ndarray:
    state = _GreedyState(x, init_labels, h)
    n = state.n
    cum = np.cumsum(cfg.operator_probs)
    stale_sweeps = 0
    while stale_sweeps < cfg.max_sweeps_without_improvement:
        accepted_any = False
        for _ in range(n):
            u = rng.random()
            if u < cum[0]:
                proposal = state.propose_move(rng)
            elif u < cum[1]:
                proposal = state.propose_split(rng)
            else:
                proposal = state.propose_merge(rng)
            if proposal is None:
                continue
            delta, apply = proposal
            if delta > 0.0:
                apply()
                accepted_any = True
                if trace is not None:
                    trace.append(state.score())
        stale_sweeps = 0 if accepted_any else stale_sweeps + 1
    return state.labels()


def greedy_map_search(
    d: ArrayLike,
    h: Hyperparameters,
    cfg: SearchConfig = SearchConfig(),
) -> tuple[Clustering, float]:
    """Stochastic greedy maximization of the clustering score.

    Proposals reassign one item (move), break one cluster in two at random
    (split), or join two clusters (merge); a proposal is kept only when it
    strictly improves the score. Each restart runs until a configured number
    of consecutive sweeps (n proposals each) yields no accepted proposal.
    Restarts are initialized from a k-means warm start, all singletons, one
    cluster, then random assignments; the best restart wins. Deterministic
    for a fixed config.
    """
    x = _values(d)
    n = x.shape[0]
    if n < 1:
        raise DataError("matrix must have at least one row")
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    best: Optional[Clustering] = None
    best_score = -math.inf
    for r in range(cfg.restarts):
        rng = np.random.default_rng(children[r])
        if r == 0:
            init = kmeans(x, midpoint_k(n), seed=cfg.seed).labels
        elif r == 1:
            init = np.arange(1, n + 1)
        elif r == 2:
            init = np.ones(n, dtype=np.int64)
        else:
            init = rng.integers(1, max(2, math.ceil(math.sqrt(n))) + 1, size=n)
        labels = _run_restart(x, np.asarray(init), h, cfg, rng)
        clustering = Clustering(labels)
        score = log_posterior_score(x, clustering, h)
        if score > best_score:
            best, best_score = clustering, score
    assert best is not None
    return best, best_score


def brute_force_map(d: ArrayLike, h: Hyperparameters) -> tuple[Clustering, float]:
    """Exact argmax over all set partitions; guarded to n <= 12.

    Ties resolve to the lexicographically smallest canonical label vector.
    Per-subset marginals are memoized on bitmasks, so the cost is dominated
    by the partition count rather than repeated likelihood work.
    """
    x = _values(d)
    n = x.shape[0]
    if n > BRUTE_FORCE_MAX_N:
        raise DataError(
            f"brute-force search is limited to n <= {BRUTE_FORCE_MAX_N}, got n = {n}"
        )
    subset_logm: dict[int, float] = {}

    def marginal(mask: int) -> float:
        val = subset_logm.get(mask)
        if val is None:
            idx = [i for i in range(n) if mask >> i & 1]
            val = ClusterStats.from_rows(x[idx]).log_marginal(h)
            subset_logm[mask] = val
        return val

    log_eta = math.log(h.eta0)
    den = math.fsum(math.log(h.eta0 + i) for i in range(n))
    best_labels: Optional[np.ndarray] = None
    best_score = -math.inf
    for labels in iter_partition_labels(n):
        k = int(labels.max()) + 1
        masks = [0] * k
        sizes = [0] * k
        for i, c in enumerate(labels):
            masks[c] |= 1 << i
            sizes[c] += 1
        score = k * log_eta - den
        for c in range(k):
            score += marginal(masks[c]) + math.lgamma(sizes[c])
        if score > best_score:
            best_score = score
            best_labels = labels
    assert best_labels is not None
    return Clustering(best_labels + 1), best_score


def kmeans(
    d: ArrayLike,
    k: int,
    seed: int = 0,
    max_iter: int = 300,
    sse_trace: Optional[list[float]] = None,
) -> Clustering:
    """Lloyd's algorithm with k-means++ seeding on the rows of d.

    Empty clusters are repaired by re-seeding the empty centroid at the point
    farthest from its current centroid, which keeps the within-cluster SSE
    non-increasing. Deterministic for a fixed seed.
    """
    x = _values(d)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise DataError(f"k must be in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)

    centroids = np.empty((k, x.shape[1]), dtype=float)
    centroids[0] = x[int(rng.integers(n))]
    d2 = ((x - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))
        centroids[j] = x[idx]
        d2 = np.minimum(d2, ((x - centroids[j]) ** 2).sum(axis=1))

    assign = np.full(n, -1, dtype=np.int64)
    for _ in range(max_iter):
        dist2 = ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_assign = dist2.argmin(axis=1)
        counts = np.bincount(new_assign, minlength=k)
        for j in np.flatnonzero(counts == 0):
            own = dist2[np.arange(n), new_assign]
            movable = counts[new_assign] > 1
            own = np.where(movable, own, -np.inf)
            far = int(own.argmax())
            centroids[j] = x[far]
            counts[new_assign[far]] -= 1
            new_assign[far] = j
            counts[j] += 1
            dist2[:, j] = ((x - centroids[j]) ** 2).sum(axis=1)
        if sse_trace is not None:
            diffs = x - centroids[new_assign]
            sse_trace.append(float((diffs * diffs).sum()))
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for j in range(k):
            sel = assign == j
            if sel.any():
                centroids[j] = x[sel].mean(axis=0)
    return Clustering(assign + 1)


def complete_linkage(d: ArrayLike, k: int) -> Clustering:
    """Agglomerative clustering merging by maximum pairwise Euclidean distance.

    Merges stop when k clusters remain. Ties between candidate pairs resolve
    to the smallest pair of cluster slots, so the result is deterministic.
    """
    x = _values(d)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise DataError(f"k must be in [1, {n}], got {k}")
    diff = x[:, None, :] - x[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    np.fill_diagonal(dist, np.inf)
    active = list(range(n))
    members: list[list[int]] = [[i] for i in range(n)]
    while len(active) > k:
        sub = dist[np.ix_(active, active)]
        flat = int(sub.argmin())  # row-major: first minimal (i, j) pair
        ai, aj = divmod(flat, len(active))
        if ai > aj:
            ai, aj = aj, ai
        i, j = active[ai], active[aj]
        merged_dist = np.maximum(dist[i], dist[j])
        dist[i, :] = merged_dist
        dist[:, i] = merged_dist
        dist[i, i] = np.inf
        members[i].extend(members[j])
        active.pop(aj)
    labels = np.empty(n, dtype=np.int64)
    for c, slot in enumerate(active):
        labels[members[slot]] = c + 1
    return Clustering(labels)


CANDIDATE_ALGORITHMS = ("kmeans", "complete-linkage")


def candidate_sweep(
    d: ArrayLike,
    algorithms: Sequence[str] = CANDIDATE_ALGORITHMS,
    k_range: Optional[Iterable[int]] = None,
    seed: int = 0,
) -> list[Clustering]:
    """One clustering per (algorithm, k) over the sweep range.

    The default range is 2..ceil(sqrt(n)); pass [midpoint_k(n)] for the
    single-solution trivial space.
    """
    x = _values(d)
    n = x.shape[0]
    algorithms = list(algorithms)
    if not algorithms:
        raise DataError("at least one algorithm is required")
    for a in algorithms:
        if a not in CANDIDATE_ALGORITHMS:
            raise DataError(f"unknown algorithm {a!r}; choose from {CANDIDATE_ALGORITHMS}")
    ks = default_k_range(n) if k_range is None else [int(k) for k in k_range]
    if not ks:
        raise DataError("k_range is empty")
    for k in ks:
        if not 1 <= k <= n:
            raise DataError(f"k = {k} outside [1, {n}]")
    out = []
    for a in algorithms:
        for k in ks:
            if a == "kmeans":
                out.append(kmeans(x, k, seed=seed))
            else:
                out.append(complete_linkage(x, k))
    return out


def restricted_map_search(
    d: ArrayLike,
    candidates: Sequence[Clustering],
    h: Hyperparameters,
) -> tuple[Clustering, float]:
    """Best-scoring clustering among a precomputed candidate list.

    Ties keep the earliest candidate. The result can never beat the full
    brute-force optimum, only approach it.
    """
    x = _values(d)
    if not candidates:
        raise DataError("candidate list is empty")
    n = x.shape[0]
    best = None
    best_score = -math.inf
    for c in candidates:
        if c.n != n:
            raise DataError(f"candidate covers {c.n} items but matrix has {n} rows")
        score = log_posterior_score(x, c, h)
        if score > best_score:
            best, best_score = c, score
    assert best is not None
    return best, best_score
