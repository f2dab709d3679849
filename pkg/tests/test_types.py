import numpy as np
import pytest

from ppmretrieve import (
    Clustering,
    DataError,
    ExpressionMatrix,
    GroundTruth,
    Hyperparameters,
    ModelIndex,
    ModelIndexEntry,
    relevance_matrix,
)
from ppmretrieve.types import FitMetadata


def make_matrix(values, experiment_id="exp"):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    n, p = values.shape
    return ExpressionMatrix(
        experiment_id=experiment_id,
        gene_ids=[f"g{i}" for i in range(n)],
        sample_ids=[f"s{j}" for j in range(p)],
        values=values,
    )


class TestExpressionMatrix:
    def test_valid_construction(self):
        d = make_matrix([[1.0, 2.0], [3.0, 4.0]])
        assert d.n_genes == 2 and d.n_samples == 2
        assert d.gene_ids == ("g0", "g1")

    def test_values_read_only(self):
        d = make_matrix([[1.0, 2.0]])
        with pytest.raises(ValueError):
            d.values[0, 0] = 9.0

    def test_rejects_nan(self):
        with pytest.raises(DataError, match="non-finite"):
            make_matrix([[1.0, float("nan")]])

    def test_rejects_duplicate_gene_ids(self):
        with pytest.raises(DataError, match="duplicate gene"):
            ExpressionMatrix("e", ["g", "g"], ["s"], [[1.0], [2.0]])

    def test_rejects_duplicate_sample_ids(self):
        with pytest.raises(DataError, match="duplicate sample"):
            ExpressionMatrix("e", ["g"], ["s", "s"], [[1.0, 2.0]])

    def test_rejects_shape_mismatch(self):
        with pytest.raises(DataError):
            ExpressionMatrix("e", ["g0", "g1"], ["s"], [[1.0]])


class TestClustering:
    def test_canonical_first_appearance(self):
        c = Clustering([5, 5, 2, 5, 2, 9])
        assert c.labels.tolist() == [1, 1, 2, 1, 2, 3]
        assert c.k == 3 and c.n == 6

    def test_label_permutation_invariance(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = int(rng.integers(1, 30))
            labels = rng.integers(0, 6, size=n)
            perm = rng.permutation(10)
            assert Clustering(labels) == Clustering(perm[labels])

    def test_blocks_cover_disjointly(self):
        c = Clustering([1, 2, 1, 3, 2])
        blocks = c.blocks()
        all_items = sorted(int(i) for b in blocks for i in b)
        assert all_items == list(range(5))
        assert [len(b) for b in blocks] == c.sizes().tolist()

    def test_from_blocks_round_trip(self):
        c = Clustering([1, 1, 2, 3, 2])
        assert Clustering.from_blocks([b.tolist() for b in c.blocks()]) == c

    def test_from_blocks_rejects_overlap(self):
        with pytest.raises(DataError):
            Clustering.from_blocks([[0, 1], [1, 2]])

    def test_hashable(self):
        assert len({Clustering([1, 1, 2]), Clustering([3, 3, 1]), Clustering([1, 2, 2])}) == 2

    def test_rejects_empty_and_noninteger(self):
        with pytest.raises(DataError):
            Clustering([])
        with pytest.raises(DataError):
            Clustering(np.array([1.5, 2.5]))


class TestHyperparameters:
    def test_defaults(self):
        h = Hyperparameters()
        assert (h.mu0, h.rho0, h.alpha0, h.beta0, h.eta0) == (0.0, 1.0, 1.0, 1.0, 1.0)

    @pytest.mark.parametrize("field", ["rho0", "alpha0", "beta0", "eta0"])
    def test_positivity(self, field):
        with pytest.raises(DataError, match=field):
            Hyperparameters(**{field: 0.0})


class TestModelIndex:
    def entry(self, eid, n=3):
        return ModelIndexEntry(
            experiment_id=eid,
            gene_ids=tuple(f"g{i}" for i in range(n)),
            clustering=Clustering([1] * n),
            fit=FitMetadata(method="greedy", log_score=-1.0, seed=0),
        )

    def test_lookup_and_without(self):
        index = ModelIndex([self.entry("a"), self.entry("b")])
        assert index.get("a").experiment_id == "a"
        assert index.without("a").ids() == ["b"]
        assert index.ids() == ["a", "b"]

    def test_duplicate_ids_rejected(self):
        with pytest.raises(DataError, match="duplicate"):
            ModelIndex([self.entry("a"), self.entry("a")])

    def test_unknown_id_rejected(self):
        with pytest.raises(DataError, match="unknown"):
            ModelIndex([self.entry("a")]).get("zz")

    def test_entry_gene_count_must_match(self):
        with pytest.raises(DataError):
            ModelIndexEntry(
                experiment_id="a",
                gene_ids=("g0",),
                clustering=Clustering([1, 1]),
                fit=FitMetadata("greedy", 0.0, 0),
            )


class TestRelevanceMatrix:
    def test_shared_value_pairs(self):
        gt = GroundTruth("cell type", {"A": "x", "B": "x", "C": "y"})
        g = relevance_matrix(gt, ["A", "B", "C"])
        expected = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]])
        assert np.array_equal(g, expected)

    def test_singleton_value_matches_nothing(self):
        gt = GroundTruth("cell type", {"A": "x"})
        assert relevance_matrix(gt, ["A"]).sum() == 0

    def test_missing_label_matches_nothing(self):
        gt = GroundTruth("cell type", {"A": "x", "B": None, "C": "x"})
        g = relevance_matrix(gt, ["A", "B", "C"])
        assert g[0, 2] == 1 and g[1].sum() == 0

    def test_unknown_id_is_an_error(self):
        gt = GroundTruth("cell type", {"A": "x"})
        with pytest.raises(DataError, match="B"):
            relevance_matrix(gt, ["A", "B"])

    def test_symmetric_zero_diagonal_always(self):
        rng = np.random.default_rng(1)
        for _ in range(25):
            ids = [f"e{i}" for i in range(int(rng.integers(1, 12)))]
            values = [
                None if rng.random() < 0.3 else f"v{int(rng.integers(3))}" for _ in ids
            ]
            g = relevance_matrix(GroundTruth("t", dict(zip(ids, values))), ids)
            assert np.array_equal(g, g.T)
            assert np.diagonal(g).sum() == 0
