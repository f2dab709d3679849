import csv
import json
from pathlib import Path

import numpy as np
import pytest

from ppmretrieve import load_index, load_matrix, save_matrix
from ppmretrieve.cli import main

from test_types import make_matrix

SYNTH_TOML = """
num_experiments = 8
num_conditions = 2
num_genes = 20
num_samples = 4
noise_sigma = 1.0
perturbation = 0.05
seed = 4
"""


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    config = out / "synth.toml"
    config.write_text(SYNTH_TOML)
    assert main(["synth", "--config", str(config), "--out-dir", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def index_path(corpus_dir):
    out = corpus_dir / "index.jsonl"
    rc = main(
        [
            "fit",
            "--manifest",
            str(corpus_dir / "manifest.json"),
            "--out",
            str(out),
            "--method",
            "restricted",
            "--seed",
            "5",
        ]
    )
    assert rc == 0
    return out


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


class TestSynth:
    def test_writes_corpus_and_manifest(self, corpus_dir):
        manifest = json.loads((corpus_dir / "manifest.json").read_text())
        assert len(manifest["experiments"]) == 8
        first = manifest["experiments"][0]
        d = load_matrix(corpus_dir / first["matrix"])
        assert d.n_genes == 20 and d.n_samples == 4
        labels = (corpus_dir / "labels_condition.tsv").read_text().splitlines()
        assert len(labels) == 8


class TestFit:
    def test_index_loads_and_covers_corpus(self, index_path):
        index = load_index(index_path)
        assert len(index) == 8
        assert all(e.fit.method == "restricted" for e in index)

    def test_fixed_seed_is_byte_identical(self, corpus_dir, tmp_path):
        out1 = tmp_path / "i1.jsonl"
        out2 = tmp_path / "i2.jsonl"
        args = [
            "fit",
            "--manifest",
            str(corpus_dir / "manifest.json"),
            "--method",
            "greedy",
            "--seed",
            "9",
            "--top-k",
            "10",
        ]
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_kmeans_fixed_method(self, corpus_dir, tmp_path):
        out = tmp_path / "ikm.jsonl"
        rc = main(
            [
                "fit",
                "--manifest",
                str(corpus_dir / "manifest.json"),
                "--out",
                str(out),
                "--method",
                "kmeans-fixed",
            ]
        )
        assert rc == 0
        index = load_index(out)
        # trivial space: ceil(sqrt(20)/2) = 3 clusters everywhere
        assert {e.clustering.k for e in index} == {3}

    def test_config_file_sets_search_fields(self, corpus_dir, tmp_path):
        config = tmp_path / "fit.toml"
        config.write_text(
            "[hyperparameters]\neta0 = 2.0\n\n[search]\nseed = 3\nrestarts = 2\n"
        )
        out = tmp_path / "icfg.jsonl"
        rc = main(
            [
                "fit",
                "--manifest",
                str(corpus_dir / "manifest.json"),
                "--out",
                str(out),
                "--config",
                str(config),
            ]
        )
        assert rc == 0
        assert all(e.fit.seed == 3 for e in load_index(out))


class TestQuery:
    def test_nid_ranks_own_condition_first(self, corpus_dir, index_path, tmp_path):
        out = tmp_path / "rank.csv"
        rc = main(
            [
                "query",
                "--index",
                str(index_path),
                "--data",
                str(corpus_dir / "exp-0.tsv"),
                "--scheme",
                "nid",
                "--method",
                "restricted",
                "--out",
                str(out),
            ]
        )
        assert rc == 0
        rows = read_csv(out)
        assert len(rows) == 8
        assert rows[0]["rank"] == "1"
        # exp-0 is in the index, so it must rank itself at distance ~0
        assert rows[0]["experiment_id"] == "exp-0"
        assert float(rows[0]["score"]) == 0.0

    def test_likelihood_scheme(self, corpus_dir, index_path, tmp_path):
        out = tmp_path / "rank.csv"
        rc = main(
            [
                "query",
                "--index",
                str(index_path),
                "--data",
                str(corpus_dir / "exp-1.tsv"),
                "--scheme",
                "likelihood",
                "--out",
                str(out),
            ]
        )
        assert rc == 0
        rows = read_csv(out)
        scores = [float(r["score"]) for r in rows]
        assert scores == sorted(scores, reverse=True)

    def test_combined_scheme_filters_by_keyword(self, corpus_dir, index_path, tmp_path):
        out = tmp_path / "rank.csv"
        rc = main(
            [
                "query",
                "--index",
                str(index_path),
                "--data",
                str(corpus_dir / "exp-0.tsv"),
                "--scheme",
                "combined",
                "--keywords",
                "condition=cond-0",
                "--manifest",
                str(corpus_dir / "manifest.json"),
                "--method",
                "restricted",
                "--out",
                str(out),
            ]
        )
        assert rc == 0
        rows = read_csv(out)
        assert len(rows) == 4  # experiments 0, 2, 4, 6 are cond-0
        assert {r["experiment_id"] for r in rows} == {"exp-0", "exp-2", "exp-4", "exp-6"}

    def test_de_scheme(self, corpus_dir, index_path, tmp_path):
        rng = np.random.default_rng(0)
        manifest = json.loads((corpus_dir / "manifest.json").read_text())
        genes = load_matrix(corpus_dir / "exp-0.tsv").gene_ids
        for item in manifest["experiments"]:
            prof = "\n".join(
                f"{g}\t{rng.uniform(0.001, 1.0):.6f}" for g in genes
            )
            (corpus_dir / f"{item['id']}.de.tsv").write_text(prof + "\n")
            item["de_profile"] = f"{item['id']}.de.tsv"
        mpath = corpus_dir / "manifest_de.json"
        mpath.write_text(json.dumps(manifest))
        out = tmp_path / "rank.csv"
        rc = main(
            [
                "query",
                "--index",
                str(index_path),
                "--data",
                str(corpus_dir / "exp-0.de.tsv"),
                "--scheme",
                "de",
                "--manifest",
                str(mpath),
                "--out",
                str(out),
            ]
        )
        assert rc == 0
        rows = read_csv(out)
        assert rows[0]["experiment_id"] == "exp-0"  # self-correlation = 1
        assert float(rows[0]["score"]) == pytest.approx(1.0)

    def test_missing_gene_in_query_is_data_error(self, index_path, tmp_path):
        bad = tmp_path / "bad.tsv"
        save_matrix(make_matrix(np.ones((2, 2)), "bad"), bad)
        out = tmp_path / "rank.csv"
        rc = main(
            ["query", "--index", str(index_path), "--data", str(bad), "--out", str(out)]
        )
        assert rc == 1


class TestEval:
    def test_writes_reports(self, corpus_dir, index_path, tmp_path):
        out_dir = tmp_path / "eval"
        rc = main(
            [
                "eval",
                "--index",
                str(index_path),
                "--manifest",
                str(corpus_dir / "manifest.json"),
                "--labels",
                "condition",
                "--out-dir",
                str(out_dir),
            ]
        )
        assert rc == 0
        summary = read_csv(out_dir / "summary.csv")
        assert {r["scheme"] for r in summary} == {"nid", "likelihood"}
        for r in summary:
            assert 0.0 <= float(r["map"]) <= 1.0
            assert r["queries_used"] == "8"
        pr = read_csv(out_dir / "pr_nid.csv")
        assert len(pr) == 7  # cutoffs 1..M-1
        svg = (out_dir / "pr_curves.svg").read_text()
        assert svg.lstrip().startswith("<?xml")

    def test_unknown_label_type_is_data_error(self, corpus_dir, index_path, tmp_path):
        rc = main(
            [
                "eval",
                "--index",
                str(index_path),
                "--manifest",
                str(corpus_dir / "manifest.json"),
                "--labels",
                "nonexistent",
                "--out-dir",
                str(tmp_path / "e"),
            ]
        )
        assert rc == 1


class TestOracle:
    def test_exact_search_output(self, tmp_path, capsys):
        rng = np.random.default_rng(3)
        x = np.vstack([rng.normal(4, 0.1, (3, 2)), rng.normal(-4, 0.1, (3, 2))])
        path = tmp_path / "small.tsv"
        save_matrix(make_matrix(x, "small"), path)
        assert main(["oracle", "--data", str(path)]) == 0
        out = capsys.readouterr().out
        assert "k=2" in out
        assert "cluster 1: g0, g1, g2" in out

    def test_n_guard(self, tmp_path):
        rng = np.random.default_rng(4)
        path = tmp_path / "big.tsv"
        save_matrix(make_matrix(rng.normal(size=(14, 2)), "big"), path)
        assert main(["oracle", "--data", str(path)]) == 1
        assert main(["oracle", "--data", str(path), "--n", "5"]) == 0


class TestExitCodes:
    def test_usage_error_is_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["fit"])  # missing required arguments
        assert exc.value.code == 2

    def test_data_error_is_1(self, tmp_path):
        rc = main(
            [
                "fit",
                "--manifest",
                str(tmp_path / "missing.json"),
                "--out",
                str(tmp_path / "i.jsonl"),
            ]
        )
        assert rc == 1
