"""File formats: expression matrices, label/score/profile tables, the
JSON-lines model index, and the corpus manifest.

All formats are plain text. Matrices are TSV or CSV with a header row of
sample ids and a leading gene-id column; label, score, and p-value tables
are two-column TSV without a header; the manifest is JSON.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .errors import DataError
from .retrieval import DEProfile
from .types import (
    Clustering,
    ExpressionMatrix,
    FitMetadata,
    ModelIndex,
    ModelIndexEntry,
)

PathLike = Union[str, Path]


def _detect_delimiter(header: str) -> str:
    return "\t" if "\t" in header else ","


def load_matrix(path: PathLike, experiment_id: Optional[str] = None) -> ExpressionMatrix:
    """Parse a matrix file; the experiment id defaults to the file stem.

    Errors carry the line and column of the offending cell.
    """
    path = Path(path)
    text = path.read_text().splitlines()
    if not text:
        raise DataError(f"{path}: file is empty")
    delim = _detect_delimiter(text[0])
    header = text[0].split(delim)
    if len(header) < 2:
        raise DataError(f"{path}: header must name at least one sample column")
    sample_ids = [h.strip() for h in header[1:]]
    gene_ids: list[str] = []
    rows: list[list[float]] = []
    for lineno, line in enumerate(text[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(delim)
        if len(parts) != len(header):
            raise DataError(
                f"{path}: line {lineno}: expected {len(header)} fields, found {len(parts)}"
            )
        gene_ids.append(parts[0].strip())
        row = []
        for j, cell in enumerate(parts[1:]):
            try:
                v = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: line {lineno}, column {sample_ids[j]!r}: "
                    f"cannot parse {cell.strip()!r} as a number"
                ) from None
            if not math.isfinite(v):
                raise DataError(
                    f"{path}: line {lineno}, column {sample_ids[j]!r}: non-finite value"
                )
            row.append(v)
        rows.append(row)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return ExpressionMatrix(
        experiment_id=experiment_id or path.stem,
        gene_ids=gene_ids,
        sample_ids=sample_ids,
        values=np.array(rows, dtype=float),
    )


def save_matrix(d: ExpressionMatrix, path: PathLike, delimiter: str = "\t") -> None:
    path = Path(path)
    lines = [delimiter.join(["gene_id", *d.sample_ids])]
    for i, g in enumerate(d.gene_ids):
        lines.append(delimiter.join([g, *(repr(float(v)) for v in d.values[i])]))
    path.write_text("\n".join(lines) + "\n")


def zscore_normalize(d: ExpressionMatrix) -> ExpressionMatrix:
    """Center each column and scale to unit population variance.

    Exactly constant columns are centered only, so they come out all zero
    instead of NaN. Applying the function twice is the identity up to
    floating-point residue.
    """
    x = d.values.copy()
    for j in range(x.shape[1]):
        col = x[:, j]
        if (col == col[0]).all():
            x[:, j] = 0.0
            continue
        centered = col - col.mean()
        sd = math.sqrt(float((centered * centered).mean()))
        x[:, j] = centered if sd == 0.0 else centered / sd
    return ExpressionMatrix(
        experiment_id=d.experiment_id,
        gene_ids=d.gene_ids,
        sample_ids=d.sample_ids,
        values=x,
    )


def select_genes(
    corpus: Sequence[ExpressionMatrix],
    scores: Optional[Mapping[str, Mapping[str, float]]] = None,
    top_k: Optional[int] = None,
) -> list[str]:
    """Union over experiments of each experiment's top-k genes, sorted.

    A gene's score comes from the experiment's score table when one is
    supplied; otherwise its row variance stands in. top_k of None (or a
    value >= the gene count) keeps every gene of every experiment.
    """
    if not corpus:
        raise DataError("corpus is empty")
    union: set[str] = set()
    for d in corpus:
        per_gene: dict[str, float]
        table = scores.get(d.experiment_id) if scores else None
        if table is not None:
            known = set(d.gene_ids)
            for g in table:
                if g not in known:
                    raise DataError(
                        f"score table for {d.experiment_id!r} names gene {g!r} "
                        "absent from its matrix"
                    )
            per_gene = dict(table)
        else:
            variances = d.values.var(axis=1)  # row variance fallback
            per_gene = {g: float(v) for g, v in zip(d.gene_ids, variances)}
        ranked = sorted(per_gene.items(), key=lambda t: (-t[1], t[0]))
        keep = ranked if top_k is None else ranked[: max(0, top_k)]
        union.update(g for g, _ in keep)
    return sorted(union)


def align(d: ExpressionMatrix, gene_list: Sequence[str]) -> ExpressionMatrix:
    """Reorder/subset rows to gene_list exactly; missing genes are an error."""
    pos = {g: i for i, g in enumerate(d.gene_ids)}
    missing = [g for g in gene_list if g not in pos]
    if missing:
        raise DataError(
            f"{d.experiment_id}: matrix is missing genes: "
            + ", ".join(missing[:10])
            + ("..." if len(missing) > 10 else "")
        )
    idx = [pos[g] for g in gene_list]
    return ExpressionMatrix(
        experiment_id=d.experiment_id,
        gene_ids=tuple(gene_list),
        sample_ids=d.sample_ids,
        values=d.values[idx],
    )


# -- model index (JSON lines) -------------------------------------------------


def save_index(index: ModelIndex, path: PathLike) -> None:
    path = Path(path)
    lines = []
    for e in index:
        record = {
            "experiment_id": e.experiment_id,
            "gene_ids": list(e.gene_ids),
            "assignment": [int(v) for v in e.clustering.labels],
            "k": e.clustering.k,
            "log_score": e.fit.log_score,
            "method": e.fit.method,
            "seed": e.fit.seed,
        }
        lines.append(json.dumps(record, sort_keys=True, separators=(",", ":")))
    path.write_text("\n".join(lines) + ("\n" if lines else ""))


def load_index(path: PathLike) -> ModelIndex:
    path = Path(path)
    entries = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            eid = record["experiment_id"]
            gene_ids = record["gene_ids"]
            assignment = record["assignment"]
            k = int(record["k"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: line {lineno}: malformed index entry ({exc})") from None
        clustering = Clustering(np.asarray(assignment, dtype=np.int64))
        if clustering.k != k:
            raise DataError(
                f"{path}: line {lineno}: k = {k} but assignment has "
                f"{clustering.k} clusters"
            )
        if not np.array_equal(clustering.labels, np.asarray(assignment)):
            raise DataError(
                f"{path}: line {lineno}: assignment labels are not in canonical form"
            )
        entries.append(
            ModelIndexEntry(
                experiment_id=eid,
                gene_ids=tuple(gene_ids),
                clustering=clustering,
                fit=FitMetadata(
                    method=record.get("method", ""),
                    log_score=float(record.get("log_score", math.nan)),
                    seed=int(record.get("seed", 0)),
                ),
            )
        )
    return ModelIndex(entries)


# -- two-column tables --------------------------------------------------------


def load_labels(path: PathLike) -> dict[str, str]:
    """TSV of (experiment_id, value), no header."""
    path = Path(path)
    out: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"{path}: line {lineno}: expected 2 tab-separated fields")
        eid, value = parts[0].strip(), parts[1].strip()
        if eid in out:
            raise DataError(f"{path}: line {lineno}: duplicate experiment id {eid!r}")
        out[eid] = value
    return out


def save_labels(labels: Mapping[str, str], path: PathLike) -> None:
    lines = [f"{eid}\t{value}" for eid, value in labels.items()]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def load_scores(path: PathLike) -> dict[str, float]:
    """TSV of (gene_id, score), no header."""
    path = Path(path)
    out: dict[str, float] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"{path}: line {lineno}: expected 2 tab-separated fields")
        gene = parts[0].strip()
        try:
            out[gene] = float(parts[1])
        except ValueError:
            raise DataError(
                f"{path}: line {lineno}: cannot parse {parts[1].strip()!r} as a number"
            ) from None
    return out


def load_de_profile(path: PathLike, experiment_id: Optional[str] = None) -> DEProfile:
    """TSV of (gene_id, p_value), no header; p-values must lie in (0, 1]."""
    path = Path(path)
    table = load_scores(path)
    return DEProfile(
        experiment_id=experiment_id or path.stem,
        gene_ids=tuple(table),
        p_values=np.array(list(table.values()), dtype=float),
    )


# -- corpus manifest ----------------------------------------------------------


@dataclass(frozen=True)
class ManifestEntry:
    experiment_id: str
    matrix: Path
    de_profile: Optional[Path] = None
    scores: Optional[Path] = None


@dataclass(frozen=True)
class CorpusManifest:
    entries: tuple[ManifestEntry, ...]
    label_files: tuple[tuple[str, Path], ...] = field(default_factory=tuple)

    def ids(self) -> list[str]:
        return [e.experiment_id for e in self.entries]


def load_manifest(path: PathLike) -> CorpusManifest:
    """JSON manifest listing experiment files and label tables.

    Relative paths resolve against the manifest's directory; every referenced
    file must exist.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    base = path.parent

    def resolve(rel: str, what: str) -> Path:
        p = base / rel if not Path(rel).is_absolute() else Path(rel)
        if not p.exists():
            raise DataError(f"{path}: {what} file does not exist: {p}")
        return p

    entries = []
    seen = set()
    for item in doc.get("experiments", []):
        eid = item.get("id")
        if not eid or "matrix" not in item:
            raise DataError(f"{path}: each experiment needs 'id' and 'matrix'")
        if eid in seen:
            raise DataError(f"{path}: duplicate experiment id {eid!r}")
        seen.add(eid)
        entries.append(
            ManifestEntry(
                experiment_id=eid,
                matrix=resolve(item["matrix"], f"matrix for {eid!r}"),
                de_profile=(
                    resolve(item["de_profile"], f"DE profile for {eid!r}")
                    if item.get("de_profile")
                    else None
                ),
                scores=(
                    resolve(item["scores"], f"score table for {eid!r}")
                    if item.get("scores")
                    else None
                ),
            )
        )
    if not entries:
        raise DataError(f"{path}: manifest lists no experiments")
    label_files = tuple(
        (item["type"], resolve(item["path"], f"label file {item.get('type')!r}"))
        for item in doc.get("labels", [])
    )
    return CorpusManifest(entries=tuple(entries), label_files=label_files)


def save_manifest(
    manifest_path: PathLike,
    experiments: Sequence[Mapping[str, str]],
    labels: Sequence[Mapping[str, str]] = (),
) -> None:
    doc = {"experiments": list(experiments), "labels": list(labels)}
    Path(manifest_path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
