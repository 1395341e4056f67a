"""End-to-end pipeline orchestration, staged artifacts, and reports.

Every artifact file begins with a single metadata header line of the
form ``# config=<hash> seed=<n> version=<v>``; golden-file comparisons
strip that line. All randomness flows from the single config seed, so a
rerun with the same config (endpoint disabled) is byte-identical apart
from the wall-clock figures kept in the run manifest.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .cluster import ClusterAssignment, cascade_cluster, mean_silhouette, scale_ks
from .components import (
    ANALYSIS_DOMAINS,
    ComponentLexicon,
    contingency,
    load_lexicon,
    ngram_frequencies,
    tag_components,
    temporal_series,
    term_frequencies,
)
from .corpus import Corpus, Document, document_to_json, load_corpus, load_domain_rules
from .dedup import (
    DedupDecision,
    DefinitionRecord,
    cross_cluster_duplicates,
    dedup_within_clusters,
)
from .endpoint import ClassifierEndpoint
from .errors import DataError, DefminerError, PipelineStageError
from .extract import (
    DefinitionCandidate,
    build_template,
    candidate_to_json,
    dedup_exact,
    extract_candidates,
    split_sentences,
)
from .filtering import apply_filter, classify_all, load_filter_rules
from .stats import (
    ChiSquareResult,
    ContingencyTable,
    ResidualMatrix,
    chi_square,
    partition_components,
    residual_correlation,
    residuals,
)
from .vectors import DefinitionVector, embed, embed_external, fit_vectorizer

logger = logging.getLogger(__name__)

STAGE_DIRS = {
    "corpus": "01_corpus",
    "candidates": "02_candidates",
    "filtered": "03_filtered",
    "vectors": "04_vectors",
    "clusters": "05_clusters",
    "definitions": "06_definitions",
    "components": "07_components",
    "stats": "08_stats",
    "report": "09_report",
}


# ---------------------------------------------------------------------------
# configuration


@dataclass
class PipelineConfig:
    corpus: str = ""
    out_dir: str = "defminer_out"
    term: str = "digital twin"
    plural: bool = True
    copulas: tuple[str, ...] = ("is", "are", "can be", "could be")
    markers: tuple[str, ...] = ("defined as", "described as", "characterized by", "")
    domain_rules: str | None = None
    filter_rules: str | None = None
    lexicon: str | None = None
    endpoint_url: str = ""
    endpoint_timeout: float = 10.0
    endpoint_enabled: bool = False
    no_fallback: bool = False
    embedding: str = "baseline"
    ks: tuple[int, ...] = (400, 100, 50)
    restage: str = "centroids"
    dedup_threshold: float = 0.90
    domains: tuple[str, ...] = ANALYSIS_DOMAINS
    smoothing: str = "add_half_zero_cells"
    seed: int = 42
    ngrams: tuple[int, ...] = (2, 3)
    year_range: tuple[int, int] = (2000, 2024)
    max_workers: int = 4

    @classmethod
    def from_json(cls, path: str | Path, overrides: dict | None = None) -> "PipelineConfig":
        obj = json.loads(Path(path).read_text("utf-8"))
        ep = obj.pop("endpoint", None)
        if ep:
            obj.setdefault("endpoint_url", ep.get("url", ""))
            obj.setdefault("endpoint_timeout", ep.get("timeout", 10.0))
            obj.setdefault("endpoint_enabled", ep.get("enabled", False))
        if overrides:
            obj.update({k: v for k, v in overrides.items() if v is not None})
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(obj) - known
        if unknown:
            raise DataError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**obj)
        return cfg.normalized()

    def normalized(self) -> "PipelineConfig":
        self.copulas = tuple(self.copulas)
        self.markers = tuple(self.markers)
        self.ks = tuple(int(k) for k in self.ks)
        self.domains = tuple(self.domains)
        self.ngrams = tuple(int(n) for n in self.ngrams)
        self.year_range = (int(self.year_range[0]), int(self.year_range[1]))
        return self

    def validate(self) -> None:
        if not self.corpus:
            raise DataError("config: 'corpus' is required")
        if not Path(self.corpus).exists():
            raise DataError(f"config: corpus file not found: {self.corpus}")
        for name in ("domain_rules", "filter_rules", "lexicon"):
            p = getattr(self, name)
            if p is not None and not Path(p).exists():
                raise DataError(f"config: {name} file not found: {p}")
        if any(b >= a for a, b in zip(self.ks, self.ks[1:])):
            raise DataError(f"config: ks must be strictly decreasing, got {list(self.ks)}")
        if not (0.0 < self.dedup_threshold <= 1.0):
            raise DataError(f"config: dedup_threshold must be in (0, 1]")
        if self.embedding not in ("baseline", "external"):
            raise DataError(f"config: unknown embedding mode {self.embedding!r}")
        if self.restage not in ("centroids", "raw"):
            raise DataError(f"config: unknown restage mode {self.restage!r}")
        if self.smoothing not in ("none", "add_half_zero_cells"):
            raise DataError(f"config: unknown smoothing mode {self.smoothing!r}")
        for n in self.ngrams:
            if not (2 <= n <= 5):
                raise DataError(f"config: ngram size {n} outside [2, 5]")

    def endpoint(self) -> ClassifierEndpoint:
        return ClassifierEndpoint(
            url=self.endpoint_url,
            timeout=self.endpoint_timeout,
            enabled=self.endpoint_enabled,
        )

    def config_hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, default=list)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


# ---------------------------------------------------------------------------
# artifact io


def artifact_header(cfg: PipelineConfig) -> str:
    return f"# config={cfg.config_hash()} seed={cfg.seed} version={__version__}"


def write_artifact(path: Path, header: str, lines: list[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for line in lines:
            fh.write(line + "\n")


def write_jsonl(path: Path, header: str, records: list[dict]) -> None:
    write_artifact(path, header, [json.dumps(r, sort_keys=True) for r in records])


def write_json(path: Path, header: str, obj) -> None:
    write_artifact(path, header, [json.dumps(obj, indent=2, sort_keys=True)])


def write_csv(path: Path, header: str, columns: list[str], rows: list[list]) -> None:
    lines = [",".join(columns)]
    lines.extend(",".join(str(v) for v in row) for row in rows)
    write_artifact(path, header, lines)


def read_artifact_lines(path: Path) -> list[str]:
    if not path.exists():
        raise DataError(f"missing artifact: {path}")
    lines = path.read_text("utf-8").splitlines()
    return [ln for ln in lines if not ln.startswith("#")]


def read_jsonl(path: Path) -> list[dict]:
    return [json.loads(ln) for ln in read_artifact_lines(path) if ln.strip()]


def read_json(path: Path):
    return json.loads("\n".join(read_artifact_lines(path)))


def read_contingency_csv(path: Path) -> ContingencyTable:
    lines = read_artifact_lines(path)
    if len(lines) < 3:
        raise DataError(f"contingency file too short: {path}")
    cols = lines[0].split(",")[1:]
    row_labels, data = [], []
    for ln in lines[1:]:
        parts = ln.split(",")
        row_labels.append(parts[0])
        data.append([float(v) for v in parts[1:]])
    return ContingencyTable(
        observed=np.array(data), row_labels=tuple(row_labels), col_labels=tuple(cols)
    )


# ---------------------------------------------------------------------------
# stages


def record_to_json(r: DefinitionRecord) -> dict:
    return {
        "id": r.id,
        "doc_id": r.doc_id,
        "sentence": r.sentence,
        "start": r.start,
        "end": r.end,
        "marker": r.marker,
        "year": r.year,
        "domain": r.domain,
        "multiplicity": r.multiplicity,
        "cluster": r.cluster,
        "components": sorted(r.components),
    }


def record_from_json(obj: dict) -> DefinitionRecord:
    return DefinitionRecord(
        id=obj["id"],
        doc_id=obj["doc_id"],
        sentence=obj["sentence"],
        start=int(obj["start"]),
        end=int(obj["end"]),
        marker=obj.get("marker", ""),
        year=obj.get("year"),
        domain=obj.get("domain", "other"),
        multiplicity=int(obj.get("multiplicity", 1)),
        cluster=int(obj.get("cluster", 0)),
        components=tuple(obj.get("components", ())),
    )


def stage_ingest(cfg: PipelineConfig, out: Path) -> Corpus:
    rules = load_domain_rules(cfg.domain_rules)
    corpus = load_corpus(cfg.corpus, domain_rules=rules)
    header = artifact_header(cfg)
    write_jsonl(
        out / STAGE_DIRS["corpus"] / "corpus.norm.jsonl",
        header,
        [document_to_json(d) for d in corpus.documents],
    )
    write_json(out / STAGE_DIRS["corpus"] / "corpus_manifest.json", header, corpus.manifest)
    return corpus


def stage_extract(
    cfg: PipelineConfig, corpus: Corpus, out: Path
) -> tuple[list[DefinitionCandidate], dict[str, int], dict]:
    template = build_template(cfg.term, cfg.plural, cfg.copulas, cfg.markers)
    raw: list[DefinitionCandidate] = []
    for doc in corpus.documents:
        if doc.source != "article":
            continue
        raw.extend(extract_candidates(doc, template))
    unique, multiplicity = dedup_exact(raw)
    audit = {
        "candidates_raw": len(raw),
        "candidates_unique": len(unique),
        "exact_duplicates_removed": len(raw) - len(unique),
        "with_parentheses": sum(1 for c in unique if "(" in c.sentence and ")" in c.sentence),
        "by_marker": {
            m: sum(1 for c in unique if c.marker == m)
            for m in sorted({c.marker for c in unique})
        },
    }
    header = artifact_header(cfg)
    stage_dir = out / STAGE_DIRS["candidates"]
    write_jsonl(stage_dir / "candidates.jsonl", header, [candidate_to_json(c) for c in unique])
    write_csv(
        stage_dir / "exact_duplicates.csv",
        header,
        ["candidate_id", "multiplicity"],
        [[c.cid, multiplicity[c.cid]] for c in unique if multiplicity[c.cid] > 1],
    )
    write_json(stage_dir / "extract_audit.json", header, audit)
    return unique, multiplicity, audit


def stage_filter(
    cfg: PipelineConfig, cands: list[DefinitionCandidate], out: Path
) -> tuple[list[DefinitionCandidate], list[DefinitionCandidate], dict]:
    rules = load_filter_rules(cfg.filter_rules)
    template = build_template(cfg.term, cfg.plural, cfg.copulas, cfg.markers)
    verdicts = classify_all(
        cands,
        cfg.endpoint(),
        rules,
        template,
        allow_fallback=not cfg.no_fallback,
        max_workers=cfg.max_workers,
    )
    kept, dropped, audit = apply_filter(cands, verdicts)
    header = artifact_header(cfg)
    stage_dir = out / STAGE_DIRS["filtered"]
    write_jsonl(stage_dir / "kept.jsonl", header, [candidate_to_json(c) for c in kept])
    write_jsonl(stage_dir / "dropped.jsonl", header, [candidate_to_json(c) for c in dropped])
    write_json(
        stage_dir / "filter_audit.json",
        header,
        {
            "total": len(cands),
            "kept": len(kept),
            "dropped": len(dropped),
            "dropped_fraction": round(len(dropped) / len(cands), 6) if cands else 0.0,
            "by_rule": audit,
        },
    )
    return kept, dropped, audit


def stage_embed(
    cfg: PipelineConfig, kept: list[DefinitionCandidate], out: Path
) -> list[DefinitionVector]:
    sentences = [c.sentence for c in kept]
    ids = [c.cid for c in kept]
    if cfg.embedding == "external":
        vecs = embed_external(sentences, cfg.endpoint(), ids)
        vocab = None
    else:
        vocab = fit_vectorizer(sentences)
        vecs = [embed(s, vocab, cid) for s, cid in zip(sentences, ids)]
    header = artifact_header(cfg)
    stage_dir = out / STAGE_DIRS["vectors"]
    write_jsonl(
        stage_dir / "vectors.jsonl",
        header,
        [
            {"candidate_id": v.candidate_id, "values": [round(x, 12) for x in v.values.tolist()]}
            for v in vecs
        ],
    )
    if vocab is not None:
        write_json(
            stage_dir / "vocabulary.json",
            header,
            {"n_docs": vocab.n_docs, "doc_freq": dict(sorted(vocab.doc_freq.items()))},
        )
    return vecs


def stage_cluster(
    cfg: PipelineConfig, vecs: list[DefinitionVector], out: Path
) -> list[ClusterAssignment]:
    ks = scale_ks(cfg.ks, len(vecs))
    if ks != cfg.ks:
        logger.info("scaled cluster stages %s -> %s for %d vectors", cfg.ks, ks, len(vecs))
    stages = cascade_cluster(vecs, ks, seed=cfg.seed, restage=cfg.restage)
    header = artifact_header(cfg)
    stage_dir = out / STAGE_DIRS["clusters"]
    rows = []
    for stage_idx, assign in enumerate(stages):
        for cid in sorted(assign.labels):
            rows.append({"candidate_id": cid, "stage": stage_idx, "cluster": assign.labels[cid]})
    write_jsonl(stage_dir / "assignments.jsonl", header, rows)
    X = np.stack([v.values for v in vecs])
    order = {v.candidate_id: i for i, v in enumerate(vecs)}
    metrics = []
    for stage_idx, assign in enumerate(stages):
        lab = np.zeros(len(vecs), dtype=int)
        for cid, c in assign.labels.items():
            lab[order[cid]] = c
        sil = mean_silhouette(X, lab)
        metrics.append(
            {
                "stage": stage_idx,
                "k": assign.k,
                "inertia": assign.inertia,
                "iterations": assign.iterations_run,
                "silhouette": None if sil is None else round(sil, 6),
            }
        )
    write_json(stage_dir / "cluster_metrics.json", header, {"ks": list(ks), "stages": metrics})
    return stages


def stage_dedup(
    cfg: PipelineConfig,
    kept: list[DefinitionCandidate],
    stages: list[ClusterAssignment],
    multiplicity: dict[str, int],
    out: Path,
) -> tuple[list[DefinitionRecord], list[DedupDecision]]:
    labels = stages[-1].labels
    survivors, decisions = dedup_within_clusters(kept, labels, cfg.dedup_threshold)
    cross = cross_cluster_duplicates(survivors, labels, cfg.dedup_threshold)
    records = [
        DefinitionRecord(
            id=c.cid,
            doc_id=c.doc_id,
            sentence=c.sentence,
            start=c.start,
            end=c.end,
            marker=c.marker,
            year=c.year,
            domain=c.domain,
            multiplicity=multiplicity.get(c.cid, 1),
            cluster=labels[c.cid],
        )
        for c in survivors
    ]
    header = artifact_header(cfg)
    stage_dir = out / STAGE_DIRS["definitions"]
    write_jsonl(stage_dir / "survivors.jsonl", header, [record_to_json(r) for r in records])
    write_csv(
        stage_dir / "dedup_decisions.csv",
        header,
        ["kept_id", "dropped_id", "score", "cluster"],
        [[d.kept_id, d.dropped_id, f"{d.score:.6f}", d.cluster] for d in decisions],
    )
    write_csv(
        stage_dir / "cross_cluster_duplicates.csv",
        header,
        ["id_a", "id_b", "score"],
        [[a, b, f"{s:.6f}"] for a, b, s in cross],
    )
    return records, decisions


def _survey_sentences(corpus: Corpus) -> list[str]:
    out = []
    for doc in corpus.documents:
        if doc.source == "survey":
            out.extend(s for s, _ in split_sentences(doc.text))
    return out


def _wordcloud_weights(table_rows: tuple[tuple[str, int], ...], top: int = 100) -> dict:
    if not table_rows:
        return {}
    peak = table_rows[0][1]
    return {tok: round(count / peak, 6) for tok, count in table_rows[:top]}


def stage_components(
    cfg: PipelineConfig,
    records: list[DefinitionRecord],
    corpus: Corpus,
    out: Path,
) -> tuple[list[DefinitionRecord], ContingencyTable, ComponentLexicon]:
    lex = load_lexicon(cfg.lexicon)
    tagged = [
        dataclasses.replace(r, components=tuple(sorted(tag_components(r, lex))))
        for r in records
    ]
    header = artifact_header(cfg)
    stage_dir = out / STAGE_DIRS["components"]
    write_jsonl(stage_dir / "definitions_tagged.jsonl", header, [record_to_json(r) for r in tagged])

    freq = term_frequencies(tagged, scope="definitions")
    write_csv(stage_dir / "freq_unigram.csv", header, ["token", "count"], [list(r) for r in freq.rows])
    write_json(
        stage_dir / "wordcloud_definitions.json",
        header,
        {"scope": "definitions", "weights": _wordcloud_weights(freq.rows)},
    )
    for n in cfg.ngrams:
        ngrams = ngram_frequencies(tagged, n, scope="definitions")
        write_csv(
            stage_dir / f"freq_ngram_{n}.csv", header, ["ngram", "count"],
            [list(r) for r in ngrams.rows],
        )

    survey = _survey_sentences(corpus)
    if survey:
        sfreq = term_frequencies(survey, scope="survey")
        write_csv(
            stage_dir / "freq_unigram_survey.csv", header, ["token", "count"],
            [list(r) for r in sfreq.rows],
        )
        write_json(
            stage_dir / "wordcloud_survey.json",
            header,
            {"scope": "survey", "weights": _wordcloud_weights(sfreq.rows)},
        )
        for n in cfg.ngrams:
            sn = ngram_frequencies(survey, n, scope="survey")
            write_csv(
                stage_dir / f"freq_ngram_{n}_survey.csv", header, ["ngram", "count"],
                [list(r) for r in sn.rows],
            )
    else:
        write_csv(stage_dir / "freq_unigram_survey.csv", header, ["token", "count"], [])
        write_json(
            stage_dir / "wordcloud_survey.json", header, {"scope": "survey", "weights": {}}
        )
        for n in cfg.ngrams:
            write_csv(stage_dir / f"freq_ngram_{n}_survey.csv", header, ["ngram", "count"], [])

    temporal = temporal_series(tagged, lex, cfg.year_range)
    rows = []
    for comp in lex.names():
        for year, count in temporal.counts(comp):
            rows.append([comp, year, count])
    write_csv(stage_dir / "temporal.csv", header, ["component", "year", "count"], rows)

    table, excluded = contingency(tagged, lex, cfg.domains)
    write_csv(
        stage_dir / "contingency.csv",
        header,
        ["component", *table.col_labels],
        [[name, *[int(v) for v in table.observed[i]]] for i, name in enumerate(table.row_labels)],
    )
    write_json(
        stage_dir / "component_audit.json",
        header,
        {
            "records": len(tagged),
            "tagged_records": sum(1 for r in tagged if r.components),
            "total_tags": sum(len(r.components) for r in tagged),
            "contingency_excluded": excluded,
            "temporal_excluded": temporal.excluded,
        },
    )
    return tagged, table, lex


def stage_stats(
    cfg: PipelineConfig, table: ContingencyTable, out: Path
) -> tuple[ChiSquareResult, ResidualMatrix]:
    result = chi_square(table, smoothing=cfg.smoothing)
    R = residuals(table, result)
    corr = residual_correlation(R)
    partition = partition_components(corr, groups=2, residual_matrix=R)

    header = artifact_header(cfg)
    stage_dir = out / STAGE_DIRS["stats"]
    write_json(
        stage_dir / "chisq.json",
        header,
        {
            "statistic": round(result.statistic, 9),
            "dof": result.dof,
            "p_value": result.p_value,
            "smoothing": result.smoothing,
            "adjusted_cells": [
                [table.row_labels[i], table.col_labels[j]] for i, j in result.adjusted_cells
            ],
        },
    )
    write_csv(
        stage_dir / "residuals.csv",
        header,
        ["component", *R.col_labels],
        [
            [name, *[f"{v:.6f}" for v in R.values[i]]]
            for i, name in enumerate(R.row_labels)
        ],
    )
    write_csv(
        stage_dir / "residual_corr.csv",
        header,
        ["component", *corr.labels],
        [
            [name, *[f"{v:.6f}" for v in corr.matrix[i]]]
            for i, name in enumerate(corr.labels)
        ],
    )
    write_csv(
        stage_dir / "linkage.csv",
        header,
        ["left", "right", "distance", "size"],
        [[l, r, f"{d:.9f}", s] for l, r, d, s in partition.linkage.merges],
    )
    groups_obj = {
        label: sorted(group) for label, group in zip(partition.labels, partition.groups)
    }
    groups_obj["flagged_zero_variance"] = sorted(corr.flagged)
    write_json(stage_dir / "groups.json", header, groups_obj)
    return result, R


# ---------------------------------------------------------------------------
# manifest and report


@dataclass
class RunManifest:
    config_hash: str
    version: str
    counts: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def check_funnel(self) -> None:
        c = self.counts
        chain = ("survivors", "kept", "candidates_unique", "candidates_raw")
        values = [c.get(k, 0) for k in chain]
        for smaller, larger in zip(values, values[1:]):
            if smaller > larger:
                raise DataError(f"funnel violation: {dict(zip(chain, values))}")


def emit_report(out: Path, cfg: PipelineConfig, manifest: RunManifest) -> dict:
    """Assemble the machine-readable report and the plain-text digest
    from the staged artifacts. Raises DataError naming any missing file."""
    header = artifact_header(cfg)
    report_dir = out / STAGE_DIRS["report"]
    survivors = manifest.counts.get("survivors", 0)

    report: dict = {
        "config_hash": manifest.config_hash,
        "version": manifest.version,
        "funnel": {
            k: manifest.counts.get(k, 0)
            for k in ("documents", "candidates_raw", "candidates_unique", "kept", "survivors")
        },
    }
    digest: list[str] = [
        "definition mining report",
        f"documents: {manifest.counts.get('documents', 0)}",
        f"candidates (raw/unique): {manifest.counts.get('candidates_raw', 0)}"
        f"/{manifest.counts.get('candidates_unique', 0)}",
        f"kept after filtering: {manifest.counts.get('kept', 0)}",
        f"survivors after dedup: {survivors}",
    ]

    if survivors == 0:
        report["note"] = "no definitions survived"
        digest.append("no definitions survived")
        write_json(report_dir / "report.json", header, report)
        write_artifact(report_dir / "report.txt", header, digest)
        return report

    comp_dir = out / STAGE_DIRS["components"]
    stats_dir = out / STAGE_DIRS["stats"]

    def top20(path: Path) -> list[list]:
        lines = read_artifact_lines(path)[1:]
        out_rows = []
        for ln in lines[:20]:
            tok, count = ln.rsplit(",", 1)
            out_rows.append([tok, int(count)])
        return out_rows

    report["top_unigrams"] = {
        "definitions": top20(comp_dir / "freq_unigram.csv"),
        "survey": top20(comp_dir / "freq_unigram_survey.csv"),
    }
    report["top_bigrams"] = {
        "definitions": top20(comp_dir / "freq_ngram_2.csv"),
        "survey": top20(comp_dir / "freq_ngram_2_survey.csv"),
    }

    res_lines = read_artifact_lines(stats_dir / "residuals.csv")
    domains = res_lines[0].split(",")[1:]
    comps, matrix = [], []
    for ln in res_lines[1:]:
        parts = ln.split(",")
        comps.append(parts[0])
        matrix.append([float(v) for v in parts[1:]])
    report["residuals"] = {"components": comps, "domains": domains, "values": matrix}
    top_by_domain = {}
    for j, dom in enumerate(domains):
        best = max(range(len(comps)), key=lambda i: (matrix[i][j], comps[i]))
        top_by_domain[dom] = {"component": comps[best], "residual": matrix[best][j]}
    report["top_component_by_domain"] = top_by_domain
    report["significant_cells"] = [
        {"component": comps[i], "domain": domains[j], "residual": matrix[i][j]}
        for i in range(len(comps))
        for j in range(len(domains))
        if abs(matrix[i][j]) > 2.0
    ]

    chisq = read_json(stats_dir / "chisq.json")
    report["chi_square"] = chisq
    groups = read_json(stats_dir / "groups.json")
    report["groups"] = groups

    temporal_rows = read_artifact_lines(comp_dir / "temporal.csv")[1:]
    temporal: dict[str, dict[str, int]] = {}
    for ln in temporal_rows:
        comp, year, count = ln.rsplit(",", 2)
        if int(count) > 0:
            temporal.setdefault(comp, {})[year] = int(count)
    report["temporal_nonzero"] = temporal

    digest.append("")
    digest.append(f"chi-square: statistic={chisq['statistic']} dof={chisq['dof']} p={chisq['p_value']:.3g}")
    for dom, info in top_by_domain.items():
        digest.append(f"top component in {dom}: {info['component']} (residual {info['residual']:+.2f})")
    for label in ("HPRT", "LTDS"):
        if label in groups:
            digest.append(f"{label}: {', '.join(groups[label])}")
    digest.append("")
    digest.append("top terms (definitions): " + ", ".join(t for t, _ in report["top_unigrams"]["definitions"][:10]))
    survey_terms = [t for t, _ in report["top_unigrams"]["survey"][:10]]
    digest.append("top terms (survey): " + (", ".join(survey_terms) if survey_terms else "(no survey documents)"))

    write_json(report_dir / "report.json", header, report)
    write_artifact(report_dir / "report.txt", header, digest)
    return report


def run_pipeline(cfg: PipelineConfig) -> RunManifest:
    """Execute ingest through report, persisting every stage's artifacts
    under the output directory. Any stage error aborts with the stage
    name; artifacts written so far are retained."""
    cfg.validate()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(config_hash=cfg.config_hash(), version=__version__)

    def run_stage(name: str, fn, *args):
        t0 = time.perf_counter()
        try:
            result = fn(*args)
        except DefminerError as exc:
            raise PipelineStageError(name, exc) from exc
        manifest.timings[name] = round(time.perf_counter() - t0, 6)
        return result

    corpus = run_stage("ingest", stage_ingest, cfg, out)
    manifest.counts["documents"] = len(corpus)

    cands, multiplicity, extract_audit = run_stage("extract", stage_extract, cfg, corpus, out)
    manifest.counts["candidates_raw"] = extract_audit["candidates_raw"]
    manifest.counts["candidates_unique"] = extract_audit["candidates_unique"]

    kept, dropped, _ = run_stage("filter", stage_filter, cfg, cands, out)
    manifest.counts["kept"] = len(kept)
    manifest.counts["dropped"] = len(dropped)

    if kept:
        vecs = run_stage("embed", stage_embed, cfg, kept, out)
        stages = run_stage("cluster", stage_cluster, cfg, vecs, out)
        manifest.counts["cluster_stages"] = len(stages)
        manifest.counts["final_clusters"] = stages[-1].k
        records, decisions = run_stage("dedup", stage_dedup, cfg, kept, stages, multiplicity, out)
        manifest.counts["fuzzy_dropped"] = len(decisions)
    else:
        records = []
        header = artifact_header(cfg)
        write_jsonl(out / STAGE_DIRS["definitions"] / "survivors.jsonl", header, [])
    manifest.counts["survivors"] = len(records)

    if records:
        tagged, table, lex = run_stage("components", stage_components, cfg, records, corpus, out)
        manifest.counts["total_tags"] = sum(len(r.components) for r in tagged)
        manifest.counts["contingency_shape"] = list(table.observed.shape)
        run_stage("stats", stage_stats, cfg, table, out)

    manifest.check_funnel()
    run_stage("report", emit_report, out, cfg, manifest)
    write_json(out / "run_manifest.json", artifact_header(cfg),
               {"config_hash": manifest.config_hash, "version": manifest.version,
                "counts": manifest.counts, "timings": manifest.timings})
    logger.info("pipeline complete: %s", manifest.counts)
    return manifest
