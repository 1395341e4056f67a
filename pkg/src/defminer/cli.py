"""Command-line interface. Subcommands mirror the pipeline stages so
each stage is independently runnable; `run` chains them all.

Exit codes: 0 success, 1 usage error, 2 data error, 3 endpoint failure
with fallback disabled.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .corpus import load_corpus, load_domain_rules, normalize_text
from .errors import (
    EXIT_DATA,
    EXIT_ENDPOINT,
    EXIT_OK,
    EXIT_USAGE,
    DataError,
    DefminerError,
    EndpointError,
    PipelineStageError,
)
from .pipeline import (
    PipelineConfig,
    emit_report,
    read_contingency_csv,
    read_json,
    read_jsonl,
    run_pipeline,
    stage_cluster,
    stage_components,
    stage_dedup,
    stage_embed,
    stage_extract,
    stage_filter,
    stage_ingest,
    stage_stats,
    RunManifest,
)
from .extract import candidate_from_json
from .pipeline import record_from_json
from .vectors import DefinitionVector

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default="defminer_out", help="output directory")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("-v", "--verbose", action="store_true")


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    overrides = {
        "corpus": getattr(args, "corpus", None),
        "out_dir": getattr(args, "out", None),
        "term": getattr(args, "term", None),
        "domain_rules": getattr(args, "domain_rules", None),
        "filter_rules": getattr(args, "rules", None),
        "lexicon": getattr(args, "lexicon", None),
        "seed": getattr(args, "seed", None),
        "dedup_threshold": getattr(args, "threshold", None),
        "smoothing": getattr(args, "smoothing", None),
        "restage": getattr(args, "restage", None),
    }
    if getattr(args, "ks", None):
        overrides["ks"] = tuple(int(k) for k in args.ks.split(","))
    if getattr(args, "endpoint", None):
        overrides["endpoint_url"] = args.endpoint
        overrides["endpoint_enabled"] = True
    if getattr(args, "no_fallback", False):
        overrides["no_fallback"] = True
    if getattr(args, "no_plural", False):
        overrides["plural"] = False
    if getattr(args, "embedding", None):
        overrides["embedding"] = args.embedding
    config_path = getattr(args, "config", None)
    if config_path:
        return PipelineConfig.from_json(config_path, overrides)
    cfg = PipelineConfig()
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    return cfg.normalized()


def build_parser() -> _Parser:
    parser = _Parser(prog="defminer", description=__doc__)
    parser.add_argument("--version", action="version", version=f"defminer {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load, validate, and normalize a corpus")
    p.add_argument("--input", required=True, help="corpus JSONL")
    p.add_argument("--domain-rules", dest="domain_rules")
    _add_common(p)

    p = sub.add_parser("extract", help="extract definition candidates")
    p.add_argument("--corpus", required=True, help="normalized corpus JSONL")
    p.add_argument("--term", default="digital twin")
    p.add_argument("--no-plural", action="store_true")
    _add_common(p)

    p = sub.add_parser("filter", help="drop incomplete definitions")
    p.add_argument("--candidates", required=True)
    p.add_argument("--rules")
    p.add_argument("--endpoint")
    p.add_argument("--no-fallback", action="store_true")
    _add_common(p)

    p = sub.add_parser("embed", help="vectorize kept candidates")
    p.add_argument("--candidates", required=True)
    p.add_argument("--endpoint")
    p.add_argument("--embedding", choices=("baseline", "external"))
    _add_common(p)

    p = sub.add_parser("cluster", help="staged k-means over vectors")
    p.add_argument("--vectors", required=True)
    p.add_argument("--ks", default="400,100,50")
    p.add_argument("--restage", choices=("centroids", "raw"))
    _add_common(p)

    p = sub.add_parser("dedup", help="fuzzy dedup within clusters")
    p.add_argument("--candidates", required=True, help="kept.jsonl")
    p.add_argument("--assignment", required=True, help="assignments.jsonl")
    p.add_argument("--threshold", type=float, default=0.90)
    _add_common(p)

    p = sub.add_parser("components", help="tag components, frequencies, contingency")
    p.add_argument("--definitions", required=True, help="survivors.jsonl")
    p.add_argument("--lexicon")
    p.add_argument("--corpus", help="normalized corpus for the survey scope")
    _add_common(p)

    p = sub.add_parser("stats", help="chi-square, residuals, correlation, groups")
    p.add_argument("--contingency", required=True)
    p.add_argument("--smoothing", choices=("none", "add_half_zero_cells"))
    _add_common(p)

    p = sub.add_parser("report", help="assemble the report from a run directory")
    p.add_argument("--run-dir", required=True)
    _add_common(p)

    p = sub.add_parser("run", help="run the whole pipeline")
    p.add_argument("--config", help="JSON config; flags override")
    p.add_argument("--corpus")
    p.add_argument("--term")
    p.add_argument("--ks")
    p.add_argument("--threshold", type=float)
    p.add_argument("--lexicon")
    p.add_argument("--domain-rules", dest="domain_rules")
    p.add_argument("--rules")
    p.add_argument("--endpoint")
    p.add_argument("--no-fallback", action="store_true")
    p.add_argument("--embedding", choices=("baseline", "external"))
    p.add_argument("--smoothing", choices=("none", "add_half_zero_cells"))
    p.add_argument("--restage", choices=("centroids", "raw"))
    _add_common(p)

    p = sub.add_parser("convert-txt", help="directory of .txt + sidecar .json to corpus JSONL")
    p.add_argument("--dir", required=True)
    p.add_argument("--output", required=True)
    _add_common(p)
    return parser


def _cmd_ingest(args) -> int:
    cfg = _config_from_args(args)
    cfg.corpus = args.input
    stage_ingest(cfg, Path(cfg.out_dir))
    return EXIT_OK


def _cmd_extract(args) -> int:
    cfg = _config_from_args(args)
    cfg.corpus = args.corpus
    corpus = load_corpus(args.corpus, domain_rules=load_domain_rules(cfg.domain_rules))
    stage_extract(cfg, corpus, Path(cfg.out_dir))
    return EXIT_OK


def _cmd_filter(args) -> int:
    cfg = _config_from_args(args)
    cands = [candidate_from_json(o) for o in read_jsonl(Path(args.candidates))]
    stage_filter(cfg, cands, Path(cfg.out_dir))
    return EXIT_OK


def _cmd_embed(args) -> int:
    cfg = _config_from_args(args)
    cands = [candidate_from_json(o) for o in read_jsonl(Path(args.candidates))]
    stage_embed(cfg, cands, Path(cfg.out_dir))
    return EXIT_OK


def _cmd_cluster(args) -> int:
    cfg = _config_from_args(args)
    vecs = [
        DefinitionVector(candidate_id=o["candidate_id"], values=o["values"])
        for o in read_jsonl(Path(args.vectors))
    ]
    stage_cluster(cfg, vecs, Path(cfg.out_dir))
    return EXIT_OK


def _final_stage_labels(assignment_path: Path) -> dict[str, int]:
    rows = read_jsonl(assignment_path)
    if not rows:
        raise DataError(f"no assignments in {assignment_path}")
    last = max(r["stage"] for r in rows)
    return {r["candidate_id"]: r["cluster"] for r in rows if r["stage"] == last}


def _cmd_dedup(args) -> int:
    cfg = _config_from_args(args)
    cands = [candidate_from_json(o) for o in read_jsonl(Path(args.candidates))]
    labels = _final_stage_labels(Path(args.assignment))

    class _Stage:
        def __init__(self, labels):
            self.labels = labels

    stage_dedup(cfg, cands, [_Stage(labels)], {}, Path(cfg.out_dir))
    return EXIT_OK


def _cmd_components(args) -> int:
    cfg = _config_from_args(args)
    records = [record_from_json(o) for o in read_jsonl(Path(args.definitions))]
    if args.corpus:
        corpus = load_corpus(args.corpus)
    else:
        from .corpus import Corpus

        corpus = Corpus(documents=(), manifest={"total": 0})
    stage_components(cfg, records, corpus, Path(cfg.out_dir))
    return EXIT_OK


def _cmd_stats(args) -> int:
    cfg = _config_from_args(args)
    table = read_contingency_csv(Path(args.contingency))
    stage_stats(cfg, table, Path(cfg.out_dir))
    return EXIT_OK


def _cmd_report(args) -> int:
    cfg = _config_from_args(args)
    run_dir = Path(args.run_dir)
    manifest_obj = read_json(run_dir / "run_manifest.json")
    manifest = RunManifest(
        config_hash=manifest_obj["config_hash"],
        version=manifest_obj["version"],
        counts=manifest_obj["counts"],
        timings=manifest_obj["timings"],
    )
    emit_report(run_dir, cfg, manifest)
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = _config_from_args(args)
    manifest = run_pipeline(cfg)
    print(json.dumps({"counts": manifest.counts, "out_dir": cfg.out_dir}, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_convert_txt(args) -> int:
    """Build a corpus JSONL from <name>.txt files with <name>.json sidecars."""
    src = Path(args.dir)
    if not src.is_dir():
        raise DataError(f"not a directory: {src}")
    out_path = Path(args.output)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    rows = []
    for txt in sorted(src.glob("*.txt")):
        meta_path = txt.with_suffix(".json")
        meta = json.loads(meta_path.read_text("utf-8")) if meta_path.exists() else {}
        rows.append(
            {
                "id": meta.get("id", txt.stem),
                "title": meta.get("title", txt.stem),
                "year": meta.get("year"),
                "venue": meta.get("venue", ""),
                "subject": meta.get("subject", ""),
                "domain": meta.get("domain"),
                "source": meta.get("source", "article"),
                "text": normalize_text(txt.read_text("utf-8")),
            }
        )
    if not rows:
        raise DataError(f"no .txt files under {src}")
    with out_path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    print(f"wrote {len(rows)} documents to {out_path}")
    return EXIT_OK


_COMMANDS = {
    "ingest": _cmd_ingest,
    "extract": _cmd_extract,
    "filter": _cmd_filter,
    "embed": _cmd_embed,
    "cluster": _cmd_cluster,
    "dedup": _cmd_dedup,
    "components": _cmd_components,
    "stats": _cmd_stats,
    "report": _cmd_report,
    "run": _cmd_run,
    "convert-txt": _cmd_convert_txt,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except PipelineStageError as exc:
        cause = exc.cause
        print(f"defminer: {exc}", file=sys.stderr)
        return EXIT_ENDPOINT if isinstance(cause, EndpointError) else EXIT_DATA
    except EndpointError as exc:
        print(f"defminer: endpoint error: {exc}", file=sys.stderr)
        return EXIT_ENDPOINT
    except DefminerError as exc:
        print(f"defminer: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
