"""Corpus loading, text normalization, and domain attribution."""

from __future__ import annotations

import json
import logging
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import DataError

logger = logging.getLogger(__name__)

DOMAINS = ("building", "architecture", "urban", "manufacturing", "other")
SOURCES = ("article", "survey")
YEAR_MIN, YEAR_MAX = 1900, 2100


def normalize_text(text: str) -> str:
    """Normalize to NFC, drop control characters, collapse whitespace runs.

    Runs that contain a newline collapse to a single newline so paragraph
    boundaries survive for sentence segmentation; all other runs collapse
    to a single space. Idempotent.
    """
    text = unicodedata.normalize("NFC", text)
    text = "".join(
        ch for ch in text
        if ch in ("\n", "\t", "\r") or unicodedata.category(ch) != "Cc"
    )
    text = re.sub(r"\s*\n\s*", "\n", text)
    text = re.sub(r"[^\S\n]+", " ", text)
    return text.strip()


@dataclass(frozen=True)
class Document:
    """One corpus item. `year` is None when unknown; `domain` is resolved."""

    id: str
    title: str
    year: int | None
    venue: str
    subject: str
    domain: str
    source: str
    text: str


@dataclass(frozen=True)
class Corpus:
    documents: tuple[Document, ...]
    manifest: dict

    def __len__(self) -> int:
        return len(self.documents)


def build_manifest(documents: tuple[Document, ...]) -> dict:
    """Recompute per-source/domain/year counts from the documents."""
    by_source = Counter(d.source for d in documents)
    by_domain = Counter(d.domain for d in documents)
    by_year = Counter("unknown" if d.year is None else str(d.year) for d in documents)
    return {
        "total": len(documents),
        "by_source": dict(sorted(by_source.items())),
        "by_domain": dict(sorted(by_domain.items())),
        "by_year": dict(sorted(by_year.items())),
    }


def load_domain_rules(path: str | Path | None = None) -> list[dict]:
    """Load ordered keyword rules; defaults to the packaged rule file."""
    if path is None:
        raw = resources.files("defminer.data").joinpath("domain_rules.json").read_text("utf-8")
    else:
        raw = Path(path).read_text("utf-8")
    rules = json.loads(raw)
    if not rules:
        raise DataError("domain rules must be non-empty")
    for rule in rules:
        if rule["domain"] not in DOMAINS:
            raise DataError(f"unknown domain in rules: {rule['domain']!r}")
        if not rule.get("keywords"):
            raise DataError(f"rule for {rule['domain']!r} has no keywords")
    return rules


def _match_domain(title: str, subject: str, venue: str, rules: list[dict]) -> str:
    haystack = f"{title} {subject} {venue}".lower()
    for rule in rules:
        if any(kw.lower() in haystack for kw in rule["keywords"]):
            return rule["domain"]
    return "other"


def assign_domain(doc: Document, rules: list[dict]) -> str:
    """First rule whose any keyword appears (case-insensitive) in
    title+subject+venue wins; falls back to `other`."""
    if not rules:
        raise DataError("domain rules must be non-empty")
    return _match_domain(doc.title, doc.subject, doc.venue, rules)


def _parse_record(obj: dict, lineno: int) -> dict:
    if not isinstance(obj, dict):
        raise DataError(f"line {lineno}: record is not a JSON object")
    doc_id = obj.get("id")
    if not isinstance(doc_id, str) or not doc_id:
        raise DataError(f"line {lineno}: missing or empty 'id'")
    text = obj.get("text")
    if not isinstance(text, str):
        raise DataError(f"line {lineno}: missing 'text' for id {doc_id!r}")
    year = obj.get("year")
    if year is not None:
        if not isinstance(year, int) or isinstance(year, bool):
            raise DataError(f"line {lineno}: year must be an integer or null")
        if not (YEAR_MIN <= year <= YEAR_MAX):
            raise DataError(f"line {lineno}: year {year} outside [{YEAR_MIN}, {YEAR_MAX}]")
    source = obj.get("source", "article")
    if source not in SOURCES:
        raise DataError(f"line {lineno}: unknown source {source!r}")
    domain = obj.get("domain")
    if domain is not None and domain not in DOMAINS:
        raise DataError(f"line {lineno}: unknown domain {domain!r}")
    return {
        "id": doc_id,
        "title": str(obj.get("title") or ""),
        "year": year,
        "venue": str(obj.get("venue") or ""),
        "subject": str(obj.get("subject") or ""),
        "domain": domain,
        "source": source,
        "text": text,
    }


def load_corpus(
    path: str | Path,
    format: str = "jsonl",
    domain_rules: list[dict] | None = None,
) -> Corpus:
    """Load a JSONL corpus, normalize every document, resolve domains.

    A `domain` present in the input overrides rule-based assignment. Lines
    starting with '#' (artifact metadata headers) and blank lines are
    skipped. Raises DataError on malformed lines, duplicate ids, empty
    text, or an empty file.
    """
    if format != "jsonl":
        raise DataError(f"unsupported corpus format {format!r}")
    path = Path(path)
    if not path.exists():
        raise DataError(f"corpus file not found: {path}")
    if domain_rules is None:
        domain_rules = load_domain_rules()

    documents: list[Document] = []
    seen: set[str] = set()
    resolution = Counter()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"line {lineno}: malformed JSON ({exc.msg})") from exc
            rec = _parse_record(obj, lineno)
            if rec["id"] in seen:
                raise DataError(f"duplicate id {rec['id']} (line {lineno})")
            seen.add(rec["id"])
            text = normalize_text(rec["text"])
            if not text:
                raise DataError(f"line {lineno}: empty text for id {rec['id']!r}")
            if rec["domain"] is not None:
                domain = rec["domain"]
                resolution["metadata"] += 1
            else:
                domain = _match_domain(rec["title"], rec["subject"], rec["venue"], domain_rules)
                resolution["rules" if domain != "other" else "fallback"] += 1
            documents.append(
                Document(
                    id=rec["id"],
                    title=rec["title"],
                    year=rec["year"],
                    venue=rec["venue"],
                    subject=rec["subject"],
                    domain=domain,
                    source=rec["source"],
                    text=text,
                )
            )
    if not documents:
        raise DataError(f"empty corpus file: {path}")
    logger.info(
        "loaded %d documents (domain resolution: %s)",
        len(documents),
        dict(sorted(resolution.items())),
    )
    docs = tuple(documents)
    return Corpus(documents=docs, manifest=build_manifest(docs))


def document_to_json(doc: Document) -> dict:
    return {
        "id": doc.id,
        "title": doc.title,
        "year": doc.year,
        "venue": doc.venue,
        "subject": doc.subject,
        "domain": doc.domain,
        "source": doc.source,
        "text": doc.text,
    }
