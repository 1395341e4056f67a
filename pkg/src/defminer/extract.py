"""Sentence segmentation and pattern-based definition candidate extraction."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .corpus import Document
from .errors import DataError

DEFAULT_TERM = "digital twin"
DEFAULT_COPULAS = ("is", "are", "can be", "could be")
# The empty marker admits the bare copula form "X is ...".
DEFAULT_MARKERS = ("defined as", "described as", "characterized by", "")

# Periods ending these tokens do not terminate a sentence.
ABBREVIATIONS = ("e.g.", "i.e.", "et al.", "fig.", "vs.")

_TERMINATOR = re.compile(r"[.?!](?=\s|$)|\n")


def fold_text(s: str) -> str:
    """Case-fold and collapse whitespace; the comparison form for dedup."""
    return " ".join(s.casefold().split())


def _ends_with_abbreviation(text: str, period_idx: int) -> bool:
    head = text[: period_idx + 1].casefold()
    for abbr in ABBREVIATIONS:
        if head.endswith(abbr):
            start = period_idx + 1 - len(abbr)
            if start == 0 or not head[start - 1].isalnum():
                return True
    return False


def split_sentences(text: str) -> list[tuple[str, tuple[int, int]]]:
    """Segment text into (sentence, (start, end)) spans.

    Boundaries are '.', '?', '!' followed by whitespace or end of text,
    and newlines. A fixed abbreviation list suppresses false splits.
    Spans exclude surrounding whitespace and slice back to the sentence.
    """
    spans: list[tuple[str, tuple[int, int]]] = []
    seg_start = 0

    def flush(end: int) -> None:
        nonlocal seg_start
        raw = text[seg_start:end]
        lead = len(raw) - len(raw.lstrip())
        trail = len(raw) - len(raw.rstrip())
        s, e = seg_start + lead, end - trail
        if e > s:
            spans.append((text[s:e], (s, e)))
        seg_start = end

    for m in _TERMINATOR.finditer(text):
        idx = m.start()
        if text[idx] == "\n":
            flush(idx)
            seg_start = idx + 1
        elif text[idx] == "." and _ends_with_abbreviation(text, idx):
            continue
        else:
            flush(idx + 1)
    flush(len(text))
    return spans


@dataclass(frozen=True)
class PatternTemplate:
    """A (term)(copula)(marker) definition pattern with its compiled regex."""

    term: str
    plural: bool
    copulas: tuple[str, ...]
    markers: tuple[str, ...]
    compiled: str

    def regex(self) -> re.Pattern:
        return re.compile(self.compiled, re.IGNORECASE)


def _phrase_rx(phrase: str) -> str:
    return r"\s+".join(re.escape(w) for w in phrase.split())


def build_template(
    term: str = DEFAULT_TERM,
    plural: bool = True,
    copulas: tuple[str, ...] = DEFAULT_COPULAS,
    markers: tuple[str, ...] = DEFAULT_MARKERS,
) -> PatternTemplate:
    """Compile the cross-product of copulas x markers into one pattern.

    Matches at word boundaries, case-insensitive, with arbitrary
    interleaving whitespace; requires a non-empty tail after the marker
    (or after the copula for the bare form).
    """
    if not term.strip():
        raise DataError("pattern term must be non-empty")
    if not copulas:
        raise DataError("at least one copula is required")
    named = [m for m in markers if m]
    term_rx = r"\b" + _phrase_rx(term) + (r"(?:s)?" if plural else "") + r"\b"
    copula_rx = "(?:" + "|".join(_phrase_rx(c) for c in copulas) + ")"
    if named:
        marker_rx = "(?:(?P<marker>" + "|".join(_phrase_rx(m) for m in named) + r")\s+)"
        if "" in markers:
            marker_rx += "?"
    else:
        marker_rx = ""
    compiled = term_rx + r"\s+" + copula_rx + r"\s+" + marker_rx + r"(?P<tail>\S.*)"
    return PatternTemplate(
        term=term, plural=plural, copulas=tuple(copulas), markers=tuple(markers),
        compiled=compiled,
    )


@dataclass(frozen=True)
class DefinitionCandidate:
    """One sentence matching the definition pattern, with provenance."""

    doc_id: str
    sentence: str
    start: int
    end: int
    marker: str
    year: int | None
    domain: str

    @property
    def cid(self) -> str:
        return f"{self.doc_id}:{self.start}:{self.end}"


def extract_candidates(doc: Document, tmpl: PatternTemplate) -> list[DefinitionCandidate]:
    """One candidate per sentence matching the template, in text order.

    The candidate carries the full sentence, not just the tail after
    the marker.
    """
    rx = tmpl.regex()
    out: list[DefinitionCandidate] = []
    for sentence, (start, end) in split_sentences(doc.text):
        m = rx.search(sentence)
        if m is None:
            continue
        marker = " ".join((m.group("marker") or "").lower().split())
        out.append(
            DefinitionCandidate(
                doc_id=doc.id,
                sentence=sentence,
                start=start,
                end=end,
                marker=marker,
                year=doc.year,
                domain=doc.domain,
            )
        )
    return out


def definition_tail(sentence: str, tmpl: PatternTemplate) -> str:
    """The clause after the matched marker (or copula for the bare form).

    Falls back to the whole sentence when the template no longer matches.
    """
    m = tmpl.regex().search(sentence)
    if m is None:
        return sentence
    return m.group("tail")


def dedup_exact(
    cands: list[DefinitionCandidate],
) -> tuple[list[DefinitionCandidate], dict[str, int]]:
    """Drop byte-identical sentences after case-folding and whitespace
    collapse; keep the earliest occurrence and record multiplicity per
    kept candidate id."""
    kept: list[DefinitionCandidate] = []
    multiplicity: dict[str, int] = {}
    first_by_key: dict[str, str] = {}
    for c in cands:
        key = fold_text(c.sentence)
        if key in first_by_key:
            multiplicity[first_by_key[key]] += 1
        else:
            first_by_key[key] = c.cid
            multiplicity[c.cid] = 1
            kept.append(c)
    return kept, multiplicity


def candidate_to_json(c: DefinitionCandidate) -> dict:
    return {
        "doc_id": c.doc_id,
        "sentence": c.sentence,
        "start": c.start,
        "end": c.end,
        "marker": c.marker,
        "year": c.year,
        "domain": c.domain,
    }


def candidate_from_json(obj: dict) -> DefinitionCandidate:
    return DefinitionCandidate(
        doc_id=obj["doc_id"],
        sentence=obj["sentence"],
        start=int(obj["start"]),
        end=int(obj["end"]),
        marker=obj.get("marker", ""),
        year=obj.get("year"),
        domain=obj.get("domain", "other"),
    )
