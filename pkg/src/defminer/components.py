"""Component tagging against the synonym lexicon, frequency tables,
temporal series, and the component x domain contingency table."""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from .dedup import DefinitionRecord
from .errors import DataError
from .stats import ContingencyTable
from .vectors import tokenize

logger = logging.getLogger(__name__)

CATEGORIES = (
    "Data",
    "Analysis and services",
    "Infrastructure",
    "Interface",
    "System governance",
)

ANALYSIS_DOMAINS = ("building", "architecture", "urban", "manufacturing")


@dataclass(frozen=True)
class Component:
    name: str
    category: str
    patterns: tuple[str, ...]


@dataclass(frozen=True)
class ComponentLexicon:
    components: tuple[Component, ...]

    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.components)


@lru_cache(maxsize=4096)
def _compile_pattern(pattern: str) -> tuple[tuple[str, bool], ...]:
    """A pattern is a phrase of tokens; a trailing '*' on a word makes it
    a prefix match. Tokenization matches the sentence tokenizer."""
    parts: list[tuple[str, bool]] = []
    for word in pattern.split():
        prefix = word.endswith("*")
        toks = tokenize(word.rstrip("*"), keep_stopwords=False)
        if not toks:
            continue
        parts.extend((t, False) for t in toks[:-1])
        parts.append((toks[-1], prefix))
    if not parts:
        raise DataError(f"pattern {pattern!r} has no content tokens")
    return tuple(parts)


def load_lexicon(path: str | Path | None = None) -> ComponentLexicon:
    """Load the component lexicon; defaults to the packaged 16-component
    file. Validates unique names and known categories."""
    if path is None:
        raw = resources.files("defminer.data").joinpath("lexicon.json").read_text("utf-8")
    else:
        raw = Path(path).read_text("utf-8")
    items = json.loads(raw)
    if not items:
        raise DataError("component lexicon is empty")
    components: list[Component] = []
    seen: set[str] = set()
    for item in items:
        name = item["name"]
        if name in seen:
            raise DataError(f"duplicate component name {name!r}")
        seen.add(name)
        if item["category"] not in CATEGORIES:
            raise DataError(f"unknown category {item['category']!r} for {name!r}")
        patterns = tuple(item.get("patterns", ()))
        if not patterns:
            raise DataError(f"component {name!r} has no patterns")
        for p in patterns:
            _compile_pattern(p)
        components.append(Component(name=name, category=item["category"], patterns=patterns))
    return ComponentLexicon(components=tuple(components))


def _match_phrase(tokens: list[str], phrase: tuple[tuple[str, bool], ...]) -> bool:
    span = len(phrase)
    for i in range(len(tokens) - span + 1):
        ok = True
        for (want, prefix), tok in zip(phrase, tokens[i:i + span]):
            if prefix:
                if not tok.startswith(want):
                    ok = False
                    break
            elif tok != want:
                ok = False
                break
        if ok:
            return True
    return False


def tag_components(rec: DefinitionRecord | str, lex: ComponentLexicon) -> set[str]:
    """Components whose any synonym pattern matches the tokenized
    sentence (case-insensitive phrase matching)."""
    sentence = rec if isinstance(rec, str) else rec.sentence
    tokens = tokenize(sentence)
    tags: set[str] = set()
    for comp in lex.components:
        for pattern in comp.patterns:
            if _match_phrase(tokens, _compile_pattern(pattern)):
                tags.add(comp.name)
                break
    return tags


@dataclass(frozen=True)
class FrequencyTable:
    """Counts sorted descending, ties alphabetical; no zero rows."""

    scope: str
    rows: tuple[tuple[str, int], ...]
    total: int

    def top(self, k: int) -> list[tuple[str, int]]:
        return list(self.rows[:k])

    def as_dict(self) -> dict[str, int]:
        return dict(self.rows)


def _freq_table(counts: Counter, scope: str) -> FrequencyTable:
    rows = tuple(sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])))
    return FrequencyTable(scope=scope, rows=rows, total=sum(counts.values()))


def term_frequencies(
    records: list[DefinitionRecord] | list[str],
    stopwords: frozenset[str] | None = None,
    scope: str = "definitions",
) -> FrequencyTable:
    """Unigram counts over the shared tokenizer (stopwords removed)."""
    if not records:
        raise DataError("no records for frequency analysis")
    counts: Counter = Counter()
    for rec in records:
        sentence = rec if isinstance(rec, str) else rec.sentence
        counts.update(tokenize(sentence, stopwords=stopwords))
    return _freq_table(counts, scope)


def ngram_frequencies(
    records: list[DefinitionRecord] | list[str],
    n: int,
    scope: str = "definitions",
) -> FrequencyTable:
    """Sliding-window n-grams within sentence boundaries; stopwords are
    retained so phrases of interest survive."""
    if not (2 <= n <= 5):
        raise DataError(f"n must be in [2, 5], got {n}")
    counts: Counter = Counter()
    for rec in records:
        sentence = rec if isinstance(rec, str) else rec.sentence
        toks = tokenize(sentence, keep_stopwords=True)
        counts.update(" ".join(toks[i:i + n]) for i in range(len(toks) - n + 1))
    return _freq_table(counts, scope)


@dataclass(frozen=True)
class TemporalSeries:
    """Per-component counts per year over a fixed range; years without
    observations are stored as 0."""

    series: dict[str, dict[int, int]]
    year_range: tuple[int, int]
    excluded: int

    def counts(self, component: str) -> list[tuple[int, int]]:
        lo, hi = self.year_range
        row = self.series[component]
        return [(y, row[y]) for y in range(lo, hi + 1)]


def temporal_series(
    records: list[DefinitionRecord],
    lex: ComponentLexicon,
    year_range: tuple[int, int] = (2000, 2024),
) -> TemporalSeries:
    """Count records per (component, year); unknown-year records and
    records outside the range are excluded and tallied."""
    lo, hi = year_range
    series = {name: {y: 0 for y in range(lo, hi + 1)} for name in lex.names()}
    excluded = 0
    for rec in records:
        if rec.year is None or not (lo <= rec.year <= hi):
            excluded += 1
            continue
        for tag in tag_components(rec, lex):
            series[tag][rec.year] += 1
    return TemporalSeries(series=series, year_range=year_range, excluded=excluded)


def contingency(
    records: list[DefinitionRecord],
    lex: ComponentLexicon,
    domains: tuple[str, ...] = ANALYSIS_DOMAINS,
) -> tuple[ContingencyTable, int]:
    """Observed component x domain counts. Records whose domain is not an
    analysis domain (e.g. 'other') are excluded; the count of exclusions
    is returned alongside the table."""
    names = lex.names()
    obs = np.zeros((len(names), len(domains)), dtype=float)
    row_of = {name: i for i, name in enumerate(names)}
    col_of = {d: j for j, d in enumerate(domains)}
    excluded = 0
    for rec in records:
        j = col_of.get(rec.domain)
        if j is None:
            excluded += 1
            continue
        for tag in tag_components(rec, lex):
            obs[row_of[tag], j] += 1
    if obs.sum() <= 0:
        raise DataError("empty contingency table: no tagged records in analysis domains")
    table = ContingencyTable(observed=obs, row_labels=names, col_labels=tuple(domains))
    if excluded:
        logger.info("contingency excluded %d records outside analysis domains", excluded)
    return table, excluded
