"""Incomplete-definition filtering: deterministic heuristics plus an
optional external classifier with heuristic fallback."""

from __future__ import annotations

import json
import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .endpoint import ClassifierEndpoint, post_json
from .errors import DataError, EndpointError
from .extract import DefinitionCandidate, PatternTemplate, build_template, definition_tail, fold_text
from .vectors import tokenize

logger = logging.getLogger(__name__)

LABEL_COMPLETE = "complete"
LABEL_INCOMPLETE = "incomplete"


@dataclass(frozen=True)
class FilterRules:
    min_content_tokens: int = 6
    buzz_phrases: tuple[str, ...] = ()


def load_filter_rules(path: str | Path | None = None) -> FilterRules:
    """Load filter rules; defaults to the packaged rule file."""
    if path is None:
        raw = resources.files("defminer.data").joinpath("filter_rules.json").read_text("utf-8")
    else:
        raw = Path(path).read_text("utf-8")
    obj = json.loads(raw)
    return FilterRules(
        min_content_tokens=int(obj.get("min_content_tokens", 6)),
        buzz_phrases=tuple(fold_text(p) for p in obj.get("buzz_phrases", [])),
    )


@dataclass(frozen=True)
class FilterVerdict:
    candidate_id: str
    label: str
    rule: str
    confidence: float


def heuristic_filter(
    c: DefinitionCandidate,
    rules: FilterRules,
    template: PatternTemplate | None = None,
) -> FilterVerdict:
    """Label a candidate incomplete when any deterministic rule fires.

    Rules, in reporting order: a buzz phrase occurs in the tail after the
    marker; the tail has no content token at all; the tail has fewer than
    `min_content_tokens` content tokens. Deterministic verdicts carry
    confidence 1.0.
    """
    tmpl = template or build_template()
    tail = definition_tail(c.sentence, tmpl)
    folded = fold_text(tail)
    content = tokenize(tail)
    if any(p in folded for p in rules.buzz_phrases):
        return FilterVerdict(c.cid, LABEL_INCOMPLETE, "buzz_phrase", 1.0)
    if not content:
        return FilterVerdict(c.cid, LABEL_INCOMPLETE, "no_content", 1.0)
    if len(content) < rules.min_content_tokens:
        return FilterVerdict(c.cid, LABEL_INCOMPLETE, "short_tail", 1.0)
    return FilterVerdict(c.cid, LABEL_COMPLETE, "heuristic", 1.0)


def classify_external(
    c: DefinitionCandidate,
    ep: ClassifierEndpoint,
    rules: FilterRules,
    template: PatternTemplate | None = None,
    allow_fallback: bool = True,
) -> FilterVerdict:
    """Ask the external classifier; fall back to the heuristics on failure.

    A disabled endpoint is never contacted and yields the plain heuristic
    verdict. Any transport or contract failure yields the heuristic
    verdict with rule="fallback" (or raises EndpointError when fallback
    is not permitted).
    """
    if not ep.enabled:
        return heuristic_filter(c, rules, template)
    try:
        body = post_json(ep, {"text": c.sentence, "task": "definition_completeness"})
        label = body.get("label")
        confidence = body.get("confidence")
        if label not in (LABEL_COMPLETE, LABEL_INCOMPLETE):
            raise EndpointError(f"endpoint returned unknown label {label!r}")
        if not isinstance(confidence, (int, float)) or not (0.0 <= confidence <= 1.0):
            raise EndpointError(f"endpoint returned invalid confidence {confidence!r}")
        return FilterVerdict(c.cid, label, "external", float(confidence))
    except EndpointError as exc:
        if not allow_fallback:
            raise
        logger.warning("classifier endpoint failed for %s, using heuristics: %s", c.cid, exc)
        verdict = heuristic_filter(c, rules, template)
        return FilterVerdict(c.cid, verdict.label, "fallback", verdict.confidence)


def classify_all(
    cands: list[DefinitionCandidate],
    ep: ClassifierEndpoint,
    rules: FilterRules,
    template: PatternTemplate | None = None,
    allow_fallback: bool = True,
    max_workers: int = 4,
) -> list[FilterVerdict]:
    """Produce one verdict per candidate, in candidate order.

    External calls may run concurrently; results are merged by input
    order so the output is deterministic regardless of completion order.
    """
    if not ep.enabled:
        return [heuristic_filter(c, rules, template) for c in cands]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(
            pool.map(
                lambda c: classify_external(c, ep, rules, template, allow_fallback),
                cands,
            )
        )


def apply_filter(
    cands: list[DefinitionCandidate],
    verdicts: list[FilterVerdict],
) -> tuple[list[DefinitionCandidate], list[DefinitionCandidate], dict[str, int]]:
    """Partition candidates into (kept, dropped) preserving order.

    The audit counts verdicts per rule and sums to len(cands). Raises
    DataError on a missing or duplicated verdict.
    """
    by_id: dict[str, FilterVerdict] = {}
    for v in verdicts:
        if v.candidate_id in by_id:
            raise DataError(f"duplicate verdict for candidate {v.candidate_id}")
        by_id[v.candidate_id] = v
    kept: list[DefinitionCandidate] = []
    dropped: list[DefinitionCandidate] = []
    audit: Counter = Counter()
    for c in cands:
        v = by_id.get(c.cid)
        if v is None:
            raise DataError(f"missing verdict for candidate {c.cid}")
        audit[v.rule] += 1
        if v.label == LABEL_COMPLETE:
            kept.append(c)
        else:
            dropped.append(c)
    return kept, dropped, dict(sorted(audit.items()))
