"""Fuzzy near-duplicate removal within clusters.

The match score between two strings is 1 - lev(s1, s2) / max(len(s1),
len(s2)), with the edit distance counting single-character insertions,
deletions, and substitutions over Unicode scalar values.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .errors import DataError
from .extract import DefinitionCandidate, fold_text

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.90


def levenshtein(s1: str, s2: str) -> int:
    """Exact edit distance (insert / delete / substitute, unit costs)."""
    # trimming a common prefix/suffix never changes the distance
    lo = 0
    hi1, hi2 = len(s1), len(s2)
    while lo < hi1 and lo < hi2 and s1[lo] == s2[lo]:
        lo += 1
    while hi1 > lo and hi2 > lo and s1[hi1 - 1] == s2[hi2 - 1]:
        hi1 -= 1
        hi2 -= 1
    a, b = s1[lo:hi1], s2[lo:hi2]
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i] + [0] * len(b)
        for j, cb in enumerate(b, 1):
            cost = 0 if ca == cb else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
        prev = cur
    return prev[-1]


def fuzzy_match(s1: str, s2: str) -> float:
    """1 - lev/max(len); two empty strings are defined as identical."""
    m = max(len(s1), len(s2))
    if m == 0:
        logger.debug("fuzzy_match on two empty strings (degenerate), scoring 1.0")
        return 1.0
    return 1.0 - levenshtein(s1, s2) / m


def _score_at_least(s1: str, s2: str, threshold: float) -> float | None:
    """Return the fuzzy score when it reaches the threshold, else None.

    Cheap length bound first (lev >= |len1 - len2|), then a row-min
    cutoff in the DP so dissimilar pairs abort early.
    """
    m = max(len(s1), len(s2))
    if m == 0:
        return 1.0
    kmax = int((1.0 - threshold) * m + 1e-12)
    if abs(len(s1) - len(s2)) > kmax:
        return None
    lo = 0
    hi1, hi2 = len(s1), len(s2)
    while lo < hi1 and lo < hi2 and s1[lo] == s2[lo]:
        lo += 1
    while hi1 > lo and hi2 > lo and s1[hi1 - 1] == s2[hi2 - 1]:
        hi1 -= 1
        hi2 -= 1
    a, b = s1[lo:hi1], s2[lo:hi2]
    if len(a) < len(b):
        a, b = b, a
    if not b:
        dist = len(a)
    else:
        prev = list(range(len(b) + 1))
        dist = None
        for i, ca in enumerate(a, 1):
            cur = [i] + [0] * len(b)
            for j, cb in enumerate(b, 1):
                cost = 0 if ca == cb else 1
                cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
            if min(cur) > kmax:
                return None
            prev = cur
        dist = prev[-1]
    if dist > kmax:
        return None
    score = 1.0 - dist / m
    return score if score >= threshold else None


@dataclass(frozen=True)
class DedupDecision:
    kept_id: str
    dropped_id: str
    score: float
    cluster: int


@dataclass
class DefinitionRecord:
    """A surviving definition with provenance and (later) component tags."""

    id: str
    doc_id: str
    sentence: str
    start: int
    end: int
    marker: str
    year: int | None
    domain: str
    multiplicity: int = 1
    cluster: int = 0
    components: tuple[str, ...] = field(default_factory=tuple)


def dedup_cluster(
    members: list[DefinitionCandidate],
    threshold: float,
    cluster: int = 0,
    normalize: bool = True,
) -> tuple[list[DefinitionCandidate], list[DedupDecision]]:
    """Greedy sweep in the given (corpus) order: a candidate is dropped
    when it scores >= threshold against any earlier survivor in the
    cluster; the decision records the triggering pair."""
    if not (0.0 < threshold <= 1.0):
        raise DataError(f"threshold must be in (0, 1], got {threshold}")
    survivors: list[DefinitionCandidate] = []
    folded: list[str] = []
    decisions: list[DedupDecision] = []
    for cand in members:
        probe = fold_text(cand.sentence) if normalize else cand.sentence
        dropped = False
        for kept, kept_folded in zip(survivors, folded):
            score = _score_at_least(kept_folded, probe, threshold)
            if score is not None:
                decisions.append(
                    DedupDecision(kept_id=kept.cid, dropped_id=cand.cid,
                                  score=score, cluster=cluster)
                )
                dropped = True
                break
        if not dropped:
            survivors.append(cand)
            folded.append(probe)
    return survivors, decisions


def dedup_within_clusters(
    cands: list[DefinitionCandidate],
    labels: dict[str, int],
    threshold: float = DEFAULT_THRESHOLD,
    normalize: bool = True,
) -> tuple[list[DefinitionCandidate], list[DedupDecision]]:
    """Apply the per-cluster sweep; clusters never interact. Survivors
    are returned in corpus order."""
    by_cluster: dict[int, list[DefinitionCandidate]] = {}
    for c in cands:
        if c.cid not in labels:
            raise DataError(f"candidate {c.cid} has no cluster assignment")
        by_cluster.setdefault(labels[c.cid], []).append(c)
    surviving_ids: set[str] = set()
    decisions: list[DedupDecision] = []
    for cluster_idx in sorted(by_cluster):
        survivors, dec = dedup_cluster(
            by_cluster[cluster_idx], threshold, cluster=cluster_idx, normalize=normalize
        )
        surviving_ids.update(s.cid for s in survivors)
        decisions.extend(dec)
    kept = [c for c in cands if c.cid in surviving_ids]
    return kept, decisions


def cross_cluster_duplicates(
    survivors: list[DefinitionCandidate],
    labels: dict[str, int],
    threshold: float = DEFAULT_THRESHOLD,
    normalize: bool = True,
) -> list[tuple[str, str, float]]:
    """Diagnostics only: pairs of survivors from different clusters that
    would have matched at the threshold. Never removes anything."""
    folded = [fold_text(c.sentence) if normalize else c.sentence for c in survivors]
    out: list[tuple[str, str, float]] = []
    for i in range(len(survivors)):
        for j in range(i + 1, len(survivors)):
            if labels[survivors[i].cid] == labels[survivors[j].cid]:
                continue
            score = _score_at_least(folded[i], folded[j], threshold)
            if score is not None:
                out.append((survivors[i].cid, survivors[j].cid, score))
    return out
