"""Deterministic TF-IDF sentence vectors and cosine similarity.

The baseline vectorizer stands in for neural sentence embeddings so the
pipeline is self-contained and reproducible; external vectors can be
injected through `embed_external`.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .endpoint import ClassifierEndpoint, post_json
from .errors import DataError, EndpointError

logger = logging.getLogger(__name__)

_WORD = re.compile(r"[A-Za-z0-9]+(?:-[A-Za-z0-9]+)*")


def _load_stopwords() -> frozenset[str]:
    raw = resources.files("defminer.data").joinpath("stopwords.txt").read_text("utf-8")
    return frozenset(w.strip() for w in raw.splitlines() if w.strip())


STOPWORDS = _load_stopwords()


def tokenize(
    sentence: str,
    keep_stopwords: bool = False,
    stopwords: frozenset[str] | None = None,
) -> list[str]:
    """Lowercase tokens split on non-alphanumerics, hyphen compounds
    joined with '_', tokens of length 1 dropped, stopwords dropped
    unless `keep_stopwords`."""
    stop = STOPWORDS if stopwords is None else stopwords
    out = []
    for m in _WORD.finditer(sentence):
        tok = m.group(0).lower()
        if len(tok) < 2:
            continue
        if not keep_stopwords and tok in stop:
            continue
        out.append(tok.replace("-", "_"))
    return out


def _terms(tokens: list[str], ngram_range: tuple[int, int]) -> list[str]:
    lo, hi = ngram_range
    terms = []
    for n in range(lo, hi + 1):
        if n == 1:
            terms.extend(tokens)
        else:
            terms.extend(" ".join(tokens[i:i + n]) for i in range(len(tokens) - n + 1))
    return terms


@dataclass(frozen=True)
class Vocabulary:
    """Term -> column index bijection with per-sentence document frequencies."""

    index: dict[str, int]
    doc_freq: dict[str, int]
    n_docs: int
    ngram_range: tuple[int, int] = (1, 2)

    @property
    def dim(self) -> int:
        return len(self.index)

    def idf(self, term: str) -> float:
        df = self.doc_freq.get(term, 0)
        return math.log((1 + self.n_docs) / (1 + df)) + 1.0


def fit_vectorizer(
    sentences: list[str],
    ngram_range: tuple[int, int] = (1, 2),
) -> Vocabulary:
    """Build a unigram+bigram vocabulary; indices are assigned in sorted
    term order so the fit is deterministic."""
    if not sentences:
        raise DataError("cannot fit a vectorizer on an empty sentence list")
    doc_freq: dict[str, int] = {}
    for s in sentences:
        for term in set(_terms(tokenize(s), ngram_range)):
            doc_freq[term] = doc_freq.get(term, 0) + 1
    if not doc_freq:
        raise DataError("vocabulary is empty: no sentence produced any token")
    index = {term: i for i, term in enumerate(sorted(doc_freq))}
    return Vocabulary(index=index, doc_freq=doc_freq, n_docs=len(sentences),
                      ngram_range=ngram_range)


@dataclass
class DefinitionVector:
    """A dense sentence vector with its cached Euclidean norm."""

    candidate_id: str
    values: np.ndarray
    norm: float = field(default=0.0)
    degenerate: bool = field(default=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.norm = float(np.linalg.norm(self.values))
        self.degenerate = self.norm == 0.0


def embed(sentence: str, vocab: Vocabulary, candidate_id: str = "") -> DefinitionVector:
    """TF-IDF embed: tf is the raw term count, idf = ln((1+N)/(1+df)) + 1,
    L2-normalized. Out-of-vocabulary terms are ignored; an all-OOV
    sentence yields a zero vector flagged degenerate."""
    vec = np.zeros(vocab.dim, dtype=float)
    for term in _terms(tokenize(sentence), vocab.ngram_range):
        col = vocab.index.get(term)
        if col is not None:
            vec[col] += vocab.idf(term)
    norm = float(np.linalg.norm(vec))
    if norm > 0.0:
        vec /= norm
    else:
        logger.warning("degenerate (all-OOV) sentence for %r", candidate_id or sentence[:40])
    return DefinitionVector(candidate_id=candidate_id, values=vec)


def cosine_similarity(a: DefinitionVector, b: DefinitionVector) -> float:
    """dot(a,b) / (|a|*|b|), clamped to [-1, 1].

    Identical vectors return exactly 1.0. Raises DataError on dimension
    mismatch or a zero-norm operand.
    """
    if a.values.shape != b.values.shape:
        raise DataError(
            f"dimension mismatch: {a.values.shape[0]} vs {b.values.shape[0]}"
        )
    if a.norm == 0.0 or b.norm == 0.0:
        raise DataError("degenerate vector: zero norm operand")
    if np.array_equal(a.values, b.values):
        return 1.0
    sim = float(np.dot(a.values, b.values) / (a.norm * b.norm))
    return max(-1.0, min(1.0, sim))


def embed_external(
    sentences: list[str],
    ep: ClassifierEndpoint,
    candidate_ids: list[str] | None = None,
) -> list[DefinitionVector]:
    """Fetch vectors from the embedding endpoint; fall back to the
    baseline TF-IDF embedding on transport failure.

    The wire shape is {"texts": [...]} -> {"vectors": [[...], ...]}.
    Mismatched dimensions across the batch are a data error, not a
    fallback case.
    """
    ids = candidate_ids or ["" for _ in sentences]
    if len(ids) != len(sentences):
        raise DataError("candidate_ids length must match sentences")
    if ep.enabled:
        try:
            body = post_json(ep, {"texts": list(sentences)})
            vectors = body.get("vectors")
            if not isinstance(vectors, list) or len(vectors) != len(sentences):
                raise EndpointError("endpoint returned a malformed vector batch")
        except EndpointError as exc:
            logger.warning("embedding endpoint failed, using baseline TF-IDF: %s", exc)
        else:
            dims = {len(v) for v in vectors}
            if len(dims) > 1:
                raise DataError(f"embedding dimension mismatch across batch: {sorted(dims)}")
            return [
                DefinitionVector(candidate_id=cid, values=np.asarray(v, dtype=float))
                for cid, v in zip(ids, vectors)
            ]
    vocab = fit_vectorizer(list(sentences))
    return [embed(s, vocab, cid) for s, cid in zip(sentences, ids)]
