"""Similarity measures scoring an (original, generated) text pair in [0, 1].

Two vector measures (distance-based Euclidean similarity and cosine) work on
embeddings; two token measures (unigram Jaccard and a sentence-level BLEU
variant) work on whitespace tokens.  `score_pair` bundles all four for the
admission gate.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from .textproc import tokenize

MAX_NGRAM_ORDER = 4

# Substituted for any zero modified n-gram precision so the geometric mean
# stays finite instead of collapsing the whole score to zero.
BLEU_SMOOTHING_EPS = 1e-9

METRIC_NAMES = ("euclidean", "cosine", "jaccard", "bleu")


class DegenerateEmbeddingError(ValueError):
    """Cosine similarity is undefined for a zero-norm embedding."""


@dataclass(frozen=True)
class EmbeddingVector:
    """Immutable embedding with its L2 norm computed once at construction."""

    values: tuple[float, ...]
    norm: float

    @classmethod
    def of(cls, values) -> "EmbeddingVector":
        vals = tuple(float(v) for v in values)
        return cls(values=vals, norm=math.sqrt(math.fsum(v * v for v in vals)))

    @property
    def dim(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class SimilarityScores:
    """The four gate scores for one record, each in [0, 1]."""

    euclidean: float
    cosine: float
    jaccard: float
    bleu: float

    def get(self, metric: str) -> float:
        if metric not in METRIC_NAMES:
            raise KeyError(f"unknown metric {metric!r}")
        return getattr(self, metric)

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_NAMES}


def _check_dims(a: EmbeddingVector, b: EmbeddingVector) -> None:
    if a.dim != b.dim:
        raise ValueError(f"embedding dimension mismatch: {a.dim} vs {b.dim}")


def euclidean_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """1 / (1 + L2 distance), mapping distance 0 to 1 and growing distance to 0."""
    _check_dims(a, b)
    dist = math.sqrt(math.fsum((x - y) ** 2 for x, y in zip(a.values, b.values)))
    return 1.0 / (1.0 + dist)


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Raw cosine in [-1, 1].  Identical value tuples short-circuit to exactly 1.0."""
    _check_dims(a, b)
    if a.norm == 0.0 or b.norm == 0.0:
        raise DegenerateEmbeddingError("cosine similarity undefined for zero-norm embedding")
    if a.values == b.values:
        return 1.0
    raw = math.fsum(x * y for x, y in zip(a.values, b.values)) / (a.norm * b.norm)
    # Rounding can push |raw| a few ulp past 1; clamp so downstream bounds hold.
    return max(-1.0, min(1.0, raw))


def jaccard_similarity(tokens_a: list[str], tokens_b: list[str]) -> float:
    """Intersection over union of the unigram sets.

    Both sides empty counts as a perfect match; exactly one side empty
    counts as no match.
    """
    set_a, set_b = set(tokens_a), set(tokens_b)
    if not set_a and not set_b:
        return 1.0
    if not set_a or not set_b:
        return 0.0
    return len(set_a & set_b) / len(set_a | set_b)


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _modified_precision(candidate: list[str], reference: list[str], n: int) -> float:
    cand_counts = _ngram_counts(candidate, n)
    total = sum(cand_counts.values())
    if total == 0:
        return 0.0
    ref_counts = _ngram_counts(reference, n)
    clipped = sum(min(count, ref_counts[gram]) for gram, count in cand_counts.items())
    return clipped / total


def bleu_similarity(candidate: list[str], reference: list[str]) -> float:
    """Sentence-level BLEU of `candidate` against a single reference.

    The order caps at min(4, len(candidate)) with uniform weights, zero
    precisions are replaced by a small epsilon rather than smoothing counts,
    and the brevity penalty is exp(1 - r/c) for c < r.  Identical token
    sequences score exactly 1.0 (including both empty); otherwise an empty
    candidate scores 0.0.
    """
    cand, ref = list(candidate), list(reference)
    if cand == ref:
        return 1.0
    c, r = len(cand), len(ref)
    if c == 0:
        return 0.0
    order = min(MAX_NGRAM_ORDER, c)
    log_sum = 0.0
    for n in range(1, order + 1):
        precision = _modified_precision(cand, ref, n)
        if precision == 0.0:
            precision = BLEU_SMOOTHING_EPS
        log_sum += math.log(precision) / order
    brevity = 1.0 if c >= r else math.exp(1.0 - r / c)
    return brevity * math.exp(log_sum)


def score_pair(
    original_text: str,
    generated_text: str,
    original_embedding: EmbeddingVector,
    generated_embedding: EmbeddingVector,
) -> SimilarityScores:
    """Score one candidate against its source on all four gate measures.

    Cosine is floored at 0 here so every gate score lives in [0, 1]; BLEU
    treats the generated text as the candidate and the original as the
    reference.
    """
    original_tokens = tokenize(original_text)
    generated_tokens = tokenize(generated_text)
    return SimilarityScores(
        euclidean=euclidean_similarity(original_embedding, generated_embedding),
        cosine=max(0.0, cosine_similarity(original_embedding, generated_embedding)),
        jaccard=jaccard_similarity(original_tokens, generated_tokens),
        bleu=bleu_similarity(generated_tokens, original_tokens),
    )
