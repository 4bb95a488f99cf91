"""Shared builders for the test suite plus the acceptance result banner."""

from __future__ import annotations

import random

import pytest

from simaug.datasets import Dataset, LabeledRecord
from simaug.engine import TempRecord
from simaug.similarity import EmbeddingVector, SimilarityScores


def make_dataset(pairs, label=None) -> Dataset:
    """Dataset from (text, label) pairs, ids assigned by position."""
    records = []
    for index, item in enumerate(pairs):
        text, item_label = item if label is None else (item, label)
        records.append(LabeledRecord(id=str(index), text=text, label=item_label))
    return Dataset(records)


def make_temp_row(
    record: LabeledRecord,
    euclidean: float = 0.0,
    cosine: float = 0.0,
    jaccard: float = 0.0,
    bleu: float = 0.0,
    generated: str = "gen",
    status: str = "ok",
) -> TempRecord:
    """Temp row with hand-chosen scores; embeddings are placeholders."""
    vector = EmbeddingVector.of([1.0, 0.0])
    return TempRecord(
        base=record,
        generated_text=generated,
        all_text=f"{record.text} {generated}" if generated else record.text,
        original_embedding=vector,
        generated_embedding=vector,
        scores=SimilarityScores(
            euclidean=euclidean, cosine=cosine, jaccard=jaccard, bleu=bleu
        ),
        status=status,
    )


def random_vector(rng: random.Random, dim: int, scale: float = 5.0) -> list[float]:
    return [rng.uniform(-scale, scale) for _ in range(dim)]


def random_nonzero_vector(rng: random.Random, dim: int, scale: float = 5.0) -> list[float]:
    while True:
        vector = random_vector(rng, dim, scale)
        if any(abs(v) > 1e-6 for v in vector):
            return vector


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20240817)


def pytest_runtest_logreport(report):
    # One visible verdict line per acceptance criterion.
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.rsplit("::", 1)[-1]
    verdict = "PASS" if report.passed else "FAIL"
    print(f"\n[acceptance] {name}: {verdict}", flush=True)
