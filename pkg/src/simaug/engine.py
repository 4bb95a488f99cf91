"""Phases 1 and 2 of the pipeline.

Phase 1 walks the dataset once: preprocess, generate a candidate, embed both
sides, score on all four measures, and append a row to the temp dataset.
Failures are per-record; they land in an audit list instead of a row.

Phase 2 averages each measure over the scored rows to get its admission
threshold, then emits one augmented dataset per measure containing every
original row plus the admitted candidates, with provenance and a growth
report.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from .backends import Backend, BackendError, BackendUnavailableError
from .datasets import Dataset, LabeledRecord
from .similarity import METRIC_NAMES, EmbeddingVector, SimilarityScores, score_pair
from .textproc import PreprocessConfig, combine_text, preprocess

STATUS_OK = "ok"
STATUS_EMPTY = "empty_generation"

VARIANTS = ("all_text", "new_text")

# Serialized temp row key order; fixed so repeated runs are byte-identical.
TEMP_KEYS = (
    "id",
    "text",
    "label",
    "generated",
    "all_text",
    "emb_orig",
    "emb_gen",
    "sim_euclidean",
    "sim_cosine",
    "sim_jaccard",
    "sim_bleu",
    "status",
)

_ZERO_SCORES = SimilarityScores(euclidean=0.0, cosine=0.0, jaccard=0.0, bleu=0.0)


@dataclass(frozen=True)
class TempRecord:
    """One scored candidate: the preprocessed original plus its generation."""

    base: LabeledRecord
    generated_text: str
    all_text: str
    original_embedding: EmbeddingVector | None
    generated_embedding: EmbeddingVector | None
    scores: SimilarityScores
    status: str = STATUS_OK

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK


@dataclass(frozen=True)
class AuditEntry:
    """Why a record produced no usable candidate."""

    record_id: str
    stage: str
    reason: str

    def as_dict(self) -> dict:
        return {"id": self.record_id, "stage": self.stage, "reason": self.reason}


@dataclass(frozen=True)
class ThresholdSet:
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

    @classmethod
    def from_dict(cls, data: dict) -> "ThresholdSet":
        return cls(**{name: float(data[name]) for name in METRIC_NAMES})


@dataclass(frozen=True)
class AugmentationPlan:
    """Which labels to grow, which text variant to emit, which gates to use."""

    selected_labels: frozenset[str]
    variant: str = "all_text"
    metrics: tuple[str, ...] = METRIC_NAMES
    threshold_override: ThresholdSet | None = None

    def __post_init__(self):
        if not self.selected_labels:
            raise ValueError("at least one label must be selected for augmentation")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        bad = [m for m in self.metrics if m not in METRIC_NAMES]
        if bad:
            raise ValueError(f"unknown metrics {bad}; expected a subset of {METRIC_NAMES}")
        if not self.metrics:
            raise ValueError("at least one metric is required")


def _process_record(
    record: LabeledRecord, backend: Backend, config: PreprocessConfig
) -> tuple[TempRecord | None, list[AuditEntry]]:
    cleaned = preprocess(record.text, config)
    try:
        generation = backend.generate_text(record.id, cleaned)
    except BackendError as exc:
        return None, [AuditEntry(record.id, "generate", str(exc))]

    generated = generation.generated_text
    if not generated.strip():
        # Keep the row for auditing, but with zero scores it can never pass
        # a positive threshold.
        try:
            original_embedding = backend.embed_text([cleaned])[0]
        except BackendError:
            original_embedding = None
        row = TempRecord(
            base=replace(record, text=cleaned),
            generated_text=generated,
            all_text=combine_text(cleaned, generated),
            original_embedding=original_embedding,
            generated_embedding=None,
            scores=_ZERO_SCORES,
            status=STATUS_EMPTY,
        )
        return row, [AuditEntry(record.id, "generate", "empty generation")]

    try:
        original_embedding, generated_embedding = backend.embed_pair(record.id, cleaned, generated)
    except BackendError as exc:
        return None, [AuditEntry(record.id, "embed", str(exc))]
    try:
        scores = score_pair(cleaned, generated, original_embedding, generated_embedding)
    except ValueError as exc:
        return None, [AuditEntry(record.id, "score", str(exc))]

    row = TempRecord(
        base=replace(record, text=cleaned),
        generated_text=generated,
        all_text=combine_text(cleaned, generated),
        original_embedding=original_embedding,
        generated_embedding=generated_embedding,
        scores=scores,
        status=STATUS_OK,
    )
    return row, []


def build_temp_dataset(
    dataset: Dataset,
    backend: Backend,
    preprocess_config: PreprocessConfig | None = None,
    jobs: int = 1,
) -> tuple[list[TempRecord], list[AuditEntry]]:
    """Run phase 1 over every record, in input order.

    The backend is health-checked first; an unavailable backend aborts the
    run before any work starts.  With jobs > 1 records are processed
    concurrently but results keep input order.
    """
    status = backend.health_check()
    if not status.ready:
        raise BackendUnavailableError(f"backend not ready: {status.reason}")
    config = preprocess_config if preprocess_config is not None else PreprocessConfig()

    def one(record: LabeledRecord):
        return _process_record(record, backend, config)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, dataset.records))
    else:
        results = [one(record) for record in dataset.records]

    temp_records: list[TempRecord] = []
    audit: list[AuditEntry] = []
    for row, entries in results:
        if row is not None:
            temp_records.append(row)
        audit.extend(entries)
    return temp_records, audit


def compute_thresholds(temp_records: list[TempRecord]) -> ThresholdSet:
    """Arithmetic mean of each measure over the successfully scored rows."""
    scored = [t for t in temp_records if t.ok]
    if not scored:
        raise ValueError("no successfully scored records to average")
    count = len(scored)
    means = {
        name: math.fsum(t.scores.get(name) for t in scored) / count for name in METRIC_NAMES
    }
    return ThresholdSet(**means)


@dataclass(frozen=True)
class GrowthReport:
    """Admission counts per metric and label, against the original counts."""

    labels: tuple[str, ...]
    original_counts: dict[str, int]
    added_counts: dict[str, dict[str, int]]

    def original_total(self) -> int:
        return sum(self.original_counts.values())

    def added_total(self, metric: str) -> int:
        return sum(self.added_counts[metric].values())

    def final_count(self, metric: str, label: str) -> int:
        return self.original_counts[label] + self.added_counts[metric][label]

    def growth_percent(self, metric: str) -> float:
        total = self.original_total()
        return 100.0 * self.added_total(metric) / total if total else 0.0

    def as_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "original": dict(self.original_counts),
            "metrics": {
                metric: {
                    "added": dict(self.added_counts[metric]),
                    "final": {label: self.final_count(metric, label) for label in self.labels},
                    "growth_percent": self.growth_percent(metric),
                }
                for metric in self.added_counts
            },
        }

    def to_table(self) -> str:
        """Plain text table: one row per label plus Total, final counts per metric."""
        metrics = list(self.added_counts)
        header = ["Class", "Original"] + [m.capitalize() for m in metrics]
        rows = [header]
        for label in self.labels:
            rows.append(
                [label, str(self.original_counts[label])]
                + [str(self.final_count(m, label)) for m in metrics]
            )
        rows.append(
            ["Total", str(self.original_total())]
            + [str(self.original_total() + self.added_total(m)) for m in metrics]
        )
        widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
        lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)) for row in rows]
        return "\n".join(lines)


def augment(
    original: Dataset,
    temp_records: list[TempRecord],
    thresholds: ThresholdSet,
    plan: AugmentationPlan,
) -> tuple[dict[str, Dataset], GrowthReport]:
    """Run phase 2: one augmented dataset per metric in the plan.

    A candidate is admitted when its row scored successfully, its label is
    selected, and its score meets the metric's threshold (inclusive).
    Original records pass through untouched and keep their order; admitted
    rows follow in temp-dataset order.
    """
    original_ids = {record.id for record in original.records}
    for temp in temp_records:
        if temp.base.id not in original_ids:
            raise ValueError(f"temp record id {temp.base.id!r} does not exist in the original dataset")
    label_sequence = [record.label for record in original.records]
    labels = set(label_sequence)
    unknown = plan.selected_labels - labels
    if unknown:
        raise ValueError(f"selected labels not present in dataset: {sorted(unknown)}")

    sorted_labels = tuple(sorted(labels))
    distribution = {label: label_sequence.count(label) for label in sorted_labels}
    outputs: dict[str, Dataset] = {}
    added: dict[str, dict[str, int]] = {}
    for metric in plan.metrics:
        threshold = thresholds.get(metric)
        new_records = []
        counts = {label: 0 for label in sorted_labels}
        for temp in temp_records:
            if not temp.ok or temp.base.label not in plan.selected_labels:
                continue
            if temp.scores.get(metric) < threshold:
                continue
            text = temp.all_text if plan.variant == "all_text" else temp.generated_text
            new_records.append(
                LabeledRecord(
                    id=f"{temp.base.id}:{metric}",
                    text=text,
                    label=temp.base.label,
                    source_id=temp.base.id,
                    admitted_by=metric,
                    variant=plan.variant,
                )
            )
            counts[temp.base.label] += 1
        combined = list(original.records) + new_records
        ids = [record.id for record in combined]
        if len(set(ids)) != len(ids):
            raise ValueError(f"augmented ids collide with original ids for metric {metric!r}")
        outputs[metric] = Dataset(combined)
        added[metric] = counts

    report = GrowthReport(
        labels=sorted_labels, original_counts=distribution, added_counts=added
    )
    return outputs, report


def _embedding_to_list(embedding: EmbeddingVector | None) -> list[float]:
    return list(embedding.values) if embedding is not None else []


def temp_to_jsonl(temp_records: list[TempRecord], path: str | Path) -> None:
    """Write the temp dataset with a fixed key order, one JSON object per line."""
    with Path(path).open("w", encoding="utf-8") as handle:
        for temp in temp_records:
            row = {
                "id": temp.base.id,
                "text": temp.base.text,
                "label": temp.base.label,
                "generated": temp.generated_text,
                "all_text": temp.all_text,
                "emb_orig": _embedding_to_list(temp.original_embedding),
                "emb_gen": _embedding_to_list(temp.generated_embedding),
                "sim_euclidean": temp.scores.euclidean,
                "sim_cosine": temp.scores.cosine,
                "sim_jaccard": temp.scores.jaccard,
                "sim_bleu": temp.scores.bleu,
                "status": temp.status,
            }
            handle.write(json.dumps(row, ensure_ascii=False) + "\n")


def temp_from_jsonl(path: str | Path) -> list[TempRecord]:
    path = Path(path)
    if not path.exists():
        raise ValueError(f"cannot read temp dataset: {path} does not exist")
    temp_records = []
    with path.open("r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}, line {line_number}: invalid JSON: {exc}") from exc
            missing = [key for key in TEMP_KEYS if key not in row]
            if missing:
                raise ValueError(f"{path}, line {line_number}: missing keys {missing}")
            temp_records.append(
                TempRecord(
                    base=LabeledRecord(id=str(row["id"]), text=row["text"], label=row["label"]),
                    generated_text=row["generated"],
                    all_text=row["all_text"],
                    original_embedding=(
                        EmbeddingVector.of(row["emb_orig"]) if row["emb_orig"] else None
                    ),
                    generated_embedding=(
                        EmbeddingVector.of(row["emb_gen"]) if row["emb_gen"] else None
                    ),
                    scores=SimilarityScores(
                        euclidean=float(row["sim_euclidean"]),
                        cosine=float(row["sim_cosine"]),
                        jaccard=float(row["sim_jaccard"]),
                        bleu=float(row["sim_bleu"]),
                    ),
                    status=row["status"],
                )
            )
    return temp_records


def audit_to_jsonl(entries: list[AuditEntry], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for entry in entries:
            handle.write(json.dumps(entry.as_dict(), ensure_ascii=False) + "\n")
