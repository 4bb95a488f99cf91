"""Labeled text datasets: record model, CSV/JSONL round-trip IO, class
distribution accounting, and deterministic stratified splitting.

Loading rejects empty-text and duplicate-id rows into a report instead of
failing the run; structurally malformed rows raise with their row number.
Saving adds provenance columns only when the dataset actually contains
augmented records, so untouched corpora round-trip byte-compatibly.
"""

from __future__ import annotations

import csv
import json
import math
import random
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

ORIGINAL_PROVENANCE = "original"
PROVENANCE_COLUMNS = ("source_id", "admitted_by", "variant")
FORMATS = ("csv", "jsonl")


class DatasetFormatError(ValueError):
    """Unreadable file, unknown format, missing columns, or malformed row."""


@dataclass(frozen=True)
class LabeledRecord:
    """One labeled text row.

    Original rows carry `admitted_by == "original"` and no source pointer;
    augmented rows name the metric that admitted them, the id of the record
    they grew from, and which text variant they hold.
    """

    id: str
    text: str
    label: str
    source_id: str | None = None
    admitted_by: str = ORIGINAL_PROVENANCE
    variant: str | None = None

    @property
    def is_original(self) -> bool:
        return self.admitted_by == ORIGINAL_PROVENANCE


@dataclass(frozen=True)
class RejectedRow:
    """A skipped source row: 1-based data row number plus the reason."""

    row: int
    reason: str

    def as_dict(self) -> dict:
        return {"row": self.row, "reason": self.reason}


@dataclass
class Dataset:
    records: list[LabeledRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def labels(self) -> list[str]:
        return sorted({r.label for r in self.records})

    def has_augmented(self) -> bool:
        return any(not r.is_original for r in self.records)


@dataclass(frozen=True)
class ClassDistribution:
    counts: dict[str, int]
    ratios: dict[str, float]

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def class_distribution(dataset: Dataset) -> ClassDistribution:
    """Per-label counts and ratios, keyed in sorted label order."""
    counts: dict[str, int] = {}
    for record in dataset.records:
        counts[record.label] = counts.get(record.label, 0) + 1
    counts = {label: counts[label] for label in sorted(counts)}
    total = sum(counts.values())
    ratios = {label: count / total for label, count in counts.items()} if total else {}
    return ClassDistribution(counts=counts, ratios=ratios)


def _normalized_text(value: str) -> str:
    return unicodedata.normalize("NFC", value)


def _record_from_fields(
    fields_map: dict,
    row_number: int,
    data_index: int,
    text_column: str,
    label_column: str,
    seen_ids: set[str],
) -> tuple[LabeledRecord | None, RejectedRow | None]:
    """Build one record, or explain why the row was rejected."""
    text = _normalized_text(str(fields_map[text_column]))
    label = str(fields_map[label_column])
    if not text.strip():
        return None, RejectedRow(row_number, "empty text after normalization")
    if not label.strip():
        return None, RejectedRow(row_number, "empty label")

    raw_id = fields_map.get("id")
    record_id = str(raw_id) if raw_id not in (None, "") else str(data_index)
    if record_id in seen_ids:
        return None, RejectedRow(row_number, f"duplicate id {record_id!r}")

    source_id = fields_map.get("source_id") or None
    admitted_by = fields_map.get("admitted_by") or ORIGINAL_PROVENANCE
    variant = fields_map.get("variant") or None
    record = LabeledRecord(
        id=record_id,
        text=text,
        label=label,
        source_id=str(source_id) if source_id is not None else None,
        admitted_by=str(admitted_by),
        variant=str(variant) if variant is not None else None,
    )
    return record, None


def _load_csv_rows(path: Path, text_column: str, label_column: str):
    with path.open("r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames
        if header is None:
            raise DatasetFormatError(f"{path}: empty file, no header row")
        for column in (text_column, label_column):
            if column not in header:
                raise DatasetFormatError(f"{path}: missing column {column!r}")
        for row_number, row in enumerate(reader, start=1):
            if None in row or any(value is None for value in row.values()):
                raise DatasetFormatError(
                    f"{path}: row {row_number}: field count does not match header"
                )
            yield row_number, row


def _load_jsonl_rows(path: Path, text_column: str, label_column: str):
    with path.open("r", encoding="utf-8") as handle:
        row_number = 0
        for line in handle:
            if not line.strip():
                continue
            row_number += 1
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"{path}: row {row_number}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise DatasetFormatError(f"{path}: row {row_number}: expected an object")
            for column in (text_column, label_column):
                if column not in obj:
                    raise DatasetFormatError(f"{path}: row {row_number}: missing key {column!r}")
            yield row_number, obj


def load_dataset(
    path: str | Path,
    format: str,
    text_column: str = "text",
    label_column: str = "label",
) -> tuple[Dataset, list[RejectedRow]]:
    """Read a labeled dataset, returning it with the list of rejected rows.

    Row ids come from an `id` column when present, otherwise from the
    zero-based data row index; rejected rows still consume an index so ids
    stay stable under re-runs with the same file.
    """
    if format not in FORMATS:
        raise DatasetFormatError(f"unknown dataset format {format!r}; expected one of {FORMATS}")
    path = Path(path)
    if not path.exists():
        raise DatasetFormatError(f"cannot read {path}: file does not exist")

    rows = _load_csv_rows(path, text_column, label_column) if format == "csv" else _load_jsonl_rows(
        path, text_column, label_column
    )
    records: list[LabeledRecord] = []
    rejections: list[RejectedRow] = []
    seen_ids: set[str] = set()
    for data_index, (row_number, fields_map) in enumerate(rows):
        record, rejection = _record_from_fields(
            fields_map, row_number, data_index, text_column, label_column, seen_ids
        )
        if rejection is not None:
            rejections.append(rejection)
            continue
        seen_ids.add(record.id)
        records.append(record)
    return Dataset(records), rejections


def save_dataset(dataset: Dataset, path: str | Path, format: str) -> None:
    """Write the dataset; provenance columns appear only if augmented rows exist."""
    if format not in FORMATS:
        raise DatasetFormatError(f"unknown dataset format {format!r}; expected one of {FORMATS}")
    path = Path(path)
    with_provenance = dataset.has_augmented()
    try:
        if format == "csv":
            _save_csv(dataset, path, with_provenance)
        else:
            _save_jsonl(dataset, path, with_provenance)
    except OSError as exc:
        raise DatasetFormatError(f"cannot write {path}: {exc}") from exc


def _save_csv(dataset: Dataset, path: Path, with_provenance: bool) -> None:
    columns = ["id", "text", "label"]
    if with_provenance:
        columns += list(PROVENANCE_COLUMNS)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(columns)
        for record in dataset.records:
            row = [record.id, record.text, record.label]
            if with_provenance:
                row += [record.source_id or "", record.admitted_by, record.variant or ""]
            writer.writerow(row)


def _save_jsonl(dataset: Dataset, path: Path, with_provenance: bool) -> None:
    with path.open("w", encoding="utf-8") as handle:
        for record in dataset.records:
            obj = {"id": record.id, "text": record.text, "label": record.label}
            if with_provenance:
                obj["source_id"] = record.source_id
                obj["admitted_by"] = record.admitted_by
                obj["variant"] = record.variant
            handle.write(json.dumps(obj, ensure_ascii=False) + "\n")


def _round_half_up(value: float) -> int:
    return math.floor(value + 0.5)


def _indices_by_label(records: list[LabeledRecord]) -> dict[str, list[int]]:
    by_label: dict[str, list[int]] = {}
    for index, record in enumerate(records):
        by_label.setdefault(record.label, []).append(index)
    return by_label


def stratified_split(
    dataset: Dataset, train_fraction: float, seed: int
) -> tuple[Dataset, Dataset]:
    """Deterministic stratified split preserving input record order.

    Per-class train sizes are round-half-up of the fraction, clamped so any
    class with at least two records keeps one on each side, then the largest
    classes absorb the remainder so the overall train size matches the
    round-half-up global target whenever the clamps allow it.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    if not dataset.records:
        raise ValueError("cannot split an empty dataset")

    by_label = _indices_by_label(dataset.records)
    targets: dict[str, int] = {}
    for label in sorted(by_label):
        size = len(by_label[label])
        target = _round_half_up(train_fraction * size)
        if size >= 2:
            target = min(max(target, 1), size - 1)
        targets[label] = target

    # Rounding can leave the overall train size off target.  Nudge classes
    # by one record each, preferring whichever sits furthest from its
    # proportional share of the global target; that keeps every class within
    # one record of the achieved global ratio.  When the clamps block every
    # nudge the global size stays best-effort.
    total = len(dataset.records)
    global_target = _round_half_up(train_fraction * total)
    shortfall = global_target - sum(targets.values())
    nudged: set[str] = set()
    while shortfall != 0:
        step = 1 if shortfall > 0 else -1
        best_label, best_gap = None, -math.inf
        for label in sorted(by_label):
            if label in nudged:
                continue
            size = len(by_label[label])
            low, high = (1, size - 1) if size >= 2 else (0, size)
            if not low <= targets[label] + step <= high:
                continue
            quota = global_target * size / total
            gap = (quota - targets[label]) * step
            if gap > best_gap:
                best_label, best_gap = label, gap
        if best_label is None:
            break
        targets[best_label] += step
        nudged.add(best_label)
        shortfall -= step

    rng = random.Random(seed)
    train_indices: set[int] = set()
    for label in sorted(by_label):
        indices = list(by_label[label])
        rng.shuffle(indices)
        train_indices.update(indices[: targets[label]])

    train = [r for i, r in enumerate(dataset.records) if i in train_indices]
    test = [r for i, r in enumerate(dataset.records) if i not in train_indices]
    return Dataset(train), Dataset(test)


def kfold_split(dataset: Dataset, k: int, seed: int) -> list[tuple[Dataset, Dataset]]:
    """k stratified folds as (train, validation) pairs.

    Each class is shuffled once, then cut into k contiguous chunks whose
    sizes differ by at most one; chunk i joins validation fold i.
    """
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    if k > len(dataset.records):
        raise ValueError(f"k={k} exceeds dataset size {len(dataset.records)}")

    rng = random.Random(seed)
    fold_of: dict[int, int] = {}
    by_label = _indices_by_label(dataset.records)
    for label in sorted(by_label):
        indices = list(by_label[label])
        rng.shuffle(indices)
        size, remainder = divmod(len(indices), k)
        cursor = 0
        for fold in range(k):
            chunk = size + (1 if fold < remainder else 0)
            for index in indices[cursor : cursor + chunk]:
                fold_of[index] = fold
            cursor += chunk

    folds = []
    for fold in range(k):
        train = [r for i, r in enumerate(dataset.records) if fold_of[i] != fold]
        validation = [r for i, r in enumerate(dataset.records) if fold_of[i] == fold]
        folds.append((Dataset(train), Dataset(validation)))
    return folds
