"""Command-line front end: one JSON config file, three phase subcommands,
and a report consolidator.

Every phase rewrites `resolved_config.json` with the exact configuration it
ran under (after flag and environment overrides), so a run can be reproduced
from its output directory alone.  Exit status 0 means the run completed,
even if individual records were audited; a nonzero status means the run
itself failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .backends import ENDPOINT_ENV_VAR, BackendConfig, BackendUnavailableError, create_backend
from .datasets import Dataset, DatasetFormatError, load_dataset, save_dataset
from .engine import (
    AugmentationPlan,
    ThresholdSet,
    audit_to_jsonl,
    augment,
    build_temp_dataset,
    compute_thresholds,
    temp_from_jsonl,
    temp_to_jsonl,
)
from .evaluation import SplitConfig, evaluate_pipeline
from .similarity import METRIC_NAMES
from .textproc import PreprocessConfig

THRESHOLD_VERIFY_TOLERANCE = 1e-12


class ConfigError(ValueError):
    """The config file is missing, unparseable, or structurally wrong."""


@dataclass(frozen=True)
class DatasetConfig:
    path: str
    format: str
    text_column: str = "text"
    label_column: str = "label"

    def to_dict(self) -> dict:
        return {
            "path": self.path,
            "format": self.format,
            "text_column": self.text_column,
            "label_column": self.label_column,
        }


@dataclass(frozen=True)
class PlanConfig:
    selected_labels: tuple[str, ...]
    variants: tuple[str, ...] = ("all_text",)
    metrics: tuple[str, ...] = METRIC_NAMES
    threshold_override: dict | None = None

    def to_dict(self) -> dict:
        return {
            "selected_labels": list(self.selected_labels),
            "variants": list(self.variants),
            "metrics": list(self.metrics),
            "threshold_override": self.threshold_override,
        }


@dataclass(frozen=True)
class PipelineConfig:
    dataset: DatasetConfig
    backend: BackendConfig
    plan: PlanConfig
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    output_dir: str = "out"

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset.to_dict(),
            "preprocess": self.preprocess.to_dict(),
            "backend": self.backend.to_dict(),
            "plan": self.plan.to_dict(),
            "split": self.split.to_dict(),
            "output_dir": self.output_dir,
        }


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    try:
        return _config_from_dict(raw)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"config file {path}: {exc}") from exc


def _config_from_dict(raw: dict) -> PipelineConfig:
    known = {"dataset", "preprocess", "backend", "plan", "split", "output_dir"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    for section in ("dataset", "plan"):
        if section not in raw:
            raise ConfigError(f"missing config section {section!r}")

    dataset_raw = dict(raw["dataset"])
    plan_raw = dict(raw["plan"])
    dataset = DatasetConfig(
        path=str(dataset_raw.pop("path")),
        format=str(dataset_raw.pop("format")),
        text_column=str(dataset_raw.pop("text_column", "text")),
        label_column=str(dataset_raw.pop("label_column", "label")),
    )
    if dataset_raw:
        raise ConfigError(f"unknown dataset options: {sorted(dataset_raw)}")
    plan = PlanConfig(
        selected_labels=tuple(plan_raw.pop("selected_labels")),
        variants=tuple(plan_raw.pop("variants", ["all_text"])),
        metrics=tuple(plan_raw.pop("metrics", METRIC_NAMES)),
        threshold_override=plan_raw.pop("threshold_override", None),
    )
    if plan_raw:
        raise ConfigError(f"unknown plan options: {sorted(plan_raw)}")
    return PipelineConfig(
        dataset=dataset,
        preprocess=PreprocessConfig.from_dict(raw.get("preprocess", {})),
        backend=BackendConfig.from_dict(raw.get("backend", {})),
        plan=plan,
        split=SplitConfig.from_dict(raw.get("split", {})),
        output_dir=str(raw.get("output_dir", "out")),
    )


def _apply_overrides(config: PipelineConfig, args: argparse.Namespace) -> PipelineConfig:
    backend = config.backend.to_dict()
    split = config.split.to_dict()
    if getattr(args, "backend", None):
        backend["kind"] = args.backend
    if getattr(args, "seed", None) is not None:
        backend["seed"] = args.seed
        split["seed"] = args.seed
    if backend["kind"] == "remote":
        endpoint = os.environ.get(ENDPOINT_ENV_VAR)
        if endpoint:
            backend["endpoint"] = endpoint
    output_dir = args.out if getattr(args, "out", None) else config.output_dir
    return PipelineConfig(
        dataset=config.dataset,
        preprocess=config.preprocess,
        backend=BackendConfig.from_dict(backend),
        plan=config.plan,
        split=SplitConfig.from_dict(split),
        output_dir=output_dir,
    )


def _write_json(path: Path, payload) -> None:
    path.write_text(
        json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def _prepare_output(config: PipelineConfig) -> Path:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "resolved_config.json", config.to_dict())
    return out


def _dataset_extension(config: PipelineConfig) -> str:
    return "csv" if config.dataset.format == "csv" else "jsonl"


def _augmented_filename(metric: str, variant: str, extension: str) -> str:
    return f"augmented_{metric}_{variant}.{extension}"


_AUGMENTED_NAME = re.compile(r"^augmented_(?P<metric>[a-z]+)_(?P<variant>[a-z_]+)$")


def _row_name_for(path: Path) -> str:
    """Derive the report row name from an augmented file name."""
    match = _AUGMENTED_NAME.match(path.stem)
    if not match:
        raise ConfigError(
            f"cannot derive metric and variant from file name {path.name!r}; "
            "expected augmented_<metric>_<variant>.<ext>"
        )
    return f"{match.group('metric')} ({match.group('variant').replace('_', '-')})"


def _slug(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", name.lower()).strip("_")


def cmd_phase1(args: argparse.Namespace) -> int:
    config = _apply_overrides(load_config(args.config), args)
    out = _prepare_output(config)
    dataset, rejections = load_dataset(
        config.dataset.path,
        config.dataset.format,
        config.dataset.text_column,
        config.dataset.label_column,
    )
    with (out / "load_rejections.jsonl").open("w", encoding="utf-8") as handle:
        for rejection in rejections:
            handle.write(json.dumps(rejection.as_dict(), ensure_ascii=False) + "\n")
    print(f"loaded {len(dataset)} records from {config.dataset.path} ({len(rejections)} rejected)")

    backend = create_backend(config.backend)
    temp_records, audit = build_temp_dataset(dataset, backend, config.preprocess, jobs=args.jobs)
    temp_to_jsonl(temp_records, out / "temp_dataset.jsonl")
    audit_to_jsonl(audit, out / "phase1_audit.jsonl")
    scored = sum(1 for t in temp_records if t.ok)
    print(
        f"phase1: {len(temp_records)} temp rows ({scored} scored), "
        f"{len(audit)} audit entries -> {out / 'temp_dataset.jsonl'}"
    )
    return 0


def _verify_thresholds(temp_records, thresholds: ThresholdSet) -> None:
    """Recompute the means the straightforward way and compare."""
    scored = [t for t in temp_records if t.ok]
    for metric in METRIC_NAMES:
        values = [t.scores.get(metric) for t in scored]
        naive = sum(values) / len(values)
        if not math.isclose(naive, thresholds.get(metric), abs_tol=THRESHOLD_VERIFY_TOLERANCE):
            raise ValueError(
                f"threshold verification failed for {metric}: "
                f"{thresholds.get(metric)!r} vs naive {naive!r}"
            )


def cmd_phase2(args: argparse.Namespace) -> int:
    config = _apply_overrides(load_config(args.config), args)
    out = _prepare_output(config)
    temp_path = Path(args.temp) if args.temp else out / "temp_dataset.jsonl"
    temp_records = temp_from_jsonl(temp_path)

    if config.plan.threshold_override is not None:
        thresholds = ThresholdSet.from_dict(config.plan.threshold_override)
        print("phase2: using threshold override from config")
    else:
        thresholds = compute_thresholds(temp_records)
    if args.verify:
        _verify_thresholds(temp_records, thresholds)
        print("phase2: threshold verification passed")
    _write_json(out / "thresholds.json", thresholds.as_dict())
    for metric in METRIC_NAMES:
        print(f"threshold[{metric}] = {thresholds.get(metric):.6f}")

    original, _ = load_dataset(
        config.dataset.path,
        config.dataset.format,
        config.dataset.text_column,
        config.dataset.label_column,
    )
    extension = _dataset_extension(config)
    report = None
    for variant in config.plan.variants:
        plan = AugmentationPlan(
            selected_labels=frozenset(config.plan.selected_labels),
            variant=variant,
            metrics=config.plan.metrics,
        )
        outputs, report = augment(original, temp_records, thresholds, plan)
        for metric, augmented_dataset in outputs.items():
            path = out / _augmented_filename(metric, variant, extension)
            save_dataset(augmented_dataset, path, config.dataset.format)
            added = len(augmented_dataset) - len(original)
            print(f"phase2: {metric}/{variant}: admitted {added} -> {path}")
    # Admission counts do not depend on the variant, so one report covers all.
    _write_json(out / "growth_report.json", report.as_dict())
    print(report.to_table())
    return 0


def cmd_phase3(args: argparse.Namespace) -> int:
    config = _apply_overrides(load_config(args.config), args)
    out = _prepare_output(config)
    original, _ = load_dataset(
        config.dataset.path,
        config.dataset.format,
        config.dataset.text_column,
        config.dataset.label_column,
    )

    if args.datasets:
        paths = [Path(p) for p in args.datasets]
    else:
        extension = _dataset_extension(config)
        paths = sorted(out.glob(f"augmented_*.{extension}"))
    if not paths:
        raise ConfigError(f"no augmented datasets found in {out}; run phase2 first")

    augmented: dict[str, Dataset] = {}
    for path in paths:
        name = _row_name_for(path)
        dataset, _ = load_dataset(path, config.dataset.format)
        augmented[name] = dataset

    reports, t_tests = evaluate_pipeline(original, augmented, config.split)
    payload = {
        "split": config.split.to_dict(),
        "rows": {name: report.as_dict() for name, report in reports.items()},
        "t_tests": {
            name: (result.as_dict() if result is not None else {"status": "identical"})
            for name, result in t_tests.items()
        },
    }
    _write_json(out / "evaluation_report.json", payload)

    curves_dir = out / "curves"
    curves_dir.mkdir(exist_ok=True)
    for name, report in reports.items():
        halves = {
            "augmented": report.augmented_split.curves,
            "not_augmented": report.not_augmented_split.curves,
        }
        for half, curve_set in halves.items():
            for kind, curves in (("roc", curve_set.roc), ("pr", curve_set.pr)):
                path = curves_dir / f"{_slug(name)}__{half}__{kind}.csv"
                with path.open("w", encoding="utf-8", newline="") as handle:
                    writer = csv.writer(handle)
                    writer.writerow(["label", "threshold", "x", "y"])
                    for label, points in curves.items():
                        for threshold, x, y in points:
                            writer.writerow([label, repr(threshold), repr(x), repr(y)])

    for name, report in reports.items():
        own = report.augmented_split.metrics
        cross = report.not_augmented_split.metrics
        print(
            f"{name}: macro-F1 {own.macro_f1:.4f} on own split, "
            f"{cross.macro_f1:.4f} on original split"
        )
    for name, result in t_tests.items():
        if name == "original (text)":
            continue
        if result is None:
            print(f"t-test {name}: identical fold scores")
        else:
            verdict = "significant" if result.significant else "not significant"
            print(f"t-test {name}: t={result.t_statistic:.4f} p={result.p_value:.4f} ({verdict})")
    print(f"phase3: wrote {out / 'evaluation_report.json'}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    config = _apply_overrides(load_config(args.config), args)
    out = Path(config.output_dir)
    if not out.exists():
        raise ConfigError(f"output directory {out} does not exist; run the phases first")

    summary: dict = {}
    thresholds_path = out / "thresholds.json"
    growth_path = out / "growth_report.json"
    evaluation_path = out / "evaluation_report.json"
    if thresholds_path.exists():
        summary["thresholds"] = json.loads(thresholds_path.read_text(encoding="utf-8"))
        print("Thresholds:")
        for metric in sorted(summary["thresholds"]):
            print(f"  {metric}: {summary['thresholds'][metric]:.6f}")
    if growth_path.exists():
        summary["growth"] = json.loads(growth_path.read_text(encoding="utf-8"))
        print("Growth (final counts per admitting metric):")
        growth = summary["growth"]
        for label in growth["labels"]:
            finals = "  ".join(
                f"{metric}={growth['metrics'][metric]['final'][label]}"
                for metric in sorted(growth["metrics"])
            )
            print(f"  {label}: original={growth['original'][label]}  {finals}")
    if evaluation_path.exists():
        summary["evaluation"] = json.loads(evaluation_path.read_text(encoding="utf-8"))
        print("Evaluation (macro-F1 own split / original split):")
        rows = summary["evaluation"]["rows"]
        for name in sorted(rows):
            own = rows[name]["augmented_split"]["metrics"]["macro_f1"]
            cross = rows[name]["not_augmented_split"]["metrics"]["macro_f1"]
            print(f"  {name}: {own:.4f} / {cross:.4f}")
    if not summary:
        raise ConfigError(f"no phase outputs found in {out}")
    _write_json(out / "summary.json", summary)
    print(f"report: wrote {out / 'summary.json'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simaug",
        description="Similarity-gated text augmentation pipeline",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    def add_common(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("--config", required=True, help="path to the JSON config file")
        sub.add_argument("--out", help="override the configured output directory")
        sub.add_argument(
            "--seed", type=int, help="override both the backend seed and the split seed"
        )

    phase1 = subparsers.add_parser("phase1", help="generate and score candidates")
    add_common(phase1)
    phase1.add_argument(
        "--backend", choices=["stub", "replay", "remote"], help="override the backend kind"
    )
    phase1.add_argument("--jobs", type=int, default=1, help="concurrent records (default 1)")
    phase1.set_defaults(func=cmd_phase1)

    phase2 = subparsers.add_parser("phase2", help="derive thresholds and admit candidates")
    add_common(phase2)
    phase2.add_argument("--temp", help="temp dataset path (default: <out>/temp_dataset.jsonl)")
    phase2.add_argument(
        "--verify",
        action="store_true",
        help="recompute thresholds independently and require agreement",
    )
    phase2.set_defaults(func=cmd_phase2)

    phase3 = subparsers.add_parser("phase3", help="train, score, and compare variants")
    add_common(phase3)
    phase3.add_argument(
        "datasets",
        nargs="*",
        help="augmented dataset files (default: augmented_* in the output directory)",
    )
    phase3.set_defaults(func=cmd_phase3)

    report = subparsers.add_parser("report", help="consolidate phase outputs")
    add_common(report)
    report.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DatasetFormatError, BackendUnavailableError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
