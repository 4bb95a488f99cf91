import json
import math

import pytest

from conftest import make_dataset, make_temp_row
from oracles import naive_admitted_ids, naive_mean
from simaug.backends import BackendConfig, BackendUnavailableError, ReplayBackend, StubBackend
from simaug.datasets import Dataset, LabeledRecord
from simaug.engine import (
    AugmentationPlan,
    ThresholdSet,
    augment,
    build_temp_dataset,
    compute_thresholds,
    temp_from_jsonl,
    temp_to_jsonl,
)
from simaug.similarity import score_pair
from simaug.textproc import PreprocessConfig, preprocess

THRESHOLDS = ThresholdSet(euclidean=0.5, cosine=0.5, jaccard=0.5, bleu=0.5)


def write_fixture(path, entries):
    with path.open("w", encoding="utf-8") as handle:
        for entry in entries:
            handle.write(json.dumps(entry, ensure_ascii=False) + "\n")


class TestBuildTempDataset:
    def test_stub_scores_every_record(self):
        dataset = make_dataset(
            [("first sample text here", "a"), ("second sample text there", "b")]
        )
        backend = StubBackend(BackendConfig(seed=1))
        temp, audit = build_temp_dataset(dataset, backend)
        assert audit == []
        assert [t.base.id for t in temp] == ["0", "1"]
        assert all(t.ok for t in temp)

    def test_text_is_preprocessed(self):
        dataset = make_dataset([("hello, world! 100%", "a")])
        temp, _ = build_temp_dataset(dataset, StubBackend(BackendConfig(seed=1)))
        assert temp[0].base.text == "hello world"

    def test_all_text_is_joined(self):
        dataset = make_dataset([("plain words", "a")])
        temp, _ = build_temp_dataset(dataset, StubBackend(BackendConfig(seed=1)))
        row = temp[0]
        assert row.all_text == f"{row.base.text} {row.generated_text}"

    def test_generation_prompted_with_preprocessed_text(self):
        dataset = make_dataset([("keep these words, drop punctuation!", "a")])
        backend = StubBackend(BackendConfig(seed=2))
        temp, _ = build_temp_dataset(dataset, backend)
        cleaned = preprocess("keep these words, drop punctuation!")
        assert temp[0].generated_text == backend.generate_text("0", cleaned).generated_text

    def test_scores_match_direct_recomputation(self):
        dataset = make_dataset([("alpha beta gamma delta", "a")])
        backend = StubBackend(BackendConfig(seed=3))
        temp, _ = build_temp_dataset(dataset, backend)
        row = temp[0]
        expected = score_pair(
            row.base.text, row.generated_text, row.original_embedding, row.generated_embedding
        )
        assert row.scores == expected

    def test_custom_preprocess_config_respected(self):
        dataset = make_dataset([("text with 123 numbers", "a")])
        config = PreprocessConfig(remove_digits_and_percent=False)
        temp, _ = build_temp_dataset(dataset, StubBackend(BackendConfig(seed=1)), config)
        assert "123" in temp[0].base.text

    def test_empty_generation_keeps_row_with_zero_scores(self, tmp_path):
        fixture = tmp_path / "fixture.jsonl"
        write_fixture(fixture, [{"id": "0", "generated": ""}, {"id": "1", "generated": "words here"}])
        dataset = make_dataset([("first text", "a"), ("second text", "a")])
        backend = ReplayBackend(BackendConfig(kind="replay", fixture_path=str(fixture)))
        temp, audit = build_temp_dataset(dataset, backend)
        assert len(temp) == 2
        empty_row = temp[0]
        assert empty_row.status == "empty_generation"
        assert not empty_row.ok
        assert empty_row.scores.euclidean == 0.0
        assert empty_row.generated_embedding is None
        assert [e.record_id for e in audit] == ["0"]
        assert audit[0].stage == "generate"

    def test_generation_failure_audited_without_row(self, tmp_path):
        fixture = tmp_path / "fixture.jsonl"
        write_fixture(fixture, [{"id": "0", "generated": "fine"}])
        dataset = make_dataset([("first text", "a"), ("second text", "a")])
        backend = ReplayBackend(BackendConfig(kind="replay", fixture_path=str(fixture)))
        temp, audit = build_temp_dataset(dataset, backend)
        assert [t.base.id for t in temp] == ["0"]
        assert len(audit) == 1
        assert audit[0].record_id == "1"
        assert audit[0].stage == "generate"
        assert "fixture" in audit[0].reason

    def test_zero_norm_embedding_audited_as_score_failure(self, tmp_path):
        fixture = tmp_path / "fixture.jsonl"
        write_fixture(
            fixture,
            [{"id": "0", "generated": "words", "orig_embedding": [0.0, 0.0], "gen_embedding": [1.0, 0.0]}],
        )
        dataset = make_dataset([("some text", "a")])
        backend = ReplayBackend(BackendConfig(kind="replay", fixture_path=str(fixture)))
        temp, audit = build_temp_dataset(dataset, backend)
        assert temp == []
        assert audit[0].stage == "score"
        assert "zero-norm" in audit[0].reason

    def test_unavailable_backend_aborts_run(self, tmp_path):
        dataset = make_dataset([("text", "a")])
        backend = ReplayBackend(
            BackendConfig(kind="replay", fixture_path=str(tmp_path / "missing.jsonl"))
        )
        with pytest.raises(BackendUnavailableError, match="not ready"):
            build_temp_dataset(dataset, backend)

    def test_parallel_jobs_match_serial(self):
        dataset = make_dataset([(f"sample number {i} text", "a") for i in range(12)])
        backend = StubBackend(BackendConfig(seed=5))
        serial, _ = build_temp_dataset(dataset, backend, jobs=1)
        parallel, _ = build_temp_dataset(dataset, backend, jobs=4)
        assert serial == parallel


class TestComputeThresholds:
    def test_hand_means(self):
        records = [
            make_temp_row(LabeledRecord(id="0", text="x", label="a"), 0.2, 0.4, 0.6, 0.8),
            make_temp_row(LabeledRecord(id="1", text="y", label="a"), 0.4, 0.6, 0.8, 1.0),
        ]
        thresholds = compute_thresholds(records)
        assert thresholds.euclidean == pytest.approx(0.3, abs=1e-15)
        assert thresholds.cosine == pytest.approx(0.5, abs=1e-15)
        assert thresholds.jaccard == pytest.approx(0.7, abs=1e-15)
        assert thresholds.bleu == pytest.approx(0.9, abs=1e-15)

    def test_failed_rows_excluded(self):
        records = [
            make_temp_row(LabeledRecord(id="0", text="x", label="a"), 0.2, 0.2, 0.2, 0.2),
            make_temp_row(
                LabeledRecord(id="1", text="y", label="a"), 1.0, 1.0, 1.0, 1.0,
                generated="", status="empty_generation",
            ),
        ]
        thresholds = compute_thresholds(records)
        assert thresholds.euclidean == 0.2

    def test_no_scored_rows(self):
        records = [
            make_temp_row(
                LabeledRecord(id="0", text="x", label="a"), status="empty_generation"
            )
        ]
        with pytest.raises(ValueError, match="no successfully scored"):
            compute_thresholds(records)

    def test_agrees_with_naive_mean(self, rng):
        records = [
            make_temp_row(
                LabeledRecord(id=str(i), text="x", label="a"),
                rng.random(), rng.random(), rng.random(), rng.random(),
            )
            for i in range(500)
        ]
        thresholds = compute_thresholds(records)
        for metric in ("euclidean", "cosine", "jaccard", "bleu"):
            naive = naive_mean([r.scores.get(metric) for r in records])
            assert abs(thresholds.get(metric) - naive) <= 1e-12

    def test_round_trip(self):
        assert ThresholdSet.from_dict(THRESHOLDS.as_dict()) == THRESHOLDS


class TestAugmentationPlan:
    def test_requires_labels(self):
        with pytest.raises(ValueError, match="at least one label"):
            AugmentationPlan(selected_labels=frozenset())

    def test_rejects_unknown_variant(self):
        with pytest.raises(ValueError, match="unknown variant"):
            AugmentationPlan(selected_labels=frozenset({"a"}), variant="both_texts")

    def test_rejects_unknown_metric(self):
        with pytest.raises(ValueError, match="unknown metrics"):
            AugmentationPlan(selected_labels=frozenset({"a"}), metrics=("euclidean", "hamming"))


class TestAugment:
    def base_setup(self):
        original = make_dataset(
            [("one text", "minority"), ("two text", "minority"), ("三 text", "majority")]
        )
        temp = [
            make_temp_row(original.records[0], 0.9, 0.9, 0.9, 0.9, generated="gen zero"),
            make_temp_row(original.records[1], 0.1, 0.5, 0.1, 0.1, generated="gen one"),
            make_temp_row(original.records[2], 0.9, 0.9, 0.9, 0.9, generated="gen two"),
        ]
        plan = AugmentationPlan(selected_labels=frozenset({"minority"}))
        return original, temp, plan

    def test_admission_is_inclusive_and_label_restricted(self):
        original, temp, plan = self.base_setup()
        outputs, _ = augment(original, temp, THRESHOLDS, plan)
        euclidean_ids = [r.id for r in outputs["euclidean"].records]
        # Row 0 passes (0.9 >= 0.5), row 1 fails (0.1), row 2 passes the
        # score but carries a non-selected label.
        assert euclidean_ids == ["0", "1", "2", "0:euclidean"]
        cosine_ids = [r.id for r in outputs["cosine"].records]
        # Row 1's cosine sits exactly on the threshold: admitted.
        assert cosine_ids == ["0", "1", "2", "0:cosine", "1:cosine"]

    def test_originals_preserved_bitwise_and_first(self):
        original, temp, plan = self.base_setup()
        outputs, _ = augment(original, temp, THRESHOLDS, plan)
        for dataset in outputs.values():
            assert dataset.records[: len(original.records)] == original.records

    def test_new_record_provenance(self):
        original, temp, plan = self.base_setup()
        outputs, _ = augment(original, temp, THRESHOLDS, plan)
        added = outputs["jaccard"].records[-1]
        assert added.id == "0:jaccard"
        assert added.source_id == "0"
        assert added.admitted_by == "jaccard"
        assert added.variant == "all_text"
        assert added.label == "minority"
        assert added.text == temp[0].all_text

    def test_new_text_variant_uses_generated_only(self):
        original, temp, _ = self.base_setup()
        plan = AugmentationPlan(selected_labels=frozenset({"minority"}), variant="new_text")
        outputs, _ = augment(original, temp, THRESHOLDS, plan)
        added = outputs["bleu"].records[-1]
        assert added.text == "gen zero"
        assert added.variant == "new_text"

    def test_non_ok_rows_never_admitted(self):
        original, temp, plan = self.base_setup()
        temp[0] = make_temp_row(
            original.records[0], 0.9, 0.9, 0.9, 0.9, generated="", status="empty_generation"
        )
        outputs, _ = augment(original, temp, THRESHOLDS, plan)
        assert len(outputs["euclidean"]) == len(original)

    def test_metric_subset_only(self):
        original, temp, _ = self.base_setup()
        plan = AugmentationPlan(
            selected_labels=frozenset({"minority"}), metrics=("cosine", "bleu")
        )
        outputs, _ = augment(original, temp, THRESHOLDS, plan)
        assert sorted(outputs) == ["bleu", "cosine"]

    def test_unknown_temp_id_rejected(self):
        original, temp, plan = self.base_setup()
        temp.append(make_temp_row(LabeledRecord(id="404", text="x", label="minority")))
        with pytest.raises(ValueError, match="'404'"):
            augment(original, temp, THRESHOLDS, plan)

    def test_unknown_selected_label_rejected(self):
        original, temp, _ = self.base_setup()
        plan = AugmentationPlan(selected_labels=frozenset({"ghost"}))
        with pytest.raises(ValueError, match="ghost"):
            augment(original, temp, THRESHOLDS, plan)

    def test_matches_naive_admission_oracle(self, rng):
        labels = ["a", "b", "c"]
        original = make_dataset(
            [(f"text {i}", rng.choice(labels)) for i in range(40)]
        )
        temp = [
            make_temp_row(
                record, rng.random(), rng.random(), rng.random(), rng.random(),
                generated=f"gen {record.id}",
            )
            for record in original.records
        ]
        thresholds = ThresholdSet(
            euclidean=rng.random(), cosine=rng.random(),
            jaccard=rng.random(), bleu=rng.random(),
        )
        plan = AugmentationPlan(selected_labels=frozenset({"a", "c"}))
        outputs, _ = augment(original, temp, thresholds, plan)
        for metric in ("euclidean", "cosine", "jaccard", "bleu"):
            admitted = {
                r.source_id for r in outputs[metric].records if not r.is_original
            }
            assert admitted == naive_admitted_ids(temp, thresholds, {"a", "c"}, metric)


class TestGrowthReport:
    def test_counts_and_percent(self):
        original, temp, plan = self.setup_case()
        _, report = augment(original, temp, THRESHOLDS, plan)
        assert report.labels == ("majority", "minority")
        assert report.original_counts == {"majority": 2, "minority": 2}
        assert report.added_counts["euclidean"] == {"majority": 0, "minority": 2}
        assert report.final_count("euclidean", "minority") == 4
        assert report.growth_percent("euclidean") == pytest.approx(50.0)

    def setup_case(self):
        original = make_dataset(
            [
                ("m one", "minority"), ("m two", "minority"),
                ("M one", "majority"), ("M two", "majority"),
            ]
        )
        temp = [
            make_temp_row(record, 0.9, 0.9, 0.9, 0.9, generated=f"g{record.id}")
            for record in original.records
        ]
        plan = AugmentationPlan(selected_labels=frozenset({"minority"}))
        return original, temp, plan

    def test_non_selected_labels_constant(self):
        original, temp, plan = self.setup_case()
        _, report = augment(original, temp, THRESHOLDS, plan)
        for metric in ("euclidean", "cosine", "jaccard", "bleu"):
            assert report.added_counts[metric]["majority"] == 0
            assert report.final_count(metric, "majority") == 2

    def test_table_shape(self):
        original, temp, plan = self.setup_case()
        _, report = augment(original, temp, THRESHOLDS, plan)
        lines = report.to_table().splitlines()
        assert len(lines) == 1 + 2 + 1  # header, two labels, total
        assert lines[0].split()[:2] == ["Class", "Original"]
        assert lines[-1].startswith("Total")
        total_cells = lines[-1].split()
        assert total_cells[1] == "4"
        assert total_cells[2] == "6"  # euclidean column: 4 originals + 2 added

    def test_as_dict_final_equals_original_plus_added(self):
        original, temp, plan = self.setup_case()
        _, report = augment(original, temp, THRESHOLDS, plan)
        payload = report.as_dict()
        for metric, block in payload["metrics"].items():
            for label in payload["labels"]:
                assert block["final"][label] == payload["original"][label] + block["added"][label]


class TestTempSerialization:
    def test_round_trip_preserves_rows(self, tmp_path):
        dataset = make_dataset([("round trip text", "a"), ("more text here", "b")])
        backend = StubBackend(BackendConfig(seed=8))
        temp, _ = build_temp_dataset(dataset, backend)
        path = tmp_path / "temp.jsonl"
        temp_to_jsonl(temp, path)
        loaded = temp_from_jsonl(path)
        assert loaded == temp

    def test_key_order_on_disk(self, tmp_path):
        dataset = make_dataset([("key order text", "a")])
        temp, _ = build_temp_dataset(dataset, StubBackend(BackendConfig(seed=8)))
        path = tmp_path / "temp.jsonl"
        temp_to_jsonl(temp, path)
        row = json.loads(path.read_text(encoding="utf-8").splitlines()[0])
        assert list(row) == [
            "id", "text", "label", "generated", "all_text", "emb_orig", "emb_gen",
            "sim_euclidean", "sim_cosine", "sim_jaccard", "sim_bleu", "status",
        ]

    def test_scores_survive_exactly(self, tmp_path):
        # JSON float serialization round-trips bit-for-bit, so thresholds
        # computed from a reloaded file match in-memory ones exactly.
        dataset = make_dataset([(f"text number {i} with words", "a") for i in range(20)])
        temp, _ = build_temp_dataset(dataset, StubBackend(BackendConfig(seed=9)))
        path = tmp_path / "temp.jsonl"
        temp_to_jsonl(temp, path)
        loaded = temp_from_jsonl(path)
        assert compute_thresholds(loaded) == compute_thresholds(temp)

    def test_missing_key_rejected(self, tmp_path):
        path = tmp_path / "temp.jsonl"
        path.write_text('{"id": "0", "text": "x"}\n', encoding="utf-8")
        with pytest.raises(ValueError, match="missing keys"):
            temp_from_jsonl(path)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="does not exist"):
            temp_from_jsonl(tmp_path / "absent.jsonl")

    def test_invalid_json_line_rejected(self, tmp_path):
        path = tmp_path / "temp.jsonl"
        path.write_text("oops\n", encoding="utf-8")
        with pytest.raises(ValueError, match="line 1"):
            temp_from_jsonl(path)
