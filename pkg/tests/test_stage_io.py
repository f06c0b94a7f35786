"""
Stage artifact I/O tests
"""

import json

import pytest

from segcurate.core.exceptions import DatasetFormatException, DatasetIOException
from segcurate.services import stage_io


class TestSegmentFiles:
    def test_segments_slice_back_out_of_the_dataset(self, tmp_path, small_synth):
        dataset = small_synth.dataset
        demo = dataset.demos[0]
        segments = [demo.slice(1, 4), demo.slice(4, demo.T)]
        path = tmp_path / "segments.jsonl"
        stage_io.write_segments(segments, path)

        read = stage_io.read_segments(path, dataset)
        assert [(s.demo_id, s.start, s.end) for s in read] == [(demo.id, 1, 4), (demo.id, 4, demo.T)]
        assert not stage_io.is_label_file(path)

    def test_label_files_filter_by_label(self, tmp_path, small_synth):
        demo = small_synth.dataset.demos[0]
        segments = [demo.slice(1, 4), demo.slice(4, demo.T)]
        path = tmp_path / "labels.jsonl"
        stage_io.write_labels(segments, [0.9, 0.1], [True, False], path)

        assert stage_io.is_label_file(path)
        negatives = stage_io.read_segments(path, small_synth.dataset, only_label="negative")
        assert [(s.start, s.end) for s in negatives] == [(4, demo.T)]

    def test_unknown_demo(self, tmp_path, small_synth):
        path = tmp_path / "segments.jsonl"
        path.write_text(json.dumps({"demo_id": "nope", "start": 1, "end": 3}) + "\n", encoding="utf-8")
        with pytest.raises(DatasetFormatException):
            stage_io.read_segments(path, small_synth.dataset)

    def test_errors_name_the_physical_line(self, tmp_path, small_synth):
        demo = small_synth.dataset.demos[0]
        good = json.dumps({"demo_id": demo.id, "start": 1, "end": 3})
        bad = json.dumps({"demo_id": demo.id, "start": 1, "end": demo.T + 1})
        path = tmp_path / "segments.jsonl"
        path.write_text(f"{good}\n\n\n{bad}\n", encoding="utf-8")
        with pytest.raises(DatasetFormatException) as exc_info:
            stage_io.read_segments(path, small_synth.dataset)
        assert exc_info.value.line == 4
        assert exc_info.value.field == "end"

    def test_segment_outside_demo(self, tmp_path, small_synth):
        demo = small_synth.dataset.demos[0]
        path = tmp_path / "segments.jsonl"
        path.write_text(json.dumps({"demo_id": demo.id, "start": 1, "end": demo.T + 1}) + "\n", encoding="utf-8")
        with pytest.raises(DatasetFormatException):
            stage_io.read_segments(path, small_synth.dataset)


class TestTruth:
    def test_round_trip(self, tmp_path, small_synth):
        path = tmp_path / "nested" / "truth.json"
        stage_io.save_truth(small_synth.truth, path)
        assert stage_io.load_truth(path) == small_synth.truth

    def test_missing(self, tmp_path):
        with pytest.raises(DatasetIOException):
            stage_io.load_truth(tmp_path / "missing.json")
