"""
Command-line interface tests
"""

import json

import pytest
from typer.testing import CliRunner

from segcurate.core.dataset import load_dataset
from segcurate.main import app
from segcurate.services import stage_io

runner = CliRunner()


@pytest.fixture
def config_file(tmp_path, fast_config):
    path = tmp_path / "config.json"
    path.write_text(fast_config.model_dump_json(), encoding="utf-8")
    return path


@pytest.fixture
def datasets(tmp_path):
    """Mixed dataset with ground truth and a three-demo expert reference, written by the synth command"""
    mixed, truth, expert = tmp_path / "mixed.jsonl", tmp_path / "truth.json", tmp_path / "expert.jsonl"
    result = runner.invoke(app, ["synth", "--out", str(mixed), "--truth", str(truth),
                                 "--mixture", "0.5", "--total", "4", "--seed", "3"])
    assert result.exit_code == 0, result.output
    result = runner.invoke(app, ["synth", "--out", str(expert), "--expert-only",
                                 "--mixture", "1.0", "--total", "3", "--seed", "101"])
    assert result.exit_code == 0, result.output
    return mixed, truth, expert


class TestSynth:
    def test_writes_dataset_truth_and_config(self, datasets, tmp_path):
        mixed, truth, expert = datasets
        assert len(load_dataset(mixed)) == 4
        assert len(load_dataset(expert)) == 3
        assert len(json.loads(truth.read_text(encoding="utf-8"))["demos"]) == 4
        assert json.loads((tmp_path / "synth_config.json").read_text(encoding="utf-8"))["seed"] == 101

    def test_invalid_mixture(self, tmp_path):
        result = runner.invoke(app, ["synth", "--out", str(tmp_path / "x.jsonl"), "--mixture", "1.5"])
        assert result.exit_code == 2


class TestStages:
    def test_segment(self, datasets, tmp_path, config_file):
        mixed, _, _ = datasets
        out = tmp_path / "segments.jsonl"
        result = runner.invoke(app, ["segment", "--in", str(mixed), "--out", str(out), "--config", str(config_file)])
        assert result.exit_code == 0, result.output
        records = [json.loads(line) for line in out.read_text(encoding="utf-8").splitlines()]
        assert records and set(records[0]) == {"demo_id", "start", "end"}
        assert (tmp_path / stage_io.RESOLVED_CONFIG_FILE).exists()

    def test_stage_by_stage(self, datasets, tmp_path, config_file):
        mixed, _, expert = datasets
        aug, params, ref = tmp_path / "aug", tmp_path / "params.bin", tmp_path / "ref.bin"
        segments, labels, optimized = tmp_path / "seg.jsonl", tmp_path / "labels.jsonl", tmp_path / "opt.jsonl"
        cfg = ["--config", str(config_file)]

        steps = [
            ["augment", "--expert", str(expert), "--out", str(aug)],
            ["train-repr", "--aug", str(aug), "--out", str(params), "--ref-out", str(ref), "--expert", str(expert)],
            ["segment", "--in", str(mixed), "--out", str(segments)],
            ["classify", "--in", str(mixed), "--segments", str(segments), "--params", str(params),
             "--ref", str(ref), "--out", str(labels)],
            ["optimize", "--in", str(mixed), "--segments", str(labels), "--out", str(optimized)],
        ]
        for args in steps:
            result = runner.invoke(app, args + cfg)
            assert result.exit_code == 0, (args[0], result.output)

        label_records = [json.loads(line) for line in labels.read_text(encoding="utf-8").splitlines()]
        negatives = sum(record["label"] == "negative" for record in label_records)
        assert len(optimized.read_text(encoding="utf-8").splitlines()) == negatives
        assert (aug / "index.json").exists()
        assert (tmp_path / stage_io.LOSS_TRACE_FILE).exists()

    def test_reference_needs_expert(self, tmp_path):
        result = runner.invoke(app, ["train-repr", "--aug", str(tmp_path), "--out", str(tmp_path / "p.bin"),
                                     "--ref-out", str(tmp_path / "r.bin")])
        assert result.exit_code == 2
        assert "Error:" in result.output


class TestCurate:
    def test_end_to_end(self, datasets, tmp_path, config_file):
        mixed, truth, expert = datasets
        run = tmp_path / "run"
        result = runner.invoke(app, ["curate", "--mixed", str(mixed), "--expert", str(expert),
                                     "--out", str(run), "--truth", str(truth), "--config", str(config_file)])
        assert result.exit_code == 0, result.output
        assert "utilization   1.0000" in result.output
        assert len(load_dataset(run / stage_io.CURATED_FILE)) == 4

        result = runner.invoke(app, ["report", "--run", str(run), "--truth", str(truth)])
        assert result.exit_code == 0, result.output
        assert "f1" in result.output
        assert json.loads((run / "report.json").read_text(encoding="utf-8"))["metrics"] is not None

    def test_missing_dataset_is_a_data_error(self, datasets, tmp_path, config_file):
        _, _, expert = datasets
        result = runner.invoke(app, ["curate", "--mixed", str(tmp_path / "missing.jsonl"), "--expert", str(expert),
                                     "--out", str(tmp_path / "run"), "--config", str(config_file)])
        assert result.exit_code == 3

    def test_bad_config_is_a_config_error(self, datasets, tmp_path):
        mixed, _, expert = datasets
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"switches": {"trajectory_optimization": False}}), encoding="utf-8")
        result = runner.invoke(app, ["curate", "--mixed", str(mixed), "--expert", str(expert),
                                     "--out", str(tmp_path / "run"), "--config", str(bad)])
        assert result.exit_code == 2

    def test_report_without_run(self, tmp_path):
        result = runner.invoke(app, ["report", "--run", str(tmp_path)])
        assert result.exit_code == 3
