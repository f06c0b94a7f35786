"""
Settings and run-config tests
"""

import json

import pytest
from pydantic import ValidationError

from segcurate.core.config import (
    Settings,
    dump_run_config,
    load_run_config,
    load_synth_config,
    validate_settings,
)
from segcurate.core.exceptions import ConfigurationException
from segcurate.schemas.config import CurationConfig, PipelineSwitches, SelectionLevel, TrainConfig


class TestDefaults:
    def test_default_snapshot(self):
        cfg = CurationConfig()
        assert cfg.schema_version == 1
        assert cfg.segmentation.velocity_eps == 0.005
        assert cfg.segmentation.debounce_window == 5
        assert cfg.segmentation.min_segment_len == 4
        assert (cfg.augment.n_positive, cfg.augment.n_negative) == (500, 500)
        assert cfg.train.embed_dim == 256
        assert cfg.train.temperature == 0.1
        assert cfg.train.learning_rate == 0.005
        assert cfg.vote.k == 64
        assert cfg.vote.delta_c == 0.5
        assert cfg.optimize.delta_theta == 75.0
        assert cfg.switches.label == "segment/opt/relabel"

    def test_configs_are_frozen(self):
        cfg = CurationConfig()
        with pytest.raises(ValidationError):
            cfg.vote = None


class TestValidation:
    def test_relabeling_requires_optimization(self):
        with pytest.raises(ValidationError):
            PipelineSwitches(trajectory_optimization=False, action_relabeling=True)
        switches = PipelineSwitches(selection_level=SelectionLevel.NONE,
                                    trajectory_optimization=False, action_relabeling=False)
        assert switches.label == "none/-/-"

    def test_odd_embedding_width(self):
        with pytest.raises(ValidationError):
            TrainConfig(embed_dim=7)

    def test_unknown_keys(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"vote": {"k": 3, "kk": 1}}), encoding="utf-8")
        with pytest.raises(ConfigurationException):
            load_run_config(path)

    def test_schema_version(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"schema_version": 2}), encoding="utf-8")
        with pytest.raises(ConfigurationException) as exc_info:
            load_run_config(path)
        assert exc_info.value.exit_code == 2

    def test_missing_and_malformed_files(self, tmp_path):
        with pytest.raises(ConfigurationException):
            load_run_config(tmp_path / "missing.json")
        broken = tmp_path / "broken.json"
        broken.write_text("{", encoding="utf-8")
        with pytest.raises(ConfigurationException):
            load_run_config(broken)
        listing = tmp_path / "list.json"
        listing.write_text("[]", encoding="utf-8")
        with pytest.raises(ConfigurationException):
            load_run_config(listing)


class TestRunConfigFiles:
    def test_partial_file_takes_defaults(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"vote": {"k": 3}}), encoding="utf-8")
        cfg = load_run_config(path)
        assert cfg.vote.k == 3
        assert cfg.vote.delta_c == 0.5
        assert cfg.train == TrainConfig()

    def test_seed_override(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"train": {"epochs": 1, "seed": 4}}), encoding="utf-8")
        cfg = load_run_config(path, seed=9)
        assert cfg.train.seed == 9
        assert cfg.augment.seed == 9
        assert cfg.train.epochs == 1

    def test_dump_and_reload(self, tmp_path, fast_config):
        path = tmp_path / "nested" / "resolved_config.json"
        dump_run_config(fast_config, path)
        assert load_run_config(path) == fast_config

    def test_synth_overrides(self, tmp_path):
        path = tmp_path / "synth.json"
        path.write_text(json.dumps({"n_expert": 4, "n_suboptimal": 6}), encoding="utf-8")
        cfg = load_synth_config(path, seed=12, n_expert=1, n_suboptimal=None)
        assert (cfg.n_expert, cfg.n_suboptimal, cfg.seed) == (1, 6, 12)
        with pytest.raises(ConfigurationException):
            load_synth_config(None, subtasks=0)


class TestSettings:
    def test_defaults_are_valid(self):
        validate_settings(Settings())

    def test_every_problem_is_reported(self):
        bad = Settings(LOG_LEVEL="LOUD", DEFAULT_THREADS=0)
        with pytest.raises(ConfigurationException) as exc_info:
            validate_settings(bad)
        assert "LOG_LEVEL" in str(exc_info.value)
        assert "DEFAULT_THREADS" in str(exc_info.value)

    def test_environment_prefix(self, monkeypatch):
        monkeypatch.setenv("SEGCURATE_DEFAULT_THREADS", "4")
        assert Settings().DEFAULT_THREADS == 4
