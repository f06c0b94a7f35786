"""
Dataset codec and action-frame conversion tests
"""

import json
import math

import numpy as np
import pytest

from segcurate.core.dataset import (
    absolute_to_relative,
    demo_to_dict,
    dump_canonical,
    load_dataset,
    relative_to_absolute,
    save_dataset,
)
from segcurate.core.exceptions import (
    DatasetFormatException,
    DatasetIOException,
    MixedActionKindException,
)
from segcurate.models.demonstration import (
    Action,
    ActionKind,
    Dataset,
    DatasetRole,
    Demonstration,
    Observation,
    Pose,
    SourceQuality,
    Step,
    evaluation_view,
)
from segcurate.modules.synth import generate
from segcurate.schemas.config import SynthConfig

YAW_90 = (math.cos(math.pi / 4), 0.0, 0.0, math.sin(math.pi / 4))
IDENTITY = (1.0, 0.0, 0.0, 0.0)


def _relative_demo(orientation, delta=(1.0, 0.0, 0.0)) -> Demonstration:
    obs = Observation(Pose((0.0, 0.0, 0.0), orientation), 1.0)
    act = Action(ActionKind.RELATIVE, Pose(delta, IDENTITY), 1.0)
    return Demonstration("rel", (Step(obs, act), Step(obs, act)), 0.05)


def _write_line(path, record):
    path.write_text(json.dumps(record) + "\n", encoding="utf-8")


class TestSerialization:
    def test_round_trip_is_exact(self, tmp_path, small_synth):
        path = tmp_path / "ds.jsonl"
        save_dataset(small_synth.dataset, path)
        loaded = load_dataset(path)

        assert len(loaded) == len(small_synth.dataset)
        assert loaded.equals(small_synth.dataset)

    def test_two_demos_of_ten_steps(self, tmp_path, make_demo):
        points = np.linspace([0, 0, 0], [1, 0, 0], 10)
        dataset = Dataset((make_demo(points, demo_id="a"), make_demo(points, demo_id="b")))
        path = tmp_path / "ds.jsonl"
        save_dataset(dataset, path)

        loaded = load_dataset(path)
        assert len(loaded) == 2
        assert [demo.T for demo in loaded] == [10, 10]

    def test_empty_dataset(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        save_dataset(Dataset(()), path)

        assert path.read_text(encoding="utf-8") == ""
        assert len(load_dataset(path)) == 0

    def test_proprio_vectors_are_preserved(self, tmp_path):
        result = generate(SynthConfig(n_expert=1, n_suboptimal=1, proprio_dim=23, seed=4))
        path = tmp_path / "ds.jsonl"
        save_dataset(result.dataset, path)
        loaded = load_dataset(path)

        original = result.dataset.demos[1].steps[5].obs.proprio
        assert loaded.demos[1].steps[5].obs.proprio.shape == (23,)
        assert np.array_equal(loaded.demos[1].steps[5].obs.proprio, original)

    def test_saved_file_is_canonical(self, tmp_path, small_synth):
        first, second = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        save_dataset(small_synth.dataset, first)
        save_dataset(load_dataset(first), second)
        assert first.read_bytes() == second.read_bytes()

    def test_floats_use_17_significant_digits(self):
        assert dump_canonical({"x": 0.1}) == '{"x":0.10000000000000001}'
        assert dump_canonical([1, True, None]) == "[1,true,null]"


class TestValidation:
    def test_non_unit_quaternion_names_the_record(self, tmp_path, make_demo):
        record = demo_to_dict(make_demo([[0, 0, 0], [1, 0, 0]]))
        record = json.loads(dump_canonical(record))
        record["steps"][1]["obs"]["quat"] = [2.0, 0.0, 0.0, 0.0]
        path = tmp_path / "bad.jsonl"
        _write_line(path, record)

        with pytest.raises(DatasetFormatException) as exc_info:
            load_dataset(path)
        assert exc_info.value.line == 1
        assert exc_info.value.field == "steps.1.obs.quat"
        assert str(path) in str(exc_info.value)

    def test_gripper_out_of_range(self, tmp_path, make_demo):
        record = json.loads(dump_canonical(demo_to_dict(make_demo([[0, 0, 0], [1, 0, 0]]))))
        record["steps"][0]["act"]["gripper"] = 1.5
        path = tmp_path / "bad.jsonl"
        _write_line(path, record)

        with pytest.raises(DatasetFormatException) as exc_info:
            load_dataset(path)
        assert exc_info.value.field == "steps.0.act.gripper"

    def test_mixed_action_kinds(self, tmp_path, make_demo):
        record = json.loads(dump_canonical(demo_to_dict(make_demo([[0, 0, 0], [1, 0, 0], [2, 0, 0]]))))
        record["steps"][2]["act"]["kind"] = "relative"
        path = tmp_path / "mixed.jsonl"
        _write_line(path, record)

        with pytest.raises(MixedActionKindException) as exc_info:
            load_dataset(path)
        assert exc_info.value.field == "steps.2.act.kind"

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.jsonl"
        path.write_text("{not json\n", encoding="utf-8")
        with pytest.raises(DatasetFormatException):
            load_dataset(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DatasetIOException):
            load_dataset(tmp_path / "missing.jsonl")

    def test_single_step_demo_rejected(self, make_demo):
        with pytest.raises(DatasetFormatException):
            make_demo([[0, 0, 0]])

    def test_expert_reference_needs_a_demo(self):
        with pytest.raises(DatasetFormatException):
            Dataset((), DatasetRole.EXPERT_REFERENCE)

    def test_duplicate_ids_rejected(self, make_demo):
        demo = make_demo([[0, 0, 0], [1, 0, 0]])
        with pytest.raises(DatasetFormatException):
            Dataset((demo, demo))


class TestActionFrames:
    def test_identity_frame_composition(self):
        absolute = relative_to_absolute(_relative_demo(IDENTITY))
        assert absolute.action_kind == ActionKind.ABSOLUTE
        np.testing.assert_allclose(absolute.steps[0].act.target_pose.position, [1.0, 0.0, 0.0], atol=1e-12)

    def test_yaw_rotates_the_delta(self):
        absolute = relative_to_absolute(_relative_demo(YAW_90))
        np.testing.assert_allclose(absolute.steps[0].act.target_pose.position, [0.0, 1.0, 0.0], atol=1e-9)
        np.testing.assert_allclose(absolute.steps[0].act.target_pose.orientation, YAW_90, atol=1e-9)

    def test_inverse_pair(self, small_synth):
        demo = small_synth.dataset.demos[2]
        back = relative_to_absolute(absolute_to_relative(demo))
        for original, restored in zip(demo.steps, back.steps):
            np.testing.assert_allclose(restored.act.target_pose.position,
                                       original.act.target_pose.position, atol=1e-9)
            np.testing.assert_allclose(restored.act.target_pose.orientation,
                                       original.act.target_pose.orientation, atol=1e-9)
            assert restored.act.gripper_cmd == original.act.gripper_cmd
            assert restored.obs.equals(original.obs)

    def test_wrong_kind_is_rejected(self, make_demo):
        demo = make_demo([[0, 0, 0], [1, 0, 0]])
        with pytest.raises(DatasetFormatException):
            relative_to_absolute(demo)
        with pytest.raises(DatasetFormatException):
            absolute_to_relative(_relative_demo(IDENTITY))


def test_source_quality_lives_in_evaluation_view(small_synth):
    view = evaluation_view(small_synth.dataset)
    assert view.labels["demo_000"] == SourceQuality.EXPERT
    assert view.labels["demo_003"] == SourceQuality.SUBOPTIMAL
