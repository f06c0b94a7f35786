"""
Synthetic dataset generator tests
"""

import numpy as np
import pytest

from segcurate.core.dataset import save_dataset
from segcurate.models.demonstration import ActionKind, DatasetRole, SourceQuality, polyline_length
from segcurate.modules.optimization import greedy_optimize
from segcurate.modules.segmentation import gripper_toggles, segment_demo
from segcurate.modules.synth import generate, generate_reference
from segcurate.schemas.config import OptimizeConfig, SegmentationConfig, SynthConfig


def subtask_length(demo, truth, index: int) -> float:
    """Polyline length of a subtask, measured from the previous subtask's end point"""
    start = 1 if index == 0 else truth.subtask_ends[index - 1]
    return polyline_length(demo.positions[start - 1:truth.subtask_ends[index]])


class TestGenerate:
    def test_expert_only_is_clean(self):
        result = generate(SynthConfig(n_expert=4, n_suboptimal=0, seed=1))
        assert len(result.dataset) == 4
        assert all(demo.source_quality == SourceQuality.EXPERT for demo in result.dataset)
        assert all(not any(truth.corrupted) for truth in result.truth.demos)
        assert all(truth.pause_centers == [] and truth.fumbles == [] for truth in result.truth.demos)

    def test_ids_and_roles(self, small_synth):
        assert [demo.id for demo in small_synth.dataset] == ["demo_000", "demo_001", "demo_002", "demo_003"]
        assert small_synth.dataset.role == DatasetRole.MIXED
        qualities = [demo.source_quality for demo in small_synth.dataset]
        assert qualities == [SourceQuality.EXPERT] * 2 + [SourceQuality.SUBOPTIMAL] * 2

    def test_silent_noise_reproduces_expert_skeletons(self, silent_noise):
        expert = generate(SynthConfig(n_expert=3, n_suboptimal=0, seed=5))
        quiet = generate(SynthConfig(n_expert=0, n_suboptimal=3, seed=5, noise=silent_noise))
        for clean, noisy in zip(expert.dataset, quiet.dataset):
            assert np.array_equal(clean.positions, noisy.positions)
            assert np.array_equal(clean.grippers, noisy.grippers)
        assert all(not any(truth.corrupted) for truth in quiet.truth.demos)

    def test_deterministic(self, tmp_path):
        cfg = SynthConfig(n_expert=3, n_suboptimal=3, seed=7)
        first, second = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        save_dataset(generate(cfg).dataset, first)
        save_dataset(generate(cfg).dataset, second)
        assert first.read_bytes() == second.read_bytes()
        assert generate(cfg).truth == generate(cfg).truth

    def test_seed_changes_the_data(self):
        a = generate(SynthConfig(n_expert=1, n_suboptimal=0, seed=1)).dataset.demos[0]
        b = generate(SynthConfig(n_expert=1, n_suboptimal=0, seed=2)).dataset.demos[0]
        assert not np.array_equal(a.positions[:2], b.positions[:2])

    def test_relative_actions(self):
        result = generate(SynthConfig(n_expert=1, n_suboptimal=1, action_kind=ActionKind.RELATIVE, seed=3))
        assert all(demo.action_kind == ActionKind.RELATIVE for demo in result.dataset)

    def test_reference_role(self, expert_reference):
        assert expert_reference.role == DatasetRole.EXPERT_REFERENCE
        assert all(demo.source_quality == SourceQuality.EXPERT for demo in expert_reference)


class TestGroundTruth:
    @pytest.fixture(scope="class")
    def mixed(self):
        return generate(SynthConfig(n_expert=10, n_suboptimal=30, seed=17))

    def test_subtask_ends_cover_each_demo(self, mixed):
        truth = mixed.truth.by_id()
        for demo in mixed.dataset:
            ends = truth[demo.id].subtask_ends
            assert len(ends) == 3
            assert ends[-1] == demo.T
            assert ends == sorted(ends)

    def test_boundaries_are_gripper_toggles(self, mixed):
        truth = mixed.truth.by_id()
        for demo in mixed.dataset:
            toggles = gripper_toggles(demo, 0.5)
            fumble_edges = {t for first, last in truth[demo.id].fumbles for t in (first - 1, last)}
            assert set(truth[demo.id].subtask_ends[:-1]) <= set(toggles)
            assert set(toggles) == set(truth[demo.id].subtask_ends[:-1]) | fumble_edges

    def test_corruptions_only_in_suboptimal_demos(self, mixed):
        truth = mixed.truth.by_id()
        for demo in mixed.dataset:
            if demo.source_quality == SourceQuality.EXPERT:
                assert not any(truth[demo.id].corrupted)
        assert any(any(t.corrupted) for t in mixed.truth.demos)
        assert any(t.pause_centers for t in mixed.truth.demos)

    def test_pauses_are_stationary(self, mixed):
        truth = mixed.truth.by_id()
        for demo in mixed.dataset:
            for center in truth[demo.id].pause_centers:
                positions = demo.positions
                assert np.array_equal(positions[center - 1], positions[center])

    def test_corrupted_subtasks_are_longer_than_their_skeletons(self, mixed):
        skeletons = generate(SynthConfig(n_expert=40, n_suboptimal=0, seed=17))
        checked = 0
        for demo, demo_truth, skeleton, clean_truth in zip(mixed.dataset, mixed.truth.demos,
                                                           skeletons.dataset, skeletons.truth.demos):
            for i, corrupted in enumerate(demo_truth.corrupted):
                if not corrupted:
                    continue
                assert subtask_length(demo, demo_truth, i) > subtask_length(skeleton, clean_truth, i) + 1e-9
                checked += 1
        assert checked > 0

    def test_segment_truth_uses_largest_overlap(self, mixed):
        demo_truth = mixed.truth.demos[-1]
        (lo1, hi1), (lo2, hi2), _ = demo_truth.subtask_ranges()
        assert demo_truth.segment_is_clean(lo1, hi1) == (not demo_truth.corrupted[0])
        assert demo_truth.segment_is_clean(lo2 - 1, hi2) == (not demo_truth.corrupted[1])


class TestExpertGeometry:
    def test_expert_subtasks_are_straight(self, expert_reference):
        for demo in expert_reference:
            for segment in segment_demo(demo, SegmentationConfig()):
                assert greedy_optimize(segment, OptimizeConfig()) == list(range(1, segment.T + 1))

    def test_mixture_sizes(self):
        cfg = SynthConfig.from_mixture(10, 0.2, seed=1)
        assert (cfg.n_expert, cfg.n_suboptimal) == (2, 8)
        with pytest.raises(ValueError):
            SynthConfig.from_mixture(10, 1.5)
