"""
Keyframe segmentation tests
"""

import numpy as np
import pytest

from segcurate.modules.segmentation import (
    find_keyframes,
    gripper_toggles,
    low_speed_runs,
    segment_by_keyframes,
    segment_dataset,
    segment_demo,
    speeds,
)
from segcurate.modules.synth import generate
from segcurate.schemas.config import SegmentationConfig, SynthConfig

CFG = SegmentationConfig()


def _paused_line(T: int = 40, pause_first: int = 16, pause_len: int = 10, step: float = 0.01):
    """Constant-speed line along x that holds still for pause_len points starting at pause_first"""
    x, positions = 0.0, []
    for t in range(1, T + 1):
        if t > 1 and not (pause_first < t < pause_first + pause_len):
            x += step
        positions.append([x, 0.0, 0.0])
    return positions


class TestKeyframes:
    def test_gripper_toggles(self, make_demo):
        demo = make_demo(np.linspace([0, 0, 0], [0.6, 0, 0], 7), grippers=[1, 1, 0, 0, 0, 1, 1])
        assert gripper_toggles(demo, 0.5) == [2, 5]
        assert find_keyframes(demo, CFG) == [1, 2, 5, 7]

    def test_straight_constant_speed(self, make_demo):
        demo = make_demo(np.linspace([0, 0, 0], [1, 0, 0], 30))
        assert find_keyframes(demo, CFG) == [1, 30]

    def test_pause_midpoint(self, make_demo):
        demo = make_demo(_paused_line())
        assert low_speed_runs(speeds(demo), CFG.velocity_eps) == [(16, 24)]
        assert find_keyframes(demo, CFG) == [1, 20, 40]

    def test_short_runs_are_ignored(self, make_demo):
        demo = make_demo(_paused_line(pause_len=4))
        assert find_keyframes(demo, CFG) == [1, 40]

    def test_short_demo_gets_no_pause_keyframes(self, make_demo):
        demo = make_demo([[0.0, 0.0, 0.0]] * 7)
        assert find_keyframes(demo, CFG) == [1, 7]

    def test_short_demo_still_splits_at_toggles(self, make_demo):
        demo = make_demo([[0.0, 0.0, 0.0]] * 7, grippers=[1, 1, 1, 0, 0, 0, 0])
        assert find_keyframes(demo, CFG) == [1, 3, 7]
        assert [(s.start, s.end) for s in segment_demo(demo, CFG)] == [(1, 3), (4, 7)]

    def test_pause_near_toggle_is_dropped(self, make_demo):
        positions = _paused_line(pause_first=16)
        grippers = [1.0] * 18 + [0.0] * 22
        demo = make_demo(positions, grippers=grippers)
        # toggle at 18 wins over the pause midpoint at 20
        assert find_keyframes(demo, CFG) == [1, 18, 40]

    def test_toggle_next_to_start_is_absorbed(self, make_demo):
        demo = make_demo(np.linspace([0, 0, 0], [1, 0, 0], 6), grippers=[1, 0, 0, 0, 0, 0])
        # [1..1] would be a one-step segment
        assert find_keyframes(demo, CFG) == [1, 6]

    @pytest.mark.parametrize("velocity_eps", [0.001, 0.005, 0.05, 0.5])
    def test_velocity_eps_never_removes_toggles(self, small_synth, velocity_eps):
        cfg = SegmentationConfig(velocity_eps=velocity_eps)
        for demo in small_synth.dataset:
            toggles = gripper_toggles(demo, cfg.gripper_toggle_threshold)
            assert set(toggles) <= set(find_keyframes(demo, cfg))

    def test_deterministic(self, small_synth):
        demo = small_synth.dataset.demos[3]
        assert find_keyframes(demo, CFG) == find_keyframes(demo, CFG)


class TestSegments:
    def test_tiling(self, make_demo):
        demo = make_demo(np.linspace([0, 0, 0], [1, 0, 0], 40))
        segments = segment_by_keyframes(demo, [1, 20, 40])
        assert [(s.start, s.end) for s in segments] == [(1, 20), (21, 40)]

    def test_whole_demo(self, make_demo):
        demo = make_demo(np.linspace([0, 0, 0], [1, 0, 0], 12))
        segments = segment_demo(demo, CFG)
        assert len(segments) == 1
        assert (segments[0].start, segments[0].end) == (1, 12)

    def test_expert_subtasks_are_recovered(self):
        result = generate(SynthConfig(n_expert=5, n_suboptimal=0, seed=21))
        truth = result.truth.by_id()
        for demo in result.dataset:
            segments = segment_demo(demo, CFG)
            assert [(s.start, s.end) for s in segments] == truth[demo.id].subtask_ranges()

    def test_segment_dataset_keeps_order(self, small_synth):
        segments = segment_dataset(small_synth.dataset.demos, CFG)
        assert [s.demo_id for s in segments] == sorted(s.demo_id for s in segments)
        threaded = segment_dataset(small_synth.dataset.demos, CFG, threads=4)
        assert [s.key for s in threaded] == [s.key for s in segments]


class TestSynthProperties:
    @pytest.fixture(scope="class")
    def synth_demos(self):
        result = generate(SynthConfig(n_expert=20, n_suboptimal=80, seed=8))
        return result

    def test_partition(self, synth_demos):
        for demo in synth_demos.dataset:
            segments = segment_demo(demo, CFG)
            covered = [t for s in segments for t in range(s.start, s.end + 1)]
            assert covered == list(range(1, demo.T + 1))
            assert all(s.T >= 2 for s in segments)

    def test_every_toggle_is_a_keyframe(self, synth_demos):
        for demo in synth_demos.dataset:
            keyframes = find_keyframes(demo, CFG)
            for t in gripper_toggles(demo, CFG.gripper_toggle_threshold):
                assert t in keyframes

    def test_pause_recovery(self, synth_demos):
        truth = synth_demos.truth.by_id()
        pauses = 0
        for demo in synth_demos.dataset:
            keyframes = find_keyframes(demo, CFG)
            for center in truth[demo.id].pause_centers:
                pauses += 1
                assert min(abs(k - center) for k in keyframes) <= 2
        assert pauses > 0
