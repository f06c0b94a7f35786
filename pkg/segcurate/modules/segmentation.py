"""
Keyframe Segmentation
Splits demonstrations at gripper toggles and debounced low-speed pauses
"""

import logging
from typing import List, Sequence, Tuple

import numpy as np

from segcurate.models.demonstration import Demonstration, Segment
from segcurate.modules.geometry import step_lengths
from segcurate.schemas.config import SegmentationConfig
from segcurate.utils.helpers import parallel_map

logger = logging.getLogger(__name__)


def speeds(demo: Demonstration) -> np.ndarray:
    """speed(t) for t = 1..T-1 (0-based array index t-1)"""
    return step_lengths(demo.positions) / demo.dt


def gripper_toggles(demo: Demonstration, threshold: float) -> List[int]:
    """1-based t where the binarized gripper differs between t and t+1"""
    is_open = demo.grippers >= threshold
    return [int(i) + 1 for i in np.flatnonzero(is_open[:-1] != is_open[1:])]


def low_speed_runs(speed: np.ndarray, eps: float) -> List[Tuple[int, int]]:
    """Maximal runs (first, last) of 1-based t with speed(t) < eps"""
    runs = []
    start = None
    for index, slow in enumerate(speed < eps, start=1):
        if slow and start is None:
            start = index
        elif not slow and start is not None:
            runs.append((start, index - 1))
            start = None
    if start is not None:
        runs.append((start, len(speed)))
    return runs


def pause_keyframes(demo: Demonstration, cfg: SegmentationConfig) -> List[int]:
    """Midpoints (rounded down) of low-speed runs at least debounce_window long"""
    return [(first + last) // 2
            for first, last in low_speed_runs(speeds(demo), cfg.velocity_eps)
            if last - first + 1 >= cfg.debounce_window]


def find_keyframes(demo: Demonstration, cfg: SegmentationConfig) -> List[int]:
    """Sorted keyframes containing 1 and T.

    Gripper toggles are accepted first and are only absorbed when they would
    leave a segment shorter than two steps. Pause midpoints are then accepted
    in time order when they are at least min_segment_len away from every
    accepted keyframe; demos shorter than 2 * min_segment_len get none.

    Short demos still split at their gripper toggles, so a toggling demo with
    T < 2 * min_segment_len yields more than one segment.
    """
    T = demo.T
    accepted = [1]
    for t in gripper_toggles(demo, cfg.gripper_toggle_threshold):
        previous = accepted[-1]
        # segment [previous+1..t] (or [1..t] for the first one) needs >= 2 steps, as does [t+1..T]
        length = t - previous + (1 if previous == 1 else 0)
        if length >= 2 and T - t >= 2:
            accepted.append(t)
        else:
            logger.debug(f"Demo {demo.id}: toggle at t={t} absorbed (adjacent segment too short)")
    accepted.append(T)

    if T < 2 * cfg.min_segment_len:
        return sorted(set(accepted))
    for t in pause_keyframes(demo, cfg):
        if all(abs(t - k) >= cfg.min_segment_len for k in accepted):
            accepted.append(t)
    return sorted(set(accepted))


def segment_by_keyframes(demo: Demonstration, keyframes: Sequence[int]) -> List[Segment]:
    """Tiles [k1..k2], [k2+1..k3], ... so every timestep has exactly one segment"""
    segments = [demo.slice(keyframes[0], keyframes[1])]
    for previous, current in zip(keyframes[1:-1], keyframes[2:]):
        segments.append(demo.slice(previous + 1, current))
    return segments


def segment_demo(demo: Demonstration, cfg: SegmentationConfig) -> List[Segment]:
    keyframes = find_keyframes(demo, cfg)
    segments = segment_by_keyframes(demo, keyframes)
    logger.debug(f"Demo {demo.id}: keyframes {keyframes} -> {len(segments)} segments")
    return segments


def segment_dataset(demos: Sequence[Demonstration], cfg: SegmentationConfig,
                    threads: int = 1) -> List[Segment]:
    """Segments of every demonstration, in dataset then time order"""
    per_demo = parallel_map(lambda demo: segment_demo(demo, cfg), list(demos), threads)
    segments = [segment for demo_segments in per_demo for segment in demo_segments]
    logger.info(f"Segmented {len(demos)} demonstrations into {len(segments)} segments")
    return segments
