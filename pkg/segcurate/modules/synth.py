"""
Synthetic Demonstrations
Labeled mixed-quality pick-and-place datasets with known ground truth
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from segcurate.core.dataset import absolute_to_relative
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
)
from segcurate.modules.geometry import minimum_jerk, perpendicular_unit, spline_detour
from segcurate.schemas.config import NoiseProfile, SynthConfig
from segcurate.schemas.dataset import DemoTruth, GroundTruth
from segcurate.utils.helpers import derive_rng

logger = logging.getLogger(__name__)

GRIPPER_OPEN = 1.0
GRIPPER_CLOSED = 0.0
# corruptions keep this many steps away from subtask ends so boundary toggles stay intact
PAUSE_MARGIN = 6
FUMBLE_MARGIN = 3
_MAX_WAYPOINT_DRAWS = 1000


@dataclass
class SynthResult:
    dataset: Dataset
    truth: GroundTruth


@dataclass
class _Block:
    """Points and gripper values of one subtask, excluding its start point"""
    positions: np.ndarray
    gripper: np.ndarray
    corrupted: bool = False
    pause_at: Optional[int] = None
    fumble: Optional[Tuple[int, int]] = None


def _sample_waypoints(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    low = np.array(cfg.workspace_low)
    high = np.array(cfg.workspace_high)
    points = [rng.uniform(low, high)]
    for _ in range(cfg.subtasks):
        candidate = rng.uniform(low, high)
        for _ in range(_MAX_WAYPOINT_DRAWS):
            if np.linalg.norm(candidate - points[-1]) >= cfg.min_travel:
                break
            candidate = rng.uniform(low, high)
        else:
            direction = candidate - points[-1]
            direction = direction / max(np.linalg.norm(direction), 1e-12)
            candidate = points[-1] + cfg.min_travel * direction
        points.append(candidate)
    return np.array(points)


def _skeleton(cfg: SynthConfig, rng: np.random.Generator) -> Tuple[np.ndarray, List[_Block], float]:
    waypoints = _sample_waypoints(cfg, rng)
    low, high = cfg.subtask_duration
    blocks = []
    for i in range(cfg.subtasks):
        n = max(2, int(round(rng.uniform(low, high) * cfg.hz)))
        # approach open, transport closed, retreat open, alternating beyond three
        grip = GRIPPER_CLOSED if i % 2 == 1 else GRIPPER_OPEN
        blocks.append(_Block(minimum_jerk(waypoints[i], waypoints[i + 1], n), np.full(n, grip)))
    yaw = float(rng.uniform(-math.pi, math.pi))
    return waypoints[0], blocks, yaw


def _corrupt(block: _Block, previous_end: np.ndarray, noise: NoiseProfile,
             rng: np.random.Generator) -> None:
    """Jitter plus, by their probabilities, a detour, a gripper fumble and a pause"""
    n = len(block.positions)
    selected = rng.random() < noise.corruption_prob
    use_detour = rng.random() < noise.detour_prob
    use_fumble = rng.random() < noise.gripper_fumble_prob
    use_pause = rng.random() < noise.pause_prob
    if not selected:
        return

    jitter = rng.normal(0.0, noise.jitter_sigma, size=(n - 1, 3))
    block.positions = block.positions.copy()
    block.positions[:-1] += jitter
    visible = noise.jitter_sigma > 0

    if use_detour and noise.detour_amplitude > 0 and n >= 2:
        local = np.vstack([previous_end, block.positions])
        center = int(rng.integers(1, len(local) - 1))
        direction = perpendicular_unit(local[-1] - local[0], rng)
        block.positions = spline_detour(local, center, noise.detour_amplitude, direction)[1:]
        visible = True

    if use_fumble:
        latest = n - 1 - FUMBLE_MARGIN - noise.fumble_len + 1
        if latest >= FUMBLE_MARGIN:
            start = int(rng.integers(FUMBLE_MARGIN, latest + 1))
            end = start + noise.fumble_len - 1
            block.gripper = block.gripper.copy()
            block.gripper[start:end + 1] = GRIPPER_OPEN + GRIPPER_CLOSED - block.gripper[start:end + 1]
            block.fumble = (start, end)
            visible = True

    if use_pause and noise.pause_len > 0:
        allowed = [p for p in range(PAUSE_MARGIN, n - PAUSE_MARGIN)
                   if block.fumble is None
                   or not (block.fumble[0] - PAUSE_MARGIN <= p <= block.fumble[1] + PAUSE_MARGIN)]
        if allowed:
            block.pause_at = int(allowed[int(rng.integers(len(allowed)))])
            visible = True

    block.corrupted = visible


def _insert_pause(block: _Block, pause_len: int) -> None:
    p = block.pause_at
    block.positions = np.insert(block.positions, p + 1, np.repeat(block.positions[p:p + 1], pause_len, axis=0), axis=0)
    block.gripper = np.insert(block.gripper, p + 1, np.repeat(block.gripper[p], pause_len))


def _yaw_quaternion(yaw: float) -> np.ndarray:
    return np.array([math.cos(yaw / 2), 0.0, 0.0, math.sin(yaw / 2)])


def _assemble(demo_id: str, quality: SourceQuality, start: np.ndarray, blocks: List[_Block],
              yaw: float, cfg: SynthConfig, proprio_rng: np.random.Generator) -> Tuple[Demonstration, DemoTruth]:
    first_grip = blocks[0].gripper[0] if blocks else GRIPPER_OPEN
    positions = [start[None, :]]
    gripper = [np.array([first_grip])]
    ends, pauses, fumbles = [], [], []
    offset = 1
    for block in blocks:
        if block.pause_at is not None:
            # global index of the paused point; the run of zero speeds spans pause_len steps from it
            paused = offset + block.pause_at + 1
            pauses.append((2 * paused + cfg.noise.pause_len - 1) // 2)
            _insert_pause(block, cfg.noise.pause_len)
            if block.fumble is not None and block.fumble[0] > block.pause_at:
                block.fumble = (block.fumble[0] + cfg.noise.pause_len, block.fumble[1] + cfg.noise.pause_len)
        if block.fumble is not None:
            fumbles.append([offset + block.fumble[0] + 1, offset + block.fumble[1] + 1])
        positions.append(block.positions)
        gripper.append(block.gripper)
        offset += len(block.positions)
        ends.append(offset)

    positions_arr = np.vstack(positions)
    gripper_arr = np.concatenate(gripper)
    quat = _yaw_quaternion(yaw)
    proprio = proprio_rng.normal(size=(len(positions_arr), cfg.proprio_dim)) if cfg.proprio_dim else None

    T = len(positions_arr)
    steps = []
    for t in range(T):
        target = min(t + 1, T - 1)
        obs = Observation(Pose(positions_arr[t], quat), float(gripper_arr[t]),
                          None if proprio is None else proprio[t])
        act = Action(ActionKind.ABSOLUTE, Pose(positions_arr[target], quat), float(gripper_arr[target]))
        steps.append(Step(obs, act))

    demo = Demonstration(demo_id, tuple(steps), 1.0 / cfg.hz, quality)
    if cfg.action_kind == ActionKind.RELATIVE:
        demo = absolute_to_relative(demo)
    truth = DemoTruth(id=demo_id, source_quality=quality, subtask_ends=ends,
                      corrupted=[block.corrupted for block in blocks],
                      pause_centers=pauses, fumbles=fumbles)
    return demo, truth


def generate_demo(index: int, cfg: SynthConfig) -> Tuple[Demonstration, DemoTruth]:
    """Demo `index` of the dataset; demos below n_expert are expert, the rest suboptimal"""
    rng = derive_rng(cfg.seed, index)
    quality = SourceQuality.EXPERT if index < cfg.n_expert else SourceQuality.SUBOPTIMAL
    start, blocks, yaw = _skeleton(cfg, rng)

    if quality == SourceQuality.SUBOPTIMAL:
        previous_end = start
        for block in blocks:
            clean_end = block.positions[-1]
            _corrupt(block, previous_end, cfg.noise, rng)
            previous_end = clean_end

    return _assemble(f"demo_{index:03d}", quality, start, blocks, yaw, cfg, derive_rng(cfg.seed, index, 1))


def generate(cfg: SynthConfig) -> SynthResult:
    """Expert skeletons plus independently corrupted subtasks for suboptimal demos"""
    demos, truths = [], []
    for index in range(cfg.n_expert + cfg.n_suboptimal):
        demo, truth = generate_demo(index, cfg)
        demos.append(demo)
        truths.append(truth)

    corrupted = sum(sum(t.corrupted) for t in truths)
    logger.info(f"Generated {cfg.n_expert} expert and {cfg.n_suboptimal} suboptimal demonstrations "
                f"({corrupted} corrupted subtasks)")
    return SynthResult(Dataset(tuple(demos), DatasetRole.MIXED), GroundTruth(demos=truths))


def generate_reference(cfg: SynthConfig) -> Dataset:
    """Expert-only dataset in the reference role"""
    expert_cfg = cfg.model_copy(update={"n_suboptimal": 0})
    return generate(expert_cfg).dataset.with_role(DatasetRole.EXPERT_REFERENCE)
