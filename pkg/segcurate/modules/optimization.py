"""
Trajectory Optimization
Greedy angle-gated waypoint selection and action relabeling over negative segments
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from segcurate.core.dataset import steps_to_absolute, steps_to_relative
from segcurate.core.exceptions import DatasetFormatException
from segcurate.models.demonstration import ActionKind, Segment, Step, polyline_length
from segcurate.modules.geometry import angle_between, step_lengths
from segcurate.schemas.config import OptimizeConfig
from segcurate.utils.helpers import parallel_map

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class OptimizedSegment:
    original: Segment
    retained: Tuple[int, ...]
    relabeled_steps: Tuple[Step, ...]

    def __post_init__(self):
        object.__setattr__(self, "retained", tuple(self.retained))
        object.__setattr__(self, "relabeled_steps", tuple(self.relabeled_steps))
        T = self.original.T
        if not self.retained or self.retained[0] != 1 or self.retained[-1] != T:
            raise DatasetFormatException("retained waypoints must include the segment's first and last index")
        if any(b <= a for a, b in zip(self.retained, self.retained[1:])):
            raise DatasetFormatException("retained waypoints must be strictly increasing")
        if len(self.relabeled_steps) != T:
            raise DatasetFormatException("relabeling must cover every original timestep")

    @property
    def relabeled(self) -> Segment:
        """Original observations with relabeled actions"""
        return self.original.with_steps(self.relabeled_steps)

    @property
    def retained_steps(self) -> List[Step]:
        """Original (observation, action) pairs at the retained waypoints only"""
        return [self.original.steps[i - 1] for i in self.retained]

    @property
    def original_path_length(self) -> float:
        return self.original.path_length()

    @property
    def optimized_path_length(self) -> float:
        return polyline_length(self.original.positions[np.array(self.retained) - 1])


def greedy_optimize(seg: Segment, cfg: OptimizeConfig) -> List[int]:
    """Retained 1-based waypoint indices, sorted.

    From the last retained point j, candidates are remaining points whose
    direction lies within delta_theta of the goal direction e_T - e_j; when
    none qualify, remaining points at least delta_s (the longest step) away.
    The nearest candidate is retained (ties to the smaller index). If both
    sets are empty, T is appended directly.
    """
    e = seg.positions
    T = len(e)
    lengths = step_lengths(e)
    delta_s = float(lengths.max()) if len(lengths) else 0.0

    retained = [1]
    remaining = list(range(2, T + 1))
    j = 1
    while T not in retained:
        goal = e[T - 1] - e[j - 1]
        distance = {k: float(np.linalg.norm(e[k - 1] - e[j - 1])) for k in remaining}
        candidates = []
        for k in remaining:
            angle = angle_between(e[k - 1] - e[j - 1], goal, cfg.zero_vec_eps)
            if angle is not None and angle <= cfg.delta_theta:
                candidates.append(k)
        if not candidates:
            candidates = [k for k in remaining if distance[k] >= delta_s]
        if not candidates:
            retained.append(T)
            break
        j = min(candidates, key=lambda k: (distance[k], k))
        retained.append(j)
        remaining.remove(j)
    return sorted(retained)


def relabel(seg: Segment, retained: Sequence[int]) -> OptimizedSegment:
    """a~_t = a_t' with t' the smallest index >= t whose successor is retained; a~_T = a_T"""
    if seg.action_kind != ActionKind.ABSOLUTE:
        raise DatasetFormatException("relabel expects absolute actions; convert relative segments first",
                                     field="action_kind")
    T = seg.T
    kept = set(retained)
    source = [0] * (T + 1)
    source[T] = T
    if T >= 2:
        source[T - 1] = T - 1
    for t in range(T - 2, 0, -1):
        source[t] = t if (t + 1) in kept else source[t + 1]

    steps = [Step(seg.steps[t - 1].obs, seg.steps[source[t] - 1].act) for t in range(1, T + 1)]
    return OptimizedSegment(seg, tuple(sorted(kept)), tuple(steps))


def optimize_segment(seg: Segment, cfg: OptimizeConfig, action_kind: ActionKind) -> OptimizedSegment:
    if action_kind == ActionKind.RELATIVE:
        absolute = seg.with_steps(steps_to_absolute(seg.steps))
        optimized = relabel(absolute, greedy_optimize(absolute, cfg))
        return OptimizedSegment(seg, optimized.retained, tuple(steps_to_relative(optimized.relabeled_steps)))
    return relabel(seg, greedy_optimize(seg, cfg))


def optimize_negatives(negatives: Sequence[Segment], cfg: OptimizeConfig, action_kind: ActionKind,
                       threads: int = 1) -> List[OptimizedSegment]:
    """Greedy optimization plus relabeling per negative segment, in the dataset's action frame"""
    action_kind = ActionKind(action_kind)
    for seg in negatives:
        if seg.action_kind != action_kind:
            raise DatasetFormatException(f"segment {seg.key} has {seg.action_kind.value} actions, "
                                         f"expected {action_kind.value}", field="action_kind")
    optimized = parallel_map(lambda seg: optimize_segment(seg, cfg, action_kind), list(negatives), threads)
    discarded = sum(seg.original.T - len(seg.retained) for seg in optimized)
    logger.info(f"Optimized {len(optimized)} negative segments; {discarded} timesteps relabeled "
                f"toward later waypoints")
    return optimized
