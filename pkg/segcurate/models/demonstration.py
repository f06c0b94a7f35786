"""
Demonstration Models
Immutable data model shared by every curation stage
"""

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from segcurate.core.exceptions import DatasetFormatException, MixedActionKindException

QUAT_NORM_TOLERANCE = 1e-6


class ActionKind(str, Enum):
    ABSOLUTE = "absolute"
    RELATIVE = "relative"


class SourceQuality(str, Enum):
    EXPERT = "expert"
    SUBOPTIMAL = "suboptimal"
    UNKNOWN = "unknown"


class DatasetRole(str, Enum):
    MIXED = "mixed"
    EXPERT_REFERENCE = "expert_reference"


def _frozen_array(values, size: Optional[int] = None, name: str = "array") -> np.ndarray:
    array = np.array(values, dtype=np.float64).reshape(-1)
    if size is not None and array.shape[0] != size:
        raise DatasetFormatException(f"{name} must have {size} components, got {array.shape[0]}",
                                     field=name)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Pose:
    """End-effector pose; orientation is a unit quaternion (w, x, y, z)"""
    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        position = _frozen_array(self.position, 3, "pos")
        orientation = _frozen_array(self.orientation, 4, "quat")
        if not np.all(np.isfinite(position)):
            raise DatasetFormatException("position components must be finite", field="pos")
        norm = float(np.linalg.norm(orientation))
        if not np.isfinite(norm) or abs(norm - 1.0) > QUAT_NORM_TOLERANCE:
            raise DatasetFormatException(f"quaternion norm {norm:.9g} is not within "
                                         f"{QUAT_NORM_TOLERANCE} of 1", field="quat")
        object.__setattr__(self, "position", position)
        object.__setattr__(self, "orientation", orientation)

    def equals(self, other: "Pose") -> bool:
        return (np.array_equal(self.position, other.position)
                and np.array_equal(self.orientation, other.orientation))


def _check_unit_interval(value: float, name: str) -> float:
    value = float(value)
    if not (0.0 <= value <= 1.0):
        raise DatasetFormatException(f"{name} {value!r} outside [0, 1]", field=name)
    return value


@dataclass(frozen=True, eq=False)
class Observation:
    ee_pose: Pose
    gripper: float
    proprio: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "gripper", _check_unit_interval(self.gripper, "gripper"))
        if self.proprio is not None:
            object.__setattr__(self, "proprio", _frozen_array(self.proprio, name="proprio"))

    def equals(self, other: "Observation") -> bool:
        if (self.proprio is None) != (other.proprio is None):
            return False
        same_proprio = self.proprio is None or np.array_equal(self.proprio, other.proprio)
        return self.ee_pose.equals(other.ee_pose) and self.gripper == other.gripper and same_proprio


@dataclass(frozen=True, eq=False)
class Action:
    """Absolute: world-frame target pose. Relative: delta pose applied to the current pose"""
    kind: ActionKind
    target_pose: Pose
    gripper_cmd: float

    def __post_init__(self):
        object.__setattr__(self, "kind", ActionKind(self.kind))
        object.__setattr__(self, "gripper_cmd", _check_unit_interval(self.gripper_cmd, "gripper_cmd"))

    def equals(self, other: "Action") -> bool:
        return (self.kind == other.kind and self.gripper_cmd == other.gripper_cmd
                and self.target_pose.equals(other.target_pose))


@dataclass(frozen=True, eq=False)
class Step:
    obs: Observation
    act: Action

    def equals(self, other: "Step") -> bool:
        return self.obs.equals(other.obs) and self.act.equals(other.act)


class _StepArrays:
    """Array views over a step sequence"""

    steps: Tuple[Step, ...]

    @cached_property
    def positions(self) -> np.ndarray:
        """End-effector positions e_t, shape (T, 3)"""
        return np.stack([step.obs.ee_pose.position for step in self.steps])

    @cached_property
    def orientations(self) -> np.ndarray:
        return np.stack([step.obs.ee_pose.orientation for step in self.steps])

    @cached_property
    def grippers(self) -> np.ndarray:
        return np.array([step.obs.gripper for step in self.steps])

    @property
    def actions(self) -> List[Action]:
        return [step.act for step in self.steps]

    @property
    def action_kind(self) -> ActionKind:
        return self.steps[0].act.kind


def _check_uniform_kind(steps: Sequence[Step], demo_id: str) -> None:
    kinds = {step.act.kind for step in steps}
    if len(kinds) > 1:
        raise MixedActionKindException(
            f"demonstration '{demo_id}' mixes action kinds {sorted(k.value for k in kinds)}",
            field="act.kind",
        )


@dataclass(frozen=True, eq=False)
class Demonstration(_StepArrays):
    """tau = (o_1, a_1, ..., o_T, a_T); timesteps are 1-based"""
    id: str
    steps: Tuple[Step, ...]
    dt: float
    # evaluation-only ground truth; curation logic never reads it
    source_quality: SourceQuality = SourceQuality.UNKNOWN

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        object.__setattr__(self, "source_quality", SourceQuality(self.source_quality))
        if len(self.steps) < 2:
            raise DatasetFormatException(f"demonstration '{self.id}' needs at least 2 steps, "
                                         f"got {len(self.steps)}", field="steps")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise DatasetFormatException(f"demonstration '{self.id}' has non-positive dt", field="dt")
        _check_uniform_kind(self.steps, self.id)

    @property
    def T(self) -> int:
        return len(self.steps)

    def slice(self, start: int, end: int) -> "Segment":
        """Segment covering timesteps start..end (1-based, inclusive)"""
        return Segment(self.id, start, end, self.steps[start - 1:end])

    def replace_steps(self, steps: Sequence[Step]) -> "Demonstration":
        return Demonstration(self.id, tuple(steps), self.dt, self.source_quality)

    def equals(self, other: "Demonstration") -> bool:
        return (self.id == other.id and self.dt == other.dt and self.T == other.T
                and self.source_quality == other.source_quality
                and all(a.equals(b) for a, b in zip(self.steps, other.steps)))


@dataclass(frozen=True, eq=False)
class Segment(_StepArrays):
    """Contiguous slice of a demonstration with provenance indices"""
    demo_id: str
    start: int
    end: int
    steps: Tuple[Step, ...]

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        if not (1 <= self.start < self.end):
            raise DatasetFormatException(f"segment {self.demo_id}[{self.start}..{self.end}] "
                                         "needs 1 <= start < end", field="start")
        if len(self.steps) != self.end - self.start + 1:
            raise DatasetFormatException(f"segment {self.demo_id}[{self.start}..{self.end}] "
                                         f"carries {len(self.steps)} steps", field="steps")
        _check_uniform_kind(self.steps, self.demo_id)

    @property
    def T(self) -> int:
        return len(self.steps)

    @property
    def key(self) -> Tuple[str, int, int]:
        return (self.demo_id, self.start, self.end)

    def with_steps(self, steps: Sequence[Step]) -> "Segment":
        return Segment(self.demo_id, self.start, self.end, tuple(steps))

    def path_length(self) -> float:
        return polyline_length(self.positions)


@dataclass(frozen=True, eq=False)
class Dataset:
    demos: Tuple[Demonstration, ...]
    role: DatasetRole = DatasetRole.MIXED

    def __post_init__(self):
        object.__setattr__(self, "demos", tuple(self.demos))
        object.__setattr__(self, "role", DatasetRole(self.role))
        if self.role == DatasetRole.EXPERT_REFERENCE and not self.demos:
            raise DatasetFormatException("expert reference dataset needs at least one demonstration")
        ids = [demo.id for demo in self.demos]
        if len(set(ids)) != len(ids):
            raise DatasetFormatException("demonstration ids must be unique", field="id")

    def __len__(self) -> int:
        return len(self.demos)

    def __iter__(self) -> Iterator[Demonstration]:
        return iter(self.demos)

    @property
    def total_steps(self) -> int:
        return sum(demo.T for demo in self.demos)

    def by_id(self) -> Dict[str, Demonstration]:
        return {demo.id: demo for demo in self.demos}

    def with_role(self, role: DatasetRole) -> "Dataset":
        return Dataset(self.demos, role)

    def equals(self, other: "Dataset") -> bool:
        return (len(self) == len(other)
                and all(a.equals(b) for a, b in zip(self.demos, other.demos)))


@dataclass(frozen=True)
class QualityView:
    """Evaluation-only view of source quality labels, kept apart from curation inputs"""
    labels: Dict[str, SourceQuality] = field(default_factory=dict)


def evaluation_view(dataset: Dataset) -> QualityView:
    return QualityView({demo.id: demo.source_quality for demo in dataset.demos})


def polyline_length(points: np.ndarray) -> float:
    points = np.asarray(points, dtype=np.float64)
    if len(points) < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(points, axis=0), axis=1).sum())
