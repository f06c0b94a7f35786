"""
Dataset Record Schemas
JSON-lines wire format: one demonstration per line
"""

import math
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from segcurate.models.demonstration import QUAT_NORM_TOLERANCE, ActionKind, SourceQuality


class _PoseRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    pos: List[float] = Field(..., min_length=3, max_length=3)
    quat: List[float] = Field(..., min_length=4, max_length=4)

    @field_validator("pos")
    @classmethod
    def validate_pos(cls, v):
        if not all(math.isfinite(x) for x in v):
            raise ValueError("position components must be finite")
        return v

    @field_validator("quat")
    @classmethod
    def validate_quat(cls, v):
        norm = math.sqrt(sum(x * x for x in v))
        if not math.isfinite(norm) or abs(norm - 1.0) > QUAT_NORM_TOLERANCE:
            raise ValueError(f"quaternion norm {norm:.9g} is not within {QUAT_NORM_TOLERANCE} of 1")
        return v


class ObservationRecord(_PoseRecord):
    gripper: float = Field(..., ge=0, le=1)
    proprio: Optional[List[float]] = None


class ActionRecord(_PoseRecord):
    gripper: float = Field(..., ge=0, le=1)
    # optional per-step override; must agree with the demonstration's action_kind
    kind: Optional[ActionKind] = None


class StepRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    obs: ObservationRecord
    act: ActionRecord


class DemonstrationRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str = Field(..., min_length=1)
    dt: float = Field(..., gt=0)
    action_kind: ActionKind
    source_quality: SourceQuality = SourceQuality.UNKNOWN
    steps: List[StepRecord] = Field(..., min_length=2)


class SegmentRecord(BaseModel):
    """Segment provenance line: {demo_id, start, end}"""
    demo_id: str
    start: int = Field(..., ge=1)
    end: int = Field(..., ge=2)


class LabelRecord(SegmentRecord):
    score: Optional[float] = None
    label: str


class OptimizedSegmentRecord(SegmentRecord):
    action_kind: ActionKind
    retained: List[int]
    steps: List[StepRecord]


class DemoTruth(BaseModel):
    """Generator ground truth for one demonstration (evaluation only)"""
    id: str
    source_quality: SourceQuality
    # 1-based index of the last timestep of each subtask; the final entry equals T
    subtask_ends: List[int]
    corrupted: List[bool]
    pause_centers: List[int] = Field(default_factory=list)
    fumbles: List[List[int]] = Field(default_factory=list)

    def subtask_ranges(self) -> List[tuple]:
        starts = [1] + [end + 1 for end in self.subtask_ends[:-1]]
        return list(zip(starts, self.subtask_ends))

    def segment_is_clean(self, start: int, end: int) -> bool:
        """Label of the subtask overlapping [start, end] most (ties to the earlier subtask)"""
        overlaps = [max(0, min(end, hi) - max(start, lo) + 1) for lo, hi in self.subtask_ranges()]
        best = max(range(len(overlaps)), key=lambda i: (overlaps[i], -i))
        return not self.corrupted[best]


class GroundTruth(BaseModel):
    demos: List[DemoTruth] = Field(default_factory=list)

    def by_id(self) -> dict:
        return {demo.id: demo for demo in self.demos}

    def segment_is_clean(self, demo_id: str, start: int, end: int) -> bool:
        return self.by_id()[demo_id].segment_is_clean(start, end)
