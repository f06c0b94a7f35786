"""
Report Schemas
Curation report and ablation summaries
"""

from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from segcurate.schemas.config import SelectionLevel


class ReportCounts(BaseModel):
    demos: int = 0
    segments: int = 0
    positives: int = 0
    negatives: int = 0
    optimized: int = 0
    dropped_demos: int = 0
    original_steps: int = 0
    emitted_steps: int = 0


class SegmentScore(BaseModel):
    demo_id: str
    start: int
    end: int
    score: Optional[float] = None
    label: Optional[str] = None


class PathLengthStats(BaseModel):
    """Polyline lengths over optimized segments (original vs retained waypoints)"""
    segments: int = 0
    mean_original: float = 0.0
    mean_optimized: float = 0.0
    mean_reduction: float = 0.0
    # keyed by ground-truth label ("clean"/"corrupted") when truth is available
    by_truth: Dict[str, "PathLengthStats"] = Field(default_factory=dict)


class ClassificationMetrics(BaseModel):
    """Segment classification against generator ground truth; positive class = clean"""
    precision: float
    recall: float
    f1: float
    accuracy: float
    true_positive: int
    false_positive: int
    true_negative: int
    false_negative: int
    demo_accuracy: Optional[float] = None


class CurationReport(BaseModel):
    switches: str
    counts: ReportCounts = Field(default_factory=ReportCounts)
    utilization: float = Field(1.0, ge=0, le=1)
    scores: List[SegmentScore] = Field(default_factory=list)
    demo_scores: Dict[str, float] = Field(default_factory=dict)
    path_length: PathLengthStats = Field(default_factory=PathLengthStats)
    corrupted_mean_path_length: Optional[float] = None
    metrics: Optional[ClassificationMetrics] = None
    timings: Dict[str, float] = Field(default_factory=dict)

    def deterministic_dict(self) -> dict:
        """Report content without wall-clock fields"""
        return self.model_dump(mode="json", exclude={"timings"})


class AblationRow(BaseModel):
    selection_level: SelectionLevel
    trajectory_optimization: bool
    action_relabeling: bool
    utilization: float
    positives: int
    negatives: int
    emitted_steps: int
    dropped_demos: int
    corrupted_mean_path_length: Optional[float] = None
    f1: Optional[float] = None
