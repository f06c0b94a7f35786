"""
Pydantic schemas package
"""

from .config import (
    AugmentConfig,
    CurationConfig,
    NoiseProfile,
    OptimizeConfig,
    PipelineSwitches,
    RunPaths,
    SegmentationConfig,
    SelectionLevel,
    SynthConfig,
    TrainConfig,
    VoteConfig,
)
from .report import AblationRow, ClassificationMetrics, CurationReport, PathLengthStats

__all__ = [
    "AugmentConfig", "CurationConfig", "NoiseProfile", "OptimizeConfig",
    "PipelineSwitches", "RunPaths", "SegmentationConfig", "SelectionLevel",
    "SynthConfig", "TrainConfig", "VoteConfig",
    "AblationRow", "ClassificationMetrics", "CurationReport", "PathLengthStats",
]
