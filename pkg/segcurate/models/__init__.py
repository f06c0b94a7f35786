"""
Domain models package
"""

from .demonstration import (
    Action,
    ActionKind,
    Dataset,
    DatasetRole,
    Demonstration,
    Observation,
    Pose,
    Segment,
    SourceQuality,
    Step,
    evaluation_view,
    polyline_length,
)

__all__ = [
    "Action", "ActionKind", "Dataset", "DatasetRole", "Demonstration",
    "Observation", "Pose", "Segment", "SourceQuality", "Step",
    "evaluation_view", "polyline_length",
]
