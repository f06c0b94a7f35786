"""
Run Configuration Schemas
Validated, immutable configuration for every pipeline stage
"""

from enum import Enum
from typing import Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from segcurate.models.demonstration import ActionKind

SCHEMA_VERSION = 1


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class SegmentationConfig(_Frozen):
    velocity_eps: float = Field(0.005, gt=0, description="m/s below which the arm counts as still")
    gripper_toggle_threshold: float = Field(0.5, gt=0, lt=1)
    debounce_window: int = Field(5, ge=1, description="shortest low-speed run producing a keyframe")
    min_segment_len: int = Field(4, ge=2)


class AugmentConfig(_Frozen):
    n_positive: int = Field(500, ge=0)
    n_negative: int = Field(500, ge=0)
    camera_sphere_radius_range: Tuple[float, float] = (0.8, 1.2)
    jitter_sigma: float = Field(0.02, ge=0)
    detour_prob: float = Field(0.5, ge=0, le=1)
    detour_amplitude: float = Field(0.10, ge=0)
    seed: int = Field(0, ge=0, lt=2**64)
    canvas_size: int = Field(64, ge=8)
    # None fits the focal length so the trajectory fills fill_ratio of the canvas
    focal: Optional[float] = Field(None, gt=0)
    fill_ratio: float = Field(0.8, gt=0, le=1)
    min_elevation_deg: float = Field(5.0, ge=0, lt=90)

    @field_validator("camera_sphere_radius_range")
    @classmethod
    def validate_radius_range(cls, v):
        low, high = v
        if not (0 < low <= high):
            raise ValueError("camera_sphere_radius_range must satisfy 0 < min <= max")
        return v


class TrainConfig(_Frozen):
    temperature: float = Field(0.1, gt=0)
    learning_rate: float = Field(0.005, gt=0)
    batch_size: int = Field(64, ge=2)
    epochs: int = Field(10, ge=0)
    seed: int = Field(0, ge=0, lt=2**64)
    embed_dim: int = Field(256, ge=2)
    hidden_sizes: Tuple[int, ...] = (512, 256)
    grad_clip: Optional[float] = Field(5.0, gt=0, description="global gradient-norm clip")

    @field_validator("embed_dim")
    @classmethod
    def validate_embed_dim(cls, v):
        if v % 2:
            raise ValueError("embed_dim must be even (two projected branches)")
        return v

    @field_validator("hidden_sizes")
    @classmethod
    def validate_hidden_sizes(cls, v):
        if any(size < 1 for size in v):
            raise ValueError("hidden layer sizes must be positive")
        return v


class VoteConfig(_Frozen):
    k: int = Field(64, ge=1)
    delta_c: float = Field(0.5, gt=0, lt=1)


class OptimizeConfig(_Frozen):
    delta_theta: float = Field(75.0, gt=0, lt=180, description="degrees")
    zero_vec_eps: float = Field(1e-9, gt=0, description="meters")


class SelectionLevel(str, Enum):
    NONE = "none"
    DEMONSTRATION = "demonstration"
    SEGMENT = "segment"


class PipelineSwitches(_Frozen):
    selection_level: SelectionLevel = SelectionLevel.SEGMENT
    trajectory_optimization: bool = True
    action_relabeling: bool = True

    @model_validator(mode="after")
    def validate_relabeling(self):
        if self.action_relabeling and not self.trajectory_optimization:
            raise ValueError("action_relabeling requires trajectory_optimization")
        return self

    @property
    def label(self) -> str:
        opt = "opt" if self.trajectory_optimization else "-"
        relabel = "relabel" if self.action_relabeling else "-"
        return f"{self.selection_level.value}/{opt}/{relabel}"


class RunPaths(_Frozen):
    mixed: Optional[str] = None
    expert: Optional[str] = None
    truth: Optional[str] = None
    output_dir: Optional[str] = None


class CurationConfig(_Frozen):
    schema_version: Literal[1] = SCHEMA_VERSION
    segmentation: SegmentationConfig = SegmentationConfig()
    augment: AugmentConfig = AugmentConfig()
    train: TrainConfig = TrainConfig()
    vote: VoteConfig = VoteConfig()
    optimize: OptimizeConfig = OptimizeConfig()
    switches: PipelineSwitches = PipelineSwitches()
    paths: RunPaths = RunPaths()


class NoiseProfile(_Frozen):
    jitter_sigma: float = Field(0.01, ge=0, description="m")
    detour_prob: float = Field(0.5, ge=0, le=1)
    detour_amplitude: float = Field(0.08, ge=0, description="m")
    pause_prob: float = Field(0.3, ge=0, le=1)
    pause_len: int = Field(10, ge=0)
    gripper_fumble_prob: float = Field(0.2, ge=0, le=1)
    fumble_len: int = Field(6, ge=2)
    corruption_prob: float = Field(0.7, ge=0, le=1)

    @property
    def is_silent(self) -> bool:
        return (self.jitter_sigma == 0 and (self.detour_prob == 0 or self.detour_amplitude == 0)
                and (self.pause_prob == 0 or self.pause_len == 0)
                and self.gripper_fumble_prob == 0)


class SynthConfig(_Frozen):
    n_expert: int = Field(25, ge=0)
    n_suboptimal: int = Field(25, ge=0)
    subtasks: int = Field(3, ge=1)
    hz: float = Field(20.0, gt=0)
    workspace_low: Tuple[float, float, float] = (0.3, -0.3, 0.05)
    workspace_high: Tuple[float, float, float] = (0.7, 0.3, 0.35)
    subtask_duration: Tuple[float, float] = (1.5, 2.5)
    min_travel: float = Field(0.12, gt=0, description="shortest subtask displacement, m")
    noise: NoiseProfile = NoiseProfile()
    action_kind: ActionKind = ActionKind.ABSOLUTE
    proprio_dim: int = Field(0, ge=0)
    seed: int = Field(0, ge=0, lt=2**64)

    @model_validator(mode="after")
    def validate_ranges(self):
        if any(lo >= hi for lo, hi in zip(self.workspace_low, self.workspace_high)):
            raise ValueError("workspace_low must be below workspace_high on every axis")
        low, high = self.subtask_duration
        if not (0 < low <= high):
            raise ValueError("subtask_duration must satisfy 0 < min <= max")
        return self

    @classmethod
    def from_mixture(cls, total: int, expert_fraction: float, **overrides) -> "SynthConfig":
        """Expert/suboptimal mixtures such as 20%-80%, 50%-50% and 80%-20%"""
        if not (0.0 <= expert_fraction <= 1.0):
            raise ValueError("expert_fraction must lie in [0, 1]")
        n_expert = int(round(total * expert_fraction))
        return cls(n_expert=n_expert, n_suboptimal=total - n_expert, **overrides)
