"""
Pytest Configuration and Test Fixtures
Small configs, hand-built demonstrations and synthetic datasets shared by the suite
"""

from typing import Callable, Optional, Sequence

import numpy as np
import pytest

from segcurate.models.demonstration import (
    Action,
    ActionKind,
    Dataset,
    Demonstration,
    Observation,
    Pose,
    Segment,
    SourceQuality,
    Step,
)
from segcurate.modules.synth import SynthResult, generate, generate_reference
from segcurate.schemas.config import (
    AugmentConfig,
    CurationConfig,
    NoiseProfile,
    SynthConfig,
    TrainConfig,
    VoteConfig,
)

IDENTITY_QUAT = (1.0, 0.0, 0.0, 0.0)


def build_demo(positions: Sequence[Sequence[float]], grippers: Optional[Sequence[float]] = None,
               demo_id: str = "demo", dt: float = 0.05,
               quality: SourceQuality = SourceQuality.UNKNOWN) -> Demonstration:
    """Absolute-action demo whose action t targets the pose of step t+1 (the last holds)"""
    positions = np.asarray(positions, dtype=np.float64)
    T = len(positions)
    grippers = np.ones(T) if grippers is None else np.asarray(grippers, dtype=np.float64)
    steps = []
    for t in range(T):
        target = min(t + 1, T - 1)
        obs = Observation(Pose(positions[t], IDENTITY_QUAT), float(grippers[t]))
        act = Action(ActionKind.ABSOLUTE, Pose(positions[target], IDENTITY_QUAT), float(grippers[target]))
        steps.append(Step(obs, act))
    return Demonstration(demo_id, tuple(steps), dt, quality)


def build_segment(positions: Sequence[Sequence[float]], demo_id: str = "demo") -> Segment:
    demo = build_demo(positions, demo_id=demo_id)
    return demo.slice(1, demo.T)


@pytest.fixture
def make_demo() -> Callable[..., Demonstration]:
    """Factory for hand-built absolute-action demonstrations"""
    return build_demo


@pytest.fixture
def make_segment() -> Callable[..., Segment]:
    """Factory for a whole-demo segment over the given points"""
    return build_segment


@pytest.fixture
def small_synth_config() -> SynthConfig:
    """Two expert and two suboptimal demos"""
    return SynthConfig(n_expert=2, n_suboptimal=2, seed=3)


@pytest.fixture
def small_synth(small_synth_config) -> SynthResult:
    return generate(small_synth_config)


@pytest.fixture
def expert_reference() -> Dataset:
    """Three expert demos in the reference role"""
    return generate_reference(SynthConfig(n_expert=3, n_suboptimal=0, seed=101))


@pytest.fixture
def silent_noise() -> NoiseProfile:
    return NoiseProfile(jitter_sigma=0.0, detour_prob=0.0, pause_prob=0.0, gripper_fumble_prob=0.0)


@pytest.fixture
def fast_config() -> CurationConfig:
    """Pipeline config small enough to train in well under a second"""
    return CurationConfig(
        augment=AugmentConfig(n_positive=4, n_negative=4, canvas_size=16, seed=5),
        train=TrainConfig(epochs=2, batch_size=16, embed_dim=8, hidden_sizes=(16,), seed=5),
        vote=VoteConfig(k=5),
    )


@pytest.fixture
def tiny_train_config() -> TrainConfig:
    return TrainConfig(epochs=3, batch_size=8, embed_dim=4, hidden_sizes=(6,), seed=11)
