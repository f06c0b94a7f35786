"""
Dataset Core
Canonical JSON-lines codec and absolute/relative action conversion
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence, Tuple, Type, TypeVar, Union

import numpy as np
from pydantic import BaseModel, ValidationError
from scipy.spatial.transform import Rotation

from segcurate.core.exceptions import (
    DatasetFormatException,
    DatasetIOException,
    MixedActionKindException,
    handle_validation_error,
)
from segcurate.models.demonstration import (
    Action,
    ActionKind,
    Dataset,
    DatasetRole,
    Demonstration,
    Observation,
    Pose,
    Step,
)
from segcurate.schemas.dataset import DemonstrationRecord, StepRecord

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
RecordT = TypeVar("RecordT", bound=BaseModel)


# Canonical serialization

def _format_number(value: float) -> str:
    if not math.isfinite(value):
        raise DatasetFormatException(f"cannot serialize non-finite number {value!r}")
    return format(float(value), ".17g")


def dump_canonical(value: Any) -> str:
    """JSON text with every float written at 17 significant digits"""
    if isinstance(value, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{dump_canonical(v)}"
                              for k, v in value.items()) + "}"
    if isinstance(value, (list, tuple, np.ndarray)):
        return "[" + ",".join(dump_canonical(v) for v in value) + "]"
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return _format_number(float(value))
    if hasattr(value, "value"):  # str enums
        return json.dumps(value.value)
    return json.dumps(value)


def step_to_dict(step: Step) -> dict:
    obs = step.obs
    record = {
        "obs": {
            "pos": obs.ee_pose.position,
            "quat": obs.ee_pose.orientation,
            "gripper": obs.gripper,
        },
        "act": {
            "pos": step.act.target_pose.position,
            "quat": step.act.target_pose.orientation,
            "gripper": step.act.gripper_cmd,
        },
    }
    if obs.proprio is not None:
        record["obs"]["proprio"] = obs.proprio
    return record


def step_from_record(record: StepRecord, kind: ActionKind) -> Step:
    obs = Observation(
        Pose(record.obs.pos, record.obs.quat),
        record.obs.gripper,
        None if record.obs.proprio is None else np.array(record.obs.proprio, dtype=np.float64),
    )
    act = Action(kind, Pose(record.act.pos, record.act.quat), record.act.gripper)
    return Step(obs, act)


def demo_to_dict(demo: Demonstration) -> dict:
    return {
        "id": demo.id,
        "dt": demo.dt,
        "action_kind": demo.action_kind,
        "source_quality": demo.source_quality,
        "steps": [step_to_dict(step) for step in demo.steps],
    }


def _demo_from_record(record: DemonstrationRecord, path: str, line: int) -> Demonstration:
    for index, step in enumerate(record.steps):
        if step.act.kind is not None and step.act.kind != record.action_kind:
            raise MixedActionKindException(
                f"demonstration '{record.id}' mixes {record.action_kind.value} and "
                f"{step.act.kind.value} actions", path, line, f"steps.{index}.act.kind")
    steps = tuple(step_from_record(step, record.action_kind) for step in record.steps)
    try:
        return Demonstration(record.id, steps, record.dt, record.source_quality)
    except DatasetFormatException as e:
        raise DatasetFormatException(str(e), path, line, e.field) from e


# Dataset IO

def load_dataset(path: PathLike, role: DatasetRole = DatasetRole.MIXED) -> Dataset:
    """Read a JSON-lines dataset, validating every record"""
    demos: List[Demonstration] = []
    source = str(path)
    try:
        with open(path, "r", encoding="utf-8") as handle:
            for line_number, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    data = json.loads(line)
                except json.JSONDecodeError as e:
                    raise DatasetFormatException(f"invalid JSON: {e.msg}", source, line_number) from e
                try:
                    record = DemonstrationRecord.model_validate(data)
                except ValidationError as e:
                    raise handle_validation_error(e, source, line_number) from e
                demos.append(_demo_from_record(record, source, line_number))
    except OSError as e:
        raise DatasetIOException(f"cannot read dataset {source}: {e}") from e

    try:
        dataset = Dataset(tuple(demos), role)
    except DatasetFormatException as e:
        raise DatasetFormatException(str(e), source) from e
    logger.info(f"Loaded {len(dataset)} demonstrations ({dataset.total_steps} steps) from {source}")
    return dataset


def save_dataset(dataset: Dataset, path: PathLike) -> None:
    """Write one canonical JSON line per demonstration"""
    write_lines((dump_canonical(demo_to_dict(demo)) for demo in dataset.demos), path)
    logger.info(f"Saved {len(dataset)} demonstrations to {path}")


def write_lines(lines: Iterable[str], path: PathLike) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as handle:
            for line in lines:
                handle.write(line)
                handle.write("\n")
    except OSError as e:
        raise DatasetIOException(f"cannot write {path}: {e}") from e


def write_records(records: Iterable[Union[BaseModel, dict]], path: PathLike) -> None:
    """JSON-lines writer for provenance and label records"""
    write_lines(
        (dump_canonical(r.model_dump(mode="json") if isinstance(r, BaseModel) else r)
         for r in records),
        path,
    )


def read_numbered_records(path: PathLike, model: Type[RecordT]) -> List[Tuple[int, RecordT]]:
    """(physical line number, record) pairs; blank lines are skipped"""
    records: List[Tuple[int, RecordT]] = []
    source = str(path)
    try:
        with open(path, "r", encoding="utf-8") as handle:
            for line_number, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    records.append((line_number, model.model_validate_json(line)))
                except ValidationError as e:
                    raise handle_validation_error(e, source, line_number) from e
    except OSError as e:
        raise DatasetIOException(f"cannot read {source}: {e}") from e
    return records


def read_records(path: PathLike, model: Type[RecordT]) -> List[RecordT]:
    return [record for _, record in read_numbered_records(path, model)]


# Absolute / relative action frames

def _rotations(quats_wxyz: np.ndarray) -> Rotation:
    return Rotation.from_quat(np.roll(np.asarray(quats_wxyz, dtype=np.float64), -1, axis=-1))


def _as_wxyz(rotation: Rotation) -> np.ndarray:
    return np.roll(rotation.as_quat(), 1, axis=-1)


def compose_pose(position: np.ndarray, orientation: np.ndarray,
                 delta_position: np.ndarray, delta_orientation: np.ndarray):
    """Apply a delta expressed in the frame of (position, orientation)"""
    frame = _rotations(orientation)
    target_position = np.asarray(position) + frame.apply(delta_position)
    target_orientation = _as_wxyz(frame * _rotations(delta_orientation))
    return target_position, target_orientation


def relative_delta(position: np.ndarray, orientation: np.ndarray,
                   target_position: np.ndarray, target_orientation: np.ndarray):
    """Inverse of compose_pose"""
    inverse = _rotations(orientation).inv()
    delta_position = inverse.apply(np.asarray(target_position) - np.asarray(position))
    delta_orientation = _as_wxyz(inverse * _rotations(target_orientation))
    return delta_position, delta_orientation


def _convert_steps(steps: Sequence[Step], kind: ActionKind) -> List[Step]:
    if not steps:
        return []
    positions = np.stack([s.obs.ee_pose.position for s in steps])
    orientations = np.stack([s.obs.ee_pose.orientation for s in steps])
    targets = np.stack([s.act.target_pose.position for s in steps])
    target_quats = np.stack([s.act.target_pose.orientation for s in steps])

    if kind == ActionKind.ABSOLUTE:
        new_pos, new_quat = compose_pose(positions, orientations, targets, target_quats)
    else:
        new_pos, new_quat = relative_delta(positions, orientations, targets, target_quats)

    return [
        Step(step.obs, Action(kind, Pose(new_pos[i], new_quat[i]), step.act.gripper_cmd))
        for i, step in enumerate(steps)
    ]


def steps_to_absolute(steps: Sequence[Step]) -> List[Step]:
    """Relative steps → absolute steps; absolute input is returned unchanged"""
    if steps and steps[0].act.kind == ActionKind.ABSOLUTE:
        return list(steps)
    return _convert_steps(steps, ActionKind.ABSOLUTE)


def steps_to_relative(steps: Sequence[Step]) -> List[Step]:
    """Absolute steps → deltas from each step's own observed pose"""
    if steps and steps[0].act.kind == ActionKind.RELATIVE:
        return list(steps)
    return _convert_steps(steps, ActionKind.RELATIVE)


def relative_to_absolute(demo: Demonstration) -> Demonstration:
    if demo.action_kind != ActionKind.RELATIVE:
        raise DatasetFormatException(f"demonstration '{demo.id}' already has absolute actions",
                                     field="action_kind")
    return demo.replace_steps(steps_to_absolute(demo.steps))


def absolute_to_relative(demo: Demonstration) -> Demonstration:
    if demo.action_kind != ActionKind.ABSOLUTE:
        raise DatasetFormatException(f"demonstration '{demo.id}' already has relative actions",
                                     field="action_kind")
    return demo.replace_steps(steps_to_relative(demo.steps))
