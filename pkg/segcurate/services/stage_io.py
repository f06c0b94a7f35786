"""
Stage Artifacts
Readers and writers for the files each pipeline stage leaves on disk
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError

from segcurate.core.dataset import dump_canonical, read_numbered_records, step_to_dict, write_lines, write_records
from segcurate.core.exceptions import DatasetFormatException, DatasetIOException, handle_validation_error
from segcurate.core.tensor_io import read_f32, write_f32
from segcurate.models.demonstration import Dataset, Segment
from segcurate.modules.optimization import OptimizedSegment
from segcurate.modules.render import Camera, RasterPair, TrajRaster
from segcurate.modules.selection import NEGATIVE, POSITIVE
from segcurate.schemas.config import AugmentConfig
from segcurate.schemas.dataset import GroundTruth, LabelRecord, SegmentRecord

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

SEGMENTS_FILE = "segments.jsonl"
LABELS_FILE = "labels.jsonl"
OPTIMIZED_FILE = "optimized.jsonl"
CURATED_FILE = "curated.jsonl"
AUGMENT_DIR = "aug"
PARAMS_FILE = "params.bin"
REFERENCE_FILE = "ref.bin"
LOSS_TRACE_FILE = "loss_trace.json"
RESOLVED_CONFIG_FILE = "resolved_config.json"


# Segments and labels

def write_segments(segments: Sequence[Segment], path: PathLike) -> None:
    write_records((SegmentRecord(demo_id=s.demo_id, start=s.start, end=s.end) for s in segments), path)


def write_labels(segments: Sequence[Segment], scores: Sequence[Optional[float]],
                 labels: Sequence[bool], path: PathLike) -> None:
    write_records(
        (LabelRecord(demo_id=s.demo_id, start=s.start, end=s.end, score=score,
                     label=POSITIVE if label else NEGATIVE)
         for s, score, label in zip(segments, scores, labels)),
        path,
    )


def read_segments(path: PathLike, dataset: Dataset, only_label: Optional[str] = None) -> List[Segment]:
    """Slice the referenced segments out of `dataset`; label files may be filtered by label"""
    demos = dataset.by_id()
    records = read_numbered_records(path, LabelRecord if only_label else SegmentRecord)
    segments = []
    for line, record in records:
        if only_label and record.label != only_label:
            continue
        demo = demos.get(record.demo_id)
        if demo is None:
            raise DatasetFormatException(f"unknown demonstration '{record.demo_id}'", str(path), line, "demo_id")
        if not (1 <= record.start < record.end <= demo.T):
            raise DatasetFormatException(f"segment [{record.start}..{record.end}] outside 1..{demo.T}",
                                         str(path), line, "end")
        segments.append(demo.slice(record.start, record.end))
    return segments


def is_label_file(path: PathLike) -> bool:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            first = next((line for line in handle if line.strip()), None)
    except OSError as e:
        raise DatasetIOException(f"cannot read {path}: {e}") from e
    return first is not None and "label" in json.loads(first)


def write_optimized(optimized: Sequence[OptimizedSegment], path: PathLike) -> None:
    lines = (
        dump_canonical({
            "demo_id": seg.original.demo_id,
            "start": seg.original.start,
            "end": seg.original.end,
            "action_kind": seg.original.action_kind,
            "retained": list(seg.retained),
            "steps": [step_to_dict(step) for step in seg.relabeled_steps],
        })
        for seg in optimized
    )
    write_lines(lines, path)


# Augmentation

def write_augmentation(positives: Sequence[RasterPair], negatives: Sequence[RasterPair],
                       expert_segments: Sequence[Segment], cameras: Sequence[Camera],
                       cfg: AugmentConfig, out_dir: PathLike) -> None:
    """positives_start.f32, negatives_start.f32, distinct end rasters in end.f32, and index.json"""
    out_dir = Path(out_dir)
    ends: Dict[int, int] = {}
    end_rasters: List[TrajRaster] = []

    def end_index(raster: TrajRaster) -> int:
        if id(raster) not in ends:
            ends[id(raster)] = len(end_rasters)
            end_rasters.append(raster)
        return ends[id(raster)]

    positive_ends = [end_index(end) for _, end in positives]
    negative_ends = [end_index(end) for _, end in negatives]
    size = cfg.canvas_size

    write_f32(out_dir / "positives_start.f32",
              np.stack([s.pixels for s, _ in positives]) if positives else np.zeros((0, size, size)))
    write_f32(out_dir / "negatives_start.f32",
              np.stack([s.pixels for s, _ in negatives]) if negatives else np.zeros((0, size, size)))
    write_f32(out_dir / "end.f32",
              np.stack([r.pixels for r in end_rasters]) if end_rasters else np.zeros((0, size, size)))

    index = {
        "canvas": [size, size],
        "n_positive": len(positives),
        "n_negative": len(negatives),
        "n_end": len(end_rasters),
        "seed": cfg.seed,
        "canonical_camera_sample": 0,
        "segments": [{"demo_id": s.demo_id, "start": s.start, "end": s.end} for s in expert_segments],
        "canonical_cameras": [cam.to_dict() for cam in cameras],
        "positive_end_index": positive_ends,
        "negative_end_index": negative_ends,
    }
    try:
        (out_dir / "index.json").write_text(json.dumps(index), encoding="utf-8")
    except OSError as e:
        raise DatasetIOException(f"cannot write augmentation index: {e}") from e
    logger.info(f"Augmentation written to {out_dir} ({len(positives)}+{len(negatives)} pairs)")


def read_augmentation(aug_dir: PathLike) -> Tuple[List[RasterPair], List[RasterPair]]:
    aug_dir = Path(aug_dir)
    try:
        index = json.loads((aug_dir / "index.json").read_text(encoding="utf-8"))
    except OSError as e:
        raise DatasetIOException(f"cannot read augmentation index in {aug_dir}: {e}") from e
    except json.JSONDecodeError as e:
        raise DatasetFormatException(f"augmentation index is not valid JSON: {e}", str(aug_dir)) from e

    height, width = index["canvas"]
    positives = read_f32(aug_dir / "positives_start.f32", (index["n_positive"], height, width))
    negatives = read_f32(aug_dir / "negatives_start.f32", (index["n_negative"], height, width))
    ends = [TrajRaster(r) for r in read_f32(aug_dir / "end.f32", (index["n_end"], height, width))]
    pos_pairs = [(TrajRaster(r), ends[i]) for r, i in zip(positives, index["positive_end_index"])]
    neg_pairs = [(TrajRaster(r), ends[i]) for r, i in zip(negatives, index["negative_end_index"])]
    return pos_pairs, neg_pairs


# Ground truth

def save_truth(truth: GroundTruth, path: PathLike) -> None:
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(truth.model_dump_json(indent=2), encoding="utf-8")
    except OSError as e:
        raise DatasetIOException(f"cannot write ground truth {path}: {e}") from e


def load_truth(path: PathLike) -> GroundTruth:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise DatasetIOException(f"cannot read ground truth {path}: {e}") from e
    try:
        return GroundTruth.model_validate_json(text)
    except ValidationError as e:
        raise handle_validation_error(e, str(path)) from e
