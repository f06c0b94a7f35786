"""
Segment Selection
Distance-weighted k-nearest-neighbor voting against the labeled expert embedding set
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Sequence, Tuple, Union

import numpy as np

from segcurate.core.exceptions import DatasetFormatException, SelectionException
from segcurate.core.tensor_io import read_tensor_file, write_tensor_file
from segcurate.models.demonstration import Segment
from segcurate.modules.render import Camera, RasterPair, render_segment
from segcurate.modules.representation import EncoderParams, Embedding, encode_arrays, encode_pairs
from segcurate.schemas.config import VoteConfig
from segcurate.utils.helpers import parallel_map

logger = logging.getLogger(__name__)

POSITIVE = "positive"
NEGATIVE = "negative"
REFERENCE_FORMAT = "segcurate-reference"

CameraSource = Union[Camera, Callable[[Segment], Camera]]


@dataclass
class LabeledEmbeddingSet:
    """Reference embeddings (n, dim) with is_positive labels, plus per-source counts"""
    embeddings: np.ndarray
    labels: np.ndarray
    source_counts: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        self.embeddings = np.atleast_2d(np.asarray(self.embeddings, dtype=np.float64))
        self.labels = np.asarray(self.labels, dtype=bool).reshape(-1)
        if len(self.embeddings) != len(self.labels):
            raise SelectionException("reference embeddings and labels differ in length")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def label_counts(self) -> Dict[str, int]:
        positives = int(self.labels.sum())
        return {POSITIVE: positives, NEGATIVE: len(self) - positives}

    def check_votable(self, k: int) -> None:
        if len(self) < k:
            raise SelectionException(f"reference set has {len(self)} entries, voting needs k={k}")
        counts = self.label_counts
        if counts[POSITIVE] == 0 or counts[NEGATIVE] == 0:
            raise SelectionException(f"reference set needs both labels, has {counts}")

    @classmethod
    def from_entries(cls, entries: Sequence[Tuple[Embedding, bool]]) -> "LabeledEmbeddingSet":
        return cls(np.stack([e.z for e, _ in entries]), np.array([label for _, label in entries]))


@dataclass
class Classification:
    """Partition of the classified segments; scores and labels align with the input order"""
    positives: List[Segment]
    negatives: List[Segment]
    scores: List[float]
    labels: List[bool]
    embeddings: np.ndarray


def vote(z: Union[Embedding, np.ndarray], ref: LabeledEmbeddingSet, cfg: VoteConfig) -> Tuple[bool, float]:
    """(is_positive, score) where score is the exp(-distance) weighted positive share of the k nearest"""
    ref.check_votable(cfg.k)
    query = z.z if isinstance(z, Embedding) else np.asarray(z, dtype=np.float64)
    distances = np.linalg.norm(ref.embeddings - query[None, :], axis=1)
    nearest = np.argsort(distances, kind="stable")[:cfg.k]
    weights = np.exp(-distances[nearest])
    score = float(weights[ref.labels[nearest]].sum() / weights.sum())
    return score >= cfg.delta_c, score


def _resolve_camera(cam: CameraSource, seg: Segment) -> Camera:
    return cam(seg) if callable(cam) else cam


def embed_segments(segs: Sequence[Segment], params: EncoderParams, cam: CameraSource,
                   threads: int = 1) -> np.ndarray:
    """Render each segment from its classification camera and encode it with a blank end raster"""
    if not segs:
        return np.zeros((0, params.architecture.embed_dim))
    rasters = parallel_map(lambda seg: render_segment(seg, _resolve_camera(cam, seg)).pixels,
                           list(segs), threads)
    starts = np.stack(rasters)
    ends = np.zeros_like(starts)
    return encode_arrays(starts, ends, params)


def classify_segments(segs: Sequence[Segment], params: EncoderParams, ref: LabeledEmbeddingSet,
                      cam: CameraSource, cfg: VoteConfig, threads: int = 1) -> Classification:
    """Vote every segment into D_pos or D_neg.

    ``cam`` is either one camera for every segment or a callable giving the
    canonical camera of a segment.
    """
    if not segs:
        return Classification([], [], [], [], np.zeros((0, params.architecture.embed_dim)))
    ref.check_votable(cfg.k)

    embeddings = embed_segments(segs, params, cam, threads)
    votes = parallel_map(lambda z: vote(z, ref, cfg), list(embeddings), threads)

    positives, negatives = [], []
    for seg, (is_positive, _) in zip(segs, votes):
        (positives if is_positive else negatives).append(seg)
    logger.info(f"Classified {len(segs)} segments: {len(positives)} positive, {len(negatives)} negative")
    return Classification(positives, negatives, [score for _, score in votes],
                          [label for label, _ in votes], embeddings)


def build_reference_set(expert_segs: Sequence[Segment], positives: Sequence[RasterPair],
                        negatives: Sequence[RasterPair], params: EncoderParams,
                        cam: CameraSource) -> LabeledEmbeddingSet:
    """Expert segments (canonical view) and all augmented pairs, embedded with their labels"""
    expert_z = embed_segments(expert_segs, params, cam)
    pos_z = encode_pairs(positives, params)
    neg_z = encode_pairs(negatives, params)
    embeddings = np.concatenate([expert_z, pos_z, neg_z], axis=0)
    labels = np.concatenate([np.ones(len(expert_z) + len(pos_z), dtype=bool),
                             np.zeros(len(neg_z), dtype=bool)])
    counts = {"expert": len(expert_z), "augmented_positive": len(pos_z),
              "augmented_negative": len(neg_z)}
    logger.info(f"Reference set built: {counts}")
    return LabeledEmbeddingSet(embeddings, labels, counts)


def save_reference_set(ref: LabeledEmbeddingSet, path: Union[str, Path]) -> None:
    header = {"format": REFERENCE_FORMAT, "source_counts": ref.source_counts}
    write_tensor_file(path, header, [("embeddings", ref.embeddings),
                                     ("labels", ref.labels.astype(np.float32))])


def load_reference_set(path: Union[str, Path]) -> LabeledEmbeddingSet:
    header, tensors = read_tensor_file(path)
    if header.get("format") != REFERENCE_FORMAT or set(tensors) != {"embeddings", "labels"}:
        raise DatasetFormatException("not a reference-set file", str(path))
    return LabeledEmbeddingSet(tensors["embeddings"], tensors["labels"] > 0.5,
                               dict(header.get("source_counts", {})))
