"""
Curation Service
Runs segment -> augment -> train -> classify -> optimize -> reassemble and builds the report
"""

import json
import logging
from collections import OrderedDict
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple, Union

import numpy as np

from segcurate.core.config import dump_run_config
from segcurate.core.dataset import save_dataset
from segcurate.core.exceptions import DatasetException, StageException
from segcurate.core.performance import PerformanceMonitor, StageTimer
from segcurate.models.demonstration import (
    Dataset,
    DatasetRole,
    Demonstration,
    Segment,
    SourceQuality,
    Step,
    evaluation_view,
)
from segcurate.modules.optimization import OptimizedSegment, optimize_negatives
from segcurate.modules.render import Camera, augment_expert, canonical_camera
from segcurate.modules.representation import EncoderParams, save_params, train
from segcurate.modules.segmentation import segment_dataset
from segcurate.modules.selection import (
    NEGATIVE,
    POSITIVE,
    LabeledEmbeddingSet,
    build_reference_set,
    classify_segments,
    save_reference_set,
)
from segcurate.schemas.config import CurationConfig, PipelineSwitches, SelectionLevel
from segcurate.schemas.dataset import GroundTruth
from segcurate.schemas.report import AblationRow, CurationReport, ReportCounts, SegmentScore
from segcurate.services import stage_io
from segcurate.services.report_service import report_service
from segcurate.utils.helpers import format_duration, safe_mean

logger = logging.getLogger(__name__)

ABLATION_GRID: List[PipelineSwitches] = [
    PipelineSwitches(selection_level=level, trajectory_optimization=opt, action_relabeling=relabel)
    for level in (SelectionLevel.NONE, SelectionLevel.DEMONSTRATION, SelectionLevel.SEGMENT)
    for opt, relabel in ((False, False), (True, False), (True, True))
]


@dataclass
class SelectionModel:
    """Trained encoder and the labeled reference set it produced"""
    params: EncoderParams
    reference: LabeledEmbeddingSet
    loss_trace: List[float] = field(default_factory=list)


@dataclass
class CurationResult:
    dataset: Dataset
    report: CurationReport
    embeddings: List[Tuple[np.ndarray, str]]
    optimized: List[OptimizedSegment]


def _round_f32(array: np.ndarray) -> np.ndarray:
    return np.asarray(array, dtype=np.float32).astype(np.float64)


# params and reference files store float32; in-memory runs use the same values

def float32_params(params: EncoderParams) -> EncoderParams:
    tensors = OrderedDict((name, _round_f32(tensor)) for name, tensor in params.tensors.items())
    return EncoderParams(params.architecture, tensors)


def float32_reference(reference: LabeledEmbeddingSet) -> LabeledEmbeddingSet:
    return LabeledEmbeddingSet(_round_f32(reference.embeddings), reference.labels, reference.source_counts)


class CurationService:
    """One pipeline run over a mixed dataset and an expert reference set"""

    def __init__(self, config: CurationConfig, threads: int = 1,
                 output_dir: Optional[Union[str, Path]] = None,
                 truth: Optional[GroundTruth] = None):
        self.config = config
        self.threads = max(1, threads)
        self.output_dir = Path(output_dir) if output_dir is not None else None
        self.truth = truth
        self.monitor = PerformanceMonitor()

    @contextmanager
    def stage(self, name: str) -> Iterator[StageTimer]:
        """Time a stage and wrap its failures in StageException"""
        timer = StageTimer(self.monitor, name)
        try:
            with timer:
                yield timer
        except StageException:
            raise
        except Exception as e:
            logger.error(f"Stage '{name}' failed: {e}")
            raise StageException(name, e) from e
        logger.info(f"Stage '{name}' finished in {format_duration(timer.seconds)}")

    def _artifact(self, name: str) -> Optional[Path]:
        if self.output_dir is None:
            return None
        self.output_dir.mkdir(parents=True, exist_ok=True)
        return self.output_dir / name

    def camera_for(self, seg: Segment) -> Camera:
        """Canonical classification camera of a segment"""
        return canonical_camera(seg.positions, self.config.augment)

    # Stages

    def segment(self, dataset: Dataset) -> List[Segment]:
        return segment_dataset(dataset.demos, self.config.segmentation, self.threads)

    def train_selection(self, expert: Dataset) -> SelectionModel:
        """Augment the expert segments, train the encoder and embed the reference set"""
        if expert.role != DatasetRole.EXPERT_REFERENCE:
            raise DatasetException(f"expert dataset must have role {DatasetRole.EXPERT_REFERENCE.value}, "
                                   f"got {expert.role.value}")

        with self.stage("segment"):
            expert_segments = self.segment(expert)

        with self.stage("augment"):
            positives, negatives = augment_expert(expert_segments, self.config.augment, threads=self.threads)
            aug_dir = self._artifact(stage_io.AUGMENT_DIR)
            if aug_dir is not None:
                aug_dir.mkdir(parents=True, exist_ok=True)
                stage_io.write_augmentation(positives, negatives, expert_segments,
                                            [self.camera_for(seg) for seg in expert_segments],
                                            self.config.augment, aug_dir)

        with self.stage("train"):
            result = train(positives, negatives, self.config.train)
            params = float32_params(result.params)
            reference = float32_reference(
                build_reference_set(expert_segments, positives, negatives, params, self.camera_for))
            params_path = self._artifact(stage_io.PARAMS_FILE)
            if params_path is not None:
                save_params(params, params_path)
                save_reference_set(reference, self._artifact(stage_io.REFERENCE_FILE))
                self._artifact(stage_io.LOSS_TRACE_FILE).write_text(
                    json.dumps(result.loss_trace), encoding="utf-8")

        return SelectionModel(params, reference, result.loss_trace)

    def classify(self, segments: List[Segment], model: SelectionModel):
        return classify_segments(segments, model.params, model.reference, self.camera_for,
                                 self.config.vote, self.threads)

    def _demonstration_labels(self, segments: List[Segment],
                              scores: List[float]) -> Tuple[List[bool], Dict[str, float]]:
        """Every segment takes its demo's label: mean segment score >= delta_c"""
        per_demo: Dict[str, List[float]] = {}
        for seg, score in zip(segments, scores):
            per_demo.setdefault(seg.demo_id, []).append(score)
        demo_scores = {demo_id: safe_mean(values) for demo_id, values in per_demo.items()}
        labels = [demo_scores[seg.demo_id] >= self.config.vote.delta_c for seg in segments]
        return labels, demo_scores

    def _reassemble(self, mixed: Dataset, segments: List[Segment], labels: List[bool],
                    optimized: Dict[Tuple[str, int, int], OptimizedSegment]) -> Tuple[List[Demonstration], int]:
        switches = self.config.switches
        per_demo: Dict[str, List[Tuple[Segment, bool]]] = {}
        for seg, label in zip(segments, labels):
            per_demo.setdefault(seg.demo_id, []).append((seg, label))

        demos, dropped = [], 0
        for demo in mixed.demos:
            parts = per_demo.get(demo.id, [])
            if all(label for _, label in parts):
                demos.append(demo)
                continue
            steps: List[Step] = []
            for seg, label in parts:
                if label:
                    steps.extend(seg.steps)
                elif not switches.trajectory_optimization:
                    continue
                elif switches.action_relabeling:
                    steps.extend(optimized[seg.key].relabeled_steps)
                else:
                    steps.extend(optimized[seg.key].retained_steps)
            if len(steps) < 2:
                dropped += 1
                logger.warning(f"Demo {demo.id} dropped: {len(steps)} steps survive curation")
                continue
            demos.append(demo.replace_steps(steps))
        return demos, dropped

    def _corrupted_mean_path_length(self, segments: List[Segment], labels: List[bool],
                                    optimized: Dict[Tuple[str, int, int], OptimizedSegment]) -> Optional[float]:
        """Mean effective path length over ground-truth corrupted segments that survive"""
        if self.truth is None:
            return None
        lengths = []
        for seg, label in zip(segments, labels):
            if self.truth.segment_is_clean(seg.demo_id, seg.start, seg.end):
                continue
            if label:
                lengths.append(seg.path_length())
            elif seg.key in optimized:
                lengths.append(optimized[seg.key].optimized_path_length)
        return safe_mean(lengths) if lengths else None

    def _demo_accuracy(self, mixed: Dataset, labels: List[bool], segments: List[Segment]) -> Optional[float]:
        view = evaluation_view(mixed)
        demo_label = {seg.demo_id: label for seg, label in zip(segments, labels)}
        hits = [demo_label[demo_id] == (quality == SourceQuality.EXPERT)
                for demo_id, quality in view.labels.items()
                if quality != SourceQuality.UNKNOWN and demo_id in demo_label]
        return safe_mean(hits) if hits else None

    def curate(self, mixed: Dataset, expert: Dataset, model: Optional[SelectionModel] = None) -> CurationResult:
        """D~ = kept positives plus optimized (and relabeled) negatives, reassembled per demo"""
        if expert.role != DatasetRole.EXPERT_REFERENCE:
            raise DatasetException(f"expert dataset must have role {DatasetRole.EXPERT_REFERENCE.value}, "
                                   f"got {expert.role.value}")
        self.monitor.reset()
        switches = self.config.switches
        level = switches.selection_level
        logger.info(f"Curating {len(mixed)} demonstrations with switches {switches.label}")

        resolved = self._artifact(stage_io.RESOLVED_CONFIG_FILE)
        if resolved is not None:
            dump_run_config(self.config, resolved)

        with self.stage("segment"):
            segments = self.segment(mixed)
            segments_path = self._artifact(stage_io.SEGMENTS_FILE)
            if segments_path is not None:
                stage_io.write_segments(segments, segments_path)

        scores: List[Optional[float]] = [None] * len(segments)
        demo_scores: Dict[str, float] = {}
        embeddings: List[Tuple[np.ndarray, str]] = []
        if level == SelectionLevel.NONE:
            # every segment is an optimization candidate; without optimization all are kept
            labels = [not switches.trajectory_optimization] * len(segments)
        else:
            if model is None:
                model = self.train_selection(expert)
            with self.stage("classify"):
                classification = self.classify(segments, model)
                scores = list(classification.scores)
                labels = list(classification.labels)
                if level == SelectionLevel.DEMONSTRATION:
                    labels, demo_scores = self._demonstration_labels(segments, classification.scores)
                embeddings = [(z, POSITIVE if label else NEGATIVE)
                              for z, label in zip(classification.embeddings, labels)]
                labels_path = self._artifact(stage_io.LABELS_FILE)
                if labels_path is not None:
                    stage_io.write_labels(segments, scores, labels, labels_path)

        negatives = [seg for seg, label in zip(segments, labels) if not label]
        optimized: List[OptimizedSegment] = []
        if switches.trajectory_optimization and negatives:
            with self.stage("optimize"):
                optimized = optimize_negatives(negatives, self.config.optimize, negatives[0].action_kind,
                                               self.threads)
                optimized_path = self._artifact(stage_io.OPTIMIZED_FILE)
                if optimized_path is not None:
                    stage_io.write_optimized(optimized, optimized_path)
        by_key = {seg.original.key: seg for seg in optimized}

        with self.stage("reassemble"):
            demos, dropped = self._reassemble(mixed, segments, labels, by_key)
            curated = Dataset(tuple(demos), mixed.role)
            curated_path = self._artifact(stage_io.CURATED_FILE)
            if curated_path is not None:
                save_dataset(curated, curated_path)

        with self.stage("report") as timer:
            report = self._build_report(mixed, curated, segments, scores, labels, demo_scores, by_key, dropped)
            report.timings = {**self.monitor.totals(), "report": round(timer.elapsed, 6)}
            if self.output_dir is not None:
                report_service.export(report, embeddings, self.output_dir)

        logger.info(f"Curation finished: {curated.total_steps}/{mixed.total_steps} timesteps emitted "
                    f"(utilization {report.utilization:.4f}), {dropped} demos dropped")
        return CurationResult(curated, report, embeddings, optimized)

    def _build_report(self, mixed: Dataset, curated: Dataset, segments: List[Segment],
                      scores: List[Optional[float]], labels: List[bool], demo_scores: Dict[str, float],
                      optimized: Dict[Tuple[str, int, int], OptimizedSegment], dropped: int) -> CurationReport:
        switches = self.config.switches
        selected = switches.selection_level != SelectionLevel.NONE
        original_steps = mixed.total_steps
        emitted_steps = curated.total_steps
        positives = sum(labels)

        metrics = None
        if self.truth is not None and selected and segments:
            truth_clean = [self.truth.segment_is_clean(s.demo_id, s.start, s.end) for s in segments]
            demo_accuracy = (self._demo_accuracy(mixed, labels, segments)
                             if switches.selection_level == SelectionLevel.DEMONSTRATION else None)
            metrics = report_service.classification_metrics(truth_clean, labels, demo_accuracy)

        return CurationReport(
            switches=switches.label,
            counts=ReportCounts(
                demos=len(mixed),
                segments=len(segments),
                positives=positives,
                negatives=len(segments) - positives,
                optimized=len(optimized),
                dropped_demos=dropped,
                original_steps=original_steps,
                emitted_steps=emitted_steps,
            ),
            utilization=min(1.0, emitted_steps / original_steps) if original_steps else 1.0,
            scores=[
                SegmentScore(demo_id=seg.demo_id, start=seg.start, end=seg.end, score=score,
                             label=(POSITIVE if label else NEGATIVE) if selected else None)
                for seg, score, label in zip(segments, scores, labels)
            ],
            demo_scores=demo_scores,
            path_length=report_service.path_length_stats(
                [optimized[seg.key] for seg in segments if seg.key in optimized], self.truth),
            corrupted_mean_path_length=self._corrupted_mean_path_length(segments, labels, optimized),
            metrics=metrics,
        )


def curate(mixed: Dataset, expert: Dataset, cfg: CurationConfig, truth: Optional[GroundTruth] = None,
           threads: int = 1, output_dir: Optional[Union[str, Path]] = None) -> Tuple[Dataset, CurationReport]:
    result = CurationService(cfg, threads, output_dir, truth).curate(mixed, expert)
    return result.dataset, result.report


def ablate(mixed: Dataset, expert: Dataset, cfg: CurationConfig, truth: Optional[GroundTruth] = None,
           threads: int = 1) -> List[AblationRow]:
    """Curate once per row of ABLATION_GRID, sharing one trained encoder across selection rows"""
    model = CurationService(cfg, threads, truth=truth).train_selection(expert)
    rows = []
    for switches in ABLATION_GRID:
        row_cfg = cfg.model_copy(update={"switches": switches})
        report = CurationService(row_cfg, threads, truth=truth).curate(mixed, expert, model).report
        rows.append(AblationRow(
            selection_level=switches.selection_level,
            trajectory_optimization=switches.trajectory_optimization,
            action_relabeling=switches.action_relabeling,
            utilization=report.utilization,
            positives=report.counts.positives,
            negatives=report.counts.negatives,
            emitted_steps=report.counts.emitted_steps,
            dropped_demos=report.counts.dropped_demos,
            corrupted_mean_path_length=report.corrupted_mean_path_length,
            f1=report.metrics.f1 if report.metrics is not None else None,
        ))
        logger.info(f"Ablation {switches.label}: utilization {report.utilization:.4f}")
    return rows
