"""
Report Service
Classification metrics, path-length statistics and plot-ready exports
"""

import json
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from sklearn.decomposition import PCA
from sklearn.metrics import accuracy_score, confusion_matrix, precision_recall_fscore_support

from segcurate.core.exceptions import DatasetIOException
from segcurate.modules.optimization import OptimizedSegment
from segcurate.modules.representation import Embedding
from segcurate.schemas.dataset import GroundTruth
from segcurate.schemas.report import AblationRow, ClassificationMetrics, CurationReport, PathLengthStats
from segcurate.utils.helpers import safe_mean

logger = logging.getLogger(__name__)

EMBEDDING_COLUMNS = ["pc1", "pc2", "label"]


class ReportService:
    """Turns pipeline outputs into report sections and files"""

    def classification_metrics(self, truth_clean: Sequence[bool], predicted_positive: Sequence[bool],
                               demo_accuracy: Optional[float] = None) -> ClassificationMetrics:
        """Precision/recall/F1 with the clean class as positive"""
        y_true = np.asarray(truth_clean, dtype=bool)
        y_pred = np.asarray(predicted_positive, dtype=bool)
        if len(y_true) == 0:
            return ClassificationMetrics(precision=0.0, recall=0.0, f1=0.0, accuracy=0.0,
                                         true_positive=0, false_positive=0, true_negative=0,
                                         false_negative=0, demo_accuracy=demo_accuracy)
        precision, recall, f1, _ = precision_recall_fscore_support(
            y_true, y_pred, average="binary", pos_label=True, zero_division=0)
        tn, fp, fn, tp = confusion_matrix(y_true, y_pred, labels=[False, True]).ravel()
        return ClassificationMetrics(
            precision=float(precision),
            recall=float(recall),
            f1=float(f1),
            accuracy=float(accuracy_score(y_true, y_pred)),
            true_positive=int(tp),
            false_positive=int(fp),
            true_negative=int(tn),
            false_negative=int(fn),
            demo_accuracy=demo_accuracy,
        )

    def _length_stats(self, optimized: Sequence[OptimizedSegment]) -> PathLengthStats:
        original = [seg.original_path_length for seg in optimized]
        reduced = [seg.optimized_path_length for seg in optimized]
        return PathLengthStats(
            segments=len(optimized),
            mean_original=safe_mean(original),
            mean_optimized=safe_mean(reduced),
            mean_reduction=safe_mean(o - r for o, r in zip(original, reduced)),
        )

    def path_length_stats(self, optimized: Sequence[OptimizedSegment],
                          truth: Optional[GroundTruth] = None) -> PathLengthStats:
        """Original vs retained-waypoint polyline lengths, split by ground truth when given"""
        stats = self._length_stats(optimized)
        if truth is not None and optimized:
            lookup = truth.by_id()
            groups = {"clean": [], "corrupted": []}
            for seg in optimized:
                demo = lookup.get(seg.original.demo_id)
                if demo is None:
                    continue
                key = "clean" if demo.segment_is_clean(seg.original.start, seg.original.end) else "corrupted"
                groups[key].append(seg)
            stats.by_truth = {key: self._length_stats(group) for key, group in groups.items() if group}
        return stats

    def pca_projection(self, embeddings: np.ndarray) -> np.ndarray:
        """2-D PCA coordinates; fewer than two points project to the origin"""
        embeddings = np.asarray(embeddings, dtype=np.float64)
        if len(embeddings) < 2:
            return np.zeros((len(embeddings), 2))
        n_components = min(2, embeddings.shape[0], embeddings.shape[1])
        projected = PCA(n_components=n_components, svd_solver="full").fit_transform(embeddings)
        if n_components < 2:
            projected = np.hstack([projected, np.zeros((len(projected), 2 - n_components))])
        return projected

    def embeddings_frame(self, embeddings: Sequence[Tuple[Union[Embedding, np.ndarray], str]]) -> pd.DataFrame:
        if not embeddings:
            return pd.DataFrame(columns=EMBEDDING_COLUMNS)
        matrix = np.stack([e.z if isinstance(e, Embedding) else np.asarray(e) for e, _ in embeddings])
        projected = self.pca_projection(matrix)
        return pd.DataFrame({"pc1": projected[:, 0], "pc2": projected[:, 1],
                             "label": [label for _, label in embeddings]})

    def export(self, report: CurationReport, embeddings: Sequence[Tuple[Union[Embedding, np.ndarray], str]],
               path: Union[str, Path]) -> None:
        """Write report.json and embeddings.csv into the directory `path`"""
        out_dir = Path(path)
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / "report.json").write_text(report.model_dump_json(indent=2), encoding="utf-8")
            self.embeddings_frame(embeddings).to_csv(out_dir / "embeddings.csv", index=False)
        except OSError as e:
            logger.error(f"Report export failed: {e}")
            raise DatasetIOException(f"cannot write report to {out_dir}: {e}") from e
        logger.info(f"Report written to {out_dir}")

    def export_ablation(self, rows: List[AblationRow], path: Union[str, Path]) -> None:
        out_dir = Path(path)
        records = [row.model_dump(mode="json") for row in rows]
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            pd.DataFrame.from_records(records, columns=list(AblationRow.model_fields)).to_csv(
                out_dir / "ablation.csv", index=False)
            (out_dir / "ablation.json").write_text(
                json.dumps(records, indent=2), encoding="utf-8")
        except OSError as e:
            logger.error(f"Ablation export failed: {e}")
            raise DatasetIOException(f"cannot write ablation results to {out_dir}: {e}") from e


# Global report service instance
report_service = ReportService()


def report_export(report: CurationReport, embeddings: Sequence[Tuple[Union[Embedding, np.ndarray], str]],
                  path: Union[str, Path]) -> None:
    report_service.export(report, embeddings, path)
