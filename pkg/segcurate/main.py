"""
segcurate CLI
Stage-by-stage and end-to-end curation commands
"""

import json
import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, List, Optional

import typer
from dotenv import load_dotenv

from segcurate.core.config import (
    dump_run_config,
    load_run_config,
    load_synth_config,
    settings,
    validate_settings,
)
from segcurate.core.dataset import load_dataset, read_records, save_dataset
from segcurate.core.exceptions import ConfigurationException, DatasetFormatException, SegCurateException
from segcurate.core.log import setup_logging
from segcurate.models.demonstration import DatasetRole
from segcurate.modules.optimization import optimize_negatives
from segcurate.modules.render import augment_expert, canonical_camera
from segcurate.modules.representation import load_params, save_params, train
from segcurate.modules.segmentation import segment_dataset
from segcurate.modules.selection import (
    NEGATIVE,
    POSITIVE,
    build_reference_set,
    classify_segments,
    load_reference_set,
    save_reference_set,
)
from segcurate.modules.synth import generate
from segcurate.schemas.config import SynthConfig
from segcurate.schemas.dataset import LabelRecord
from segcurate.schemas.report import CurationReport
from segcurate.services import stage_io
from segcurate.services.curation_service import CurationService, ablate as run_ablation
from segcurate.services.curation_service import float32_params, float32_reference
from segcurate.services.report_service import report_service

logger = logging.getLogger(__name__)

app = typer.Typer(add_completion=False, help="Segment-level curation of robot demonstration datasets")

ConfigOption = typer.Option(None, "--config", help="JSON run configuration")
SeedOption = typer.Option(None, "--seed", min=0, max=2**64 - 1, help="Overrides every configured seed")
ThreadsOption = typer.Option(None, "--threads", min=1, help="Worker threads (default from settings)")


@contextmanager
def cli_errors() -> Iterator[None]:
    """Expected failures exit with their code and no traceback"""
    try:
        yield
    except SegCurateException as e:
        logger.error(str(e))
        typer.echo(f"Error: {e}", err=True)
        raise typer.Exit(code=e.exit_code)


def _threads(threads: Optional[int]) -> int:
    return threads if threads is not None else settings.DEFAULT_THREADS


def _resolved_beside(cfg, out: Path, name: str = stage_io.RESOLVED_CONFIG_FILE) -> None:
    dump_run_config(cfg, out.parent / name)


def _required(value: Optional[str], flag: str) -> str:
    if not value:
        raise ConfigurationException(f"{flag} is required (flag or config paths section)")
    return value


@app.callback()
def callback(log_level: Optional[str] = typer.Option(None, "--log-level", help="Overrides LOG_LEVEL")):
    load_dotenv()
    setup_logging(log_level)
    with cli_errors():
        validate_settings()


@app.command()
def synth(
    out: Path = typer.Option(..., "--out", help="Dataset JSON-lines output"),
    truth: Optional[Path] = typer.Option(None, "--truth", help="Ground-truth JSON output"),
    mixture: Optional[float] = typer.Option(None, "--mixture", help="Expert fraction, e.g. 0.2, 0.5, 0.8"),
    total: Optional[int] = typer.Option(None, "--total", min=0, help="Demonstrations for --mixture"),
    expert_only: bool = typer.Option(False, "--expert-only", help="Reference set (no suboptimal demos)"),
    config: Optional[Path] = ConfigOption,
    seed: Optional[int] = SeedOption,
):
    """Generate a synthetic mixed-quality dataset with ground truth"""
    with cli_errors():
        cfg = load_synth_config(config, seed)
        if mixture is not None:
            total_demos = total if total is not None else cfg.n_expert + cfg.n_suboptimal
            try:
                cfg = SynthConfig.from_mixture(
                    total_demos, mixture, **cfg.model_dump(exclude={"n_expert", "n_suboptimal"}))
            except ValueError as e:
                raise ConfigurationException(f"Invalid mixture: {e}") from e
        if expert_only:
            cfg = cfg.model_copy(update={"n_suboptimal": 0})

        result = generate(cfg)
        dataset = result.dataset.with_role(DatasetRole.EXPERT_REFERENCE) if expert_only else result.dataset
        save_dataset(dataset, out)
        if truth is not None:
            stage_io.save_truth(result.truth, truth)
        _resolved_beside(cfg, out, "synth_config.json")
        typer.echo(f"{len(dataset)} demonstrations written to {out}")


@app.command()
def segment(
    in_path: Path = typer.Option(..., "--in", help="Dataset JSON-lines input"),
    out: Path = typer.Option(..., "--out", help="Segments JSON-lines output"),
    config: Optional[Path] = ConfigOption,
    seed: Optional[int] = SeedOption,
    threads: Optional[int] = ThreadsOption,
):
    """Split every demonstration at its keyframes"""
    with cli_errors():
        cfg = load_run_config(config, seed)
        dataset = load_dataset(in_path)
        segments = segment_dataset(dataset.demos, cfg.segmentation, _threads(threads))
        stage_io.write_segments(segments, out)
        _resolved_beside(cfg, out)
        typer.echo(f"{len(segments)} segments written to {out}")


@app.command()
def augment(
    expert: Path = typer.Option(..., "--expert", help="Expert reference dataset"),
    out: Path = typer.Option(..., "--out", help="Augmentation directory"),
    config: Optional[Path] = ConfigOption,
    seed: Optional[int] = SeedOption,
    threads: Optional[int] = ThreadsOption,
):
    """Render positive and negative raster pairs from the expert segments"""
    with cli_errors():
        cfg = load_run_config(config, seed)
        dataset = load_dataset(expert, DatasetRole.EXPERT_REFERENCE)
        segments = segment_dataset(dataset.demos, cfg.segmentation, _threads(threads))
        positives, negatives = augment_expert(segments, cfg.augment, threads=_threads(threads))
        cameras = [canonical_camera(seg.positions, cfg.augment) for seg in segments]
        stage_io.write_augmentation(positives, negatives, segments, cameras, cfg.augment, out)
        dump_run_config(cfg, out / stage_io.RESOLVED_CONFIG_FILE)
        typer.echo(f"{len(positives)} positive and {len(negatives)} negative pairs written to {out}")


@app.command("train-repr")
def train_repr(
    aug: Path = typer.Option(..., "--aug", help="Augmentation directory"),
    out: Path = typer.Option(..., "--out", help="Encoder params file"),
    ref_out: Optional[Path] = typer.Option(None, "--ref-out", help="Labeled reference-set file"),
    expert: Optional[Path] = typer.Option(None, "--expert", help="Expert dataset (needed for --ref-out)"),
    config: Optional[Path] = ConfigOption,
    seed: Optional[int] = SeedOption,
    threads: Optional[int] = ThreadsOption,
):
    """Train the segment encoder with the supervised contrastive loss"""
    with cli_errors():
        cfg = load_run_config(config, seed)
        if ref_out is not None and expert is None:
            raise ConfigurationException("--ref-out needs --expert to embed the expert segments")
        positives, negatives = stage_io.read_augmentation(aug)
        result = train(positives, negatives, cfg.train)
        params = float32_params(result.params)
        save_params(params, out)
        (out.parent / stage_io.LOSS_TRACE_FILE).write_text(json.dumps(result.loss_trace), encoding="utf-8")

        if ref_out is not None:
            dataset = load_dataset(expert, DatasetRole.EXPERT_REFERENCE)
            segments = segment_dataset(dataset.demos, cfg.segmentation, _threads(threads))
            reference = build_reference_set(segments, positives, negatives, params,
                                            lambda seg: canonical_camera(seg.positions, cfg.augment))
            save_reference_set(float32_reference(reference), ref_out)
        _resolved_beside(cfg, out)
        final = f"{result.loss_trace[-1]:.6f}" if result.loss_trace else "n/a"
        typer.echo(f"Encoder trained ({len(result.loss_trace)} epochs, final loss {final})")


@app.command()
def classify(
    in_path: Path = typer.Option(..., "--in", help="Dataset the segments refer to"),
    segments_path: Path = typer.Option(..., "--segments", help="Segments JSON-lines"),
    params_path: Path = typer.Option(..., "--params", help="Encoder params file"),
    ref: Path = typer.Option(..., "--ref", help="Labeled reference-set file"),
    out: Path = typer.Option(..., "--out", help="Labels JSON-lines output"),
    config: Optional[Path] = ConfigOption,
    seed: Optional[int] = SeedOption,
    threads: Optional[int] = ThreadsOption,
):
    """Vote every segment positive or negative against the reference set"""
    with cli_errors():
        cfg = load_run_config(config, seed)
        dataset = load_dataset(in_path)
        segments = stage_io.read_segments(segments_path, dataset)
        classification = classify_segments(
            segments, load_params(params_path), load_reference_set(ref),
            lambda seg: canonical_camera(seg.positions, cfg.augment), cfg.vote, _threads(threads))
        stage_io.write_labels(segments, classification.scores, classification.labels, out)
        _resolved_beside(cfg, out)
        typer.echo(f"{len(classification.positives)} positive, {len(classification.negatives)} negative")


@app.command()
def optimize(
    in_path: Path = typer.Option(..., "--in", help="Dataset the segments refer to"),
    segments_path: Path = typer.Option(..., "--segments", help="Segments or labels JSON-lines"),
    out: Path = typer.Option(..., "--out", help="Optimized segments JSON-lines output"),
    config: Optional[Path] = ConfigOption,
    seed: Optional[int] = SeedOption,
    threads: Optional[int] = ThreadsOption,
):
    """Greedy waypoint selection and action relabeling; label files are filtered to negatives"""
    with cli_errors():
        cfg = load_run_config(config, seed)
        dataset = load_dataset(in_path)
        only = NEGATIVE if stage_io.is_label_file(segments_path) else None
        segments = stage_io.read_segments(segments_path, dataset, only_label=only)
        optimized = (optimize_negatives(segments, cfg.optimize, segments[0].action_kind, _threads(threads))
                     if segments else [])
        stage_io.write_optimized(optimized, out)
        _resolved_beside(cfg, out)
        typer.echo(f"{len(optimized)} segments optimized")


@app.command("curate")
def curate_command(
    mixed: Optional[str] = typer.Option(None, "--mixed", help="Mixed-quality dataset"),
    expert: Optional[str] = typer.Option(None, "--expert", help="Expert reference dataset"),
    out: Optional[str] = typer.Option(None, "--out", help="Run directory"),
    truth: Optional[str] = typer.Option(None, "--truth", help="Ground truth for evaluation metrics"),
    config: Optional[Path] = ConfigOption,
    seed: Optional[int] = SeedOption,
    threads: Optional[int] = ThreadsOption,
):
    """Run the full pipeline and materialize every stage under --out"""
    with cli_errors():
        cfg = load_run_config(config, seed)
        mixed_path = _required(mixed or cfg.paths.mixed, "--mixed")
        expert_path = _required(expert or cfg.paths.expert, "--expert")
        out_dir = Path(out or cfg.paths.output_dir or settings.OUTPUT_DIR)
        truth_path = truth or cfg.paths.truth

        service = CurationService(cfg, _threads(threads), out_dir,
                                  stage_io.load_truth(truth_path) if truth_path else None)
        result = service.curate(load_dataset(mixed_path),
                                load_dataset(expert_path, DatasetRole.EXPERT_REFERENCE))
        _echo_report(result.report)


@app.command()
def report(
    run: Path = typer.Option(..., "--run", help="Run directory written by curate"),
    truth: Optional[Path] = typer.Option(None, "--truth", help="Ground truth to (re)score labels against"),
):
    """Summarize a run; with --truth, recompute classification metrics from labels.jsonl"""
    with cli_errors():
        report_path = run / "report.json"
        try:
            current = CurationReport.model_validate_json(report_path.read_text(encoding="utf-8"))
        except OSError as e:
            raise DatasetFormatException(f"no readable report in {run}: {e}", str(report_path)) from e
        except ValueError as e:
            raise DatasetFormatException(f"report is not valid: {e}", str(report_path)) from e

        if truth is not None:
            ground_truth = stage_io.load_truth(truth)
            records: List[LabelRecord] = read_records(run / stage_io.LABELS_FILE, LabelRecord)
            truth_clean = [ground_truth.segment_is_clean(r.demo_id, r.start, r.end) for r in records]
            predicted = [r.label == POSITIVE for r in records]
            demo_accuracy = current.metrics.demo_accuracy if current.metrics else None
            current.metrics = report_service.classification_metrics(truth_clean, predicted, demo_accuracy)
            report_path.write_text(current.model_dump_json(indent=2), encoding="utf-8")
        _echo_report(current)


@app.command("ablate")
def ablate_command(
    mixed: str = typer.Option(..., "--mixed", help="Mixed-quality dataset"),
    expert: str = typer.Option(..., "--expert", help="Expert reference dataset"),
    out: Path = typer.Option(..., "--out", help="Directory for ablation.json and ablation.csv"),
    truth: Optional[str] = typer.Option(None, "--truth", help="Ground truth for F1 and path lengths"),
    config: Optional[Path] = ConfigOption,
    seed: Optional[int] = SeedOption,
    threads: Optional[int] = ThreadsOption,
):
    """Curate once per switch combination of the ablation grid"""
    with cli_errors():
        cfg = load_run_config(config, seed)
        rows = run_ablation(load_dataset(mixed), load_dataset(expert, DatasetRole.EXPERT_REFERENCE), cfg,
                            stage_io.load_truth(truth) if truth else None, _threads(threads))
        report_service.export_ablation(rows, out)
        dump_run_config(cfg, out / stage_io.RESOLVED_CONFIG_FILE)
        for row in rows:
            f1 = f"{row.f1:.3f}" if row.f1 is not None else "-"
            typer.echo(f"{row.selection_level.value:<13} opt={row.trajectory_optimization!s:<5} "
                       f"relabel={row.action_relabeling!s:<5} utilization={row.utilization:.4f} f1={f1}")


def _echo_report(current: CurationReport) -> None:
    counts = current.counts
    typer.echo(f"switches      {current.switches}")
    typer.echo(f"demos         {counts.demos} ({counts.dropped_demos} dropped)")
    typer.echo(f"segments      {counts.segments} ({counts.positives} positive, {counts.negatives} negative)")
    typer.echo(f"utilization   {current.utilization:.4f} ({counts.emitted_steps}/{counts.original_steps})")
    if current.metrics is not None:
        m = current.metrics
        typer.echo(f"precision     {m.precision:.4f}  recall {m.recall:.4f}  f1 {m.f1:.4f}")


def main() -> None:
    app()


if __name__ == "__main__":
    main()
