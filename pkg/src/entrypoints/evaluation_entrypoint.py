from pathlib import Path
from typing import Optional

import click
from loguru import logger

from src.data.io import load_image, load_labeled_split, save_label_map
from src.data.soft_label_store import save_record
from src.entrypoints.common import (
    adopt_model_config,
    domain_errors,
    run_options,
    write_run_config,
)
from src.exceptions.segmentation_exceptions import ConfigurationError
from src.middleware.run_logger import logged_command
from src.schemas.run_schema import resolve_run_config
from src.segmentation.dense_unet import as_image_batch
from src.services.checkpoint_service import CheckpointService
from src.services.evaluation_service import EvaluationService
from src.services.rendering_service import RenderingService
from src.services.soft_label_service import SoftLabelService
from src.utils.enums import ConfidenceSource, DatasetSplit

COMPUTED_SOURCES = (ConfidenceSource.STUDENT, ConfidenceSource.TEACHER)

checkpoint_option = click.option(
    "--checkpoint",
    "checkpoint_path",
    type=click.Path(dir_okay=False, path_type=Path),
    required=True,
    help="Model checkpoint to evaluate.",
)


@click.group()
def router() -> None:
    """Evaluation and inference commands."""


@router.command("evaluate")
@run_options
@checkpoint_option
@click.option(
    "--data",
    "data_dir",
    type=click.Path(file_okay=False, path_type=Path),
    default=None,
    help="Dataset directory with a manifest (default: paths.data_dir).",
)
@click.option(
    "--split",
    type=click.Choice([str(split) for split in DatasetSplit if split != "unlabeled"]),
    default=str(DatasetSplit.TEST),
    show_default=True,
)
@click.option("--threshold", type=float, default=0.5, show_default=True)
@click.option(
    "--confidence-source",
    type=click.Choice([str(source) for source in COMPUTED_SOURCES]),
    default=str(ConfidenceSource.STUDENT),
    show_default=True,
    help="Whose MC-dropout confidence selects the confident subset.",
)
@click.option(
    "--teacher",
    "teacher_path",
    type=click.Path(dir_okay=False, path_type=Path),
    default=None,
    help="Teacher checkpoint, needed with --confidence-source teacher.",
)
@click.option(
    "--class-id",
    type=int,
    default=1,
    show_default=True,
    help="Class of the precision-recall curve.",
)
@click.option("--num-overlays", type=int, default=4, show_default=True)
@click.option(
    "--mc-mean",
    is_flag=True,
    default=False,
    help="Predict from the MC-averaged scores instead of one deterministic pass.",
)
@domain_errors
@logged_command
def evaluate(
    config_path: Optional[Path],
    seed: Optional[int],
    alpha: Optional[float],
    num_passes: Optional[int],
    out_dir: Optional[Path],
    checkpoint_path: Path,
    data_dir: Optional[Path],
    split: str,
    threshold: float,
    confidence_source: str,
    teacher_path: Optional[Path],
    class_id: int,
    num_overlays: int,
    mc_mean: bool,
) -> None:
    """Dice reports, confident-subset report, PR curve and overlay panels."""
    config = resolve_run_config(
        config_path,
        seed,
        alpha,
        num_passes,
        out_dir,
        {"paths.data_dir": None if data_dir is None else str(data_dir)},
    )
    expected = config.model if config_path is not None else None
    model, payload = CheckpointService.load(checkpoint_path, expected)
    config = adopt_model_config(config, model.config)
    teacher = None
    if teacher_path is not None:
        teacher, _ = CheckpointService.load(teacher_path, model.config)
    test = load_labeled_split(config.paths.data_dir, DatasetSplit(split))
    if test.num_classes != model.config.num_classes:
        raise ConfigurationError(
            f"dataset has {test.num_classes} classes, the checkpoint "
            f"{model.config.num_classes}"
        )
    for sample in test:
        as_image_batch(sample.image, model.config)
    if not 0 <= class_id < model.config.num_classes:
        raise ConfigurationError(
            f"--class-id must lie in [0, {model.config.num_classes - 1}]"
        )

    mc = config.mc if mc_mean else None
    checkpoint_id = payload["checkpoint_id"]
    report = EvaluationService.evaluate_model(
        model, test, mc=mc, checkpoint_id=checkpoint_id
    )
    confident = EvaluationService.confident_subset_report(
        model,
        test,
        threshold=threshold,
        source=ConfidenceSource(confidence_source),
        mc=config.mc,
        teacher=teacher,
        checkpoint_id=checkpoint_id,
    )
    curve = EvaluationService.precision_recall(model, test, class_id, mc=mc)
    overlays = []
    for sample in list(test)[:num_overlays]:
        record = SoftLabelService.generate_soft_labels(
            model, [sample.image], [sample.id], config.mc, checkpoint_id
        )[0]
        prediction = EvaluationService.predict_scores(model, sample.image, mc)
        overlays.append((sample, prediction.argmax(dim=0), record))

    directory = config.paths.out_dir / "evaluation"
    EvaluationService.write_report(report, directory / "dice_report.csv")
    EvaluationService.write_report(confident, directory / "confident_report.csv")
    EvaluationService.write_pr_curve(curve, directory / f"pr_curve_class{class_id}.csv")
    RenderingService.plot_pr_curves(
        {checkpoint_id: curve},
        directory / f"pr_curve_class{class_id}.png",
        title=report.class_names[class_id],
    )
    for sample, prediction, record in overlays:
        RenderingService.render_overlays(
            directory / "overlays" / f"{sample.id}.png",
            sample.image,
            prediction,
            record.uncertainty,
            model.config.num_classes,
            ground_truth=sample.label_map,
        )
    write_run_config(config, directory)
    click.echo(
        f"Mean Dice {report.mean_dice:.4f} +- {report.mean_dice_std:.4f}; "
        f"confident subset {confident.mean_dice:.4f} on "
        f"{100 * confident.confident_fraction:.1f}% of the pixels ({directory})"
    )


@router.command("infer")
@run_options
@checkpoint_option
@click.option(
    "--image",
    "image_paths",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    multiple=True,
    required=True,
    help="Grayscale PNG to segment; repeat for several images.",
)
@click.option(
    "--save-soft-labels",
    is_flag=True,
    default=False,
    help="Also write the soft-label container for each image.",
)
@domain_errors
@logged_command
def infer(
    config_path: Optional[Path],
    seed: Optional[int],
    alpha: Optional[float],
    num_passes: Optional[int],
    out_dir: Optional[Path],
    checkpoint_path: Path,
    image_paths: tuple[Path, ...],
    save_soft_labels: bool,
) -> None:
    """Label map, uncertainty overlay and (optionally) soft labels per image."""
    stems = [path.stem for path in image_paths]
    duplicates = sorted({stem for stem in stems if stems.count(stem) > 1})
    if duplicates:
        raise ConfigurationError(
            f"input images share the file names {duplicates}; their outputs "
            "would overwrite each other"
        )
    config = resolve_run_config(config_path, seed, alpha, num_passes, out_dir)
    expected = config.model if config_path is not None else None
    model, payload = CheckpointService.load(checkpoint_path, expected)
    config = adopt_model_config(config, model.config)
    images = {path.stem: load_image(path) for path in image_paths}
    for image in images.values():
        as_image_batch(image, model.config)

    records = SoftLabelService.generate_soft_labels(
        model,
        list(images.values()),
        list(images),
        config.mc,
        payload["checkpoint_id"],
    )
    directory = config.paths.out_dir / "inference"
    for record in records:
        stem = record.source_image_id
        prediction = record.soft_label.argmax(dim=0).numpy()
        save_label_map(directory / f"{stem}_labels.png", prediction)
        RenderingService.render_overlays(
            directory / f"{stem}_overlay.png",
            images[stem],
            prediction,
            record.uncertainty,
            model.config.num_classes,
        )
        if save_soft_labels:
            save_record(directory / "soft_labels", record)
    write_run_config(config, directory)
    logger.info(f"Segmented {len(records)} image(s) into {directory}")
    click.echo(f"Wrote {len(records)} overlay set(s) to {directory}")
