from pathlib import Path
from typing import Optional

import click
from loguru import logger

from src.entrypoints.common import (
    command_log_file,
    domain_errors,
    parse_list,
    run_options,
    write_run_config,
)
from src.middleware.run_logger import logged_command
from src.schemas.run_schema import RunConfig, resolve_run_config
from src.services.checkpoint_service import BEST_CHECKPOINT, CheckpointService
from src.services.experiment_service import (
    ALPHA_SWEEP_FILENAME,
    COMPARISON_FILENAME,
    COMPARISON_SUMMARY_FILENAME,
    ExperimentService,
)
from src.utils.enums import ModelRole, StudentMethod

data_option = click.option(
    "--data",
    "data_dir",
    type=click.Path(file_okay=False, path_type=Path),
    default=None,
    help="Dataset directory with a manifest (default: paths.data_dir).",
)
teacher_option = click.option(
    "--teacher",
    "teacher_path",
    type=click.Path(dir_okay=False, path_type=Path),
    default=None,
    help="Teacher checkpoint (default: <out>/teacher/best.pt).",
)
resume_option = click.option(
    "--resume",
    is_flag=True,
    default=False,
    help="Continue from the last checkpoint in the output directory.",
)


@click.group()
def router() -> None:
    """Training commands."""


def _resolve(
    config_path: Optional[Path],
    seed: Optional[int],
    alpha: Optional[float],
    num_passes: Optional[int],
    out_dir: Optional[Path],
    data_dir: Optional[Path],
    **extra,
) -> RunConfig:
    values = {"paths.data_dir": None if data_dir is None else str(data_dir)}
    values.update(extra)
    return resolve_run_config(config_path, seed, alpha, num_passes, out_dir, values)


def _teacher_path(config: RunConfig, teacher_path: Optional[Path]) -> Path:
    return (
        teacher_path
        or config.paths.teacher_checkpoint
        or config.paths.out_dir / str(ModelRole.TEACHER) / BEST_CHECKPOINT
    )


@router.command("train-teacher")
@run_options
@data_option
@resume_option
@domain_errors
@logged_command
def train_teacher(
    config_path: Optional[Path],
    seed: Optional[int],
    alpha: Optional[float],
    num_passes: Optional[int],
    out_dir: Optional[Path],
    data_dir: Optional[Path],
    resume: bool,
) -> None:
    """Train the teacher on the labeled split."""
    config = _resolve(config_path, seed, alpha, num_passes, out_dir, data_dir)
    data = ExperimentService.load(config.paths.data_dir, config.model.num_classes)
    out = config.paths.out_dir
    write_run_config(config, out / str(ModelRole.TEACHER))
    with command_log_file(out, "train-teacher"):
        _, teacher_id = ExperimentService.train_teacher(config, data, out, resume)
    best_path = out / str(ModelRole.TEACHER) / BEST_CHECKPOINT
    click.echo(f"Teacher {teacher_id}: {best_path}")


@router.command("train-student")
@run_options
@data_option
@teacher_option
@click.option(
    "--method",
    type=click.Choice([str(method) for method in StudentMethod]),
    default=None,
    help="u_sls (default), plain_sls (alpha = 0) or fs_du (labeled only).",
)
@resume_option
@domain_errors
@logged_command
def train_student(
    config_path: Optional[Path],
    seed: Optional[int],
    alpha: Optional[float],
    num_passes: Optional[int],
    out_dir: Optional[Path],
    data_dir: Optional[Path],
    teacher_path: Optional[Path],
    method: Optional[str],
    resume: bool,
) -> None:
    """Train the student from labeled data and teacher soft labels."""
    config = _resolve(
        config_path,
        seed,
        alpha,
        num_passes,
        out_dir,
        data_dir,
        **{
            "student_method": method,
            "paths.teacher_checkpoint": None
            if teacher_path is None
            else str(teacher_path),
        },
    )
    teacher, payload = CheckpointService.load(
        _teacher_path(config, teacher_path), config.model
    )
    data = ExperimentService.load(config.paths.data_dir, config.model.num_classes)
    out = config.paths.out_dir
    write_run_config(config, out / str(ModelRole.STUDENT))
    with command_log_file(out, "train-student"):
        student = ExperimentService.train_method(
            config.student_method,
            config,
            teacher,
            data,
            out_dir=out,
            resume=resume,
            teacher_checkpoint_id=payload["checkpoint_id"],
        )
    logger.info(f"Student fingerprint {CheckpointService.fingerprint(student)}")
    click.echo(f"Student: {out / str(ModelRole.STUDENT) / BEST_CHECKPOINT}")


@router.command("sweep-alpha")
@run_options
@data_option
@teacher_option
@click.option(
    "--alphas",
    default=None,
    help="Comma-separated alpha values (default: alpha_sweep of the config).",
)
@domain_errors
@logged_command
def sweep_alpha(
    config_path: Optional[Path],
    seed: Optional[int],
    alpha: Optional[float],
    num_passes: Optional[int],
    out_dir: Optional[Path],
    data_dir: Optional[Path],
    teacher_path: Optional[Path],
    alphas: Optional[str],
) -> None:
    """Train one student per alpha and report validation Dice."""
    config = _resolve(
        config_path,
        seed,
        alpha,
        num_passes,
        out_dir,
        data_dir,
        alpha_sweep=parse_list(alphas, float),
    )
    teacher, payload = CheckpointService.load(
        _teacher_path(config, teacher_path), config.model
    )
    data = ExperimentService.load(config.paths.data_dir, config.model.num_classes)
    directory = config.paths.out_dir / "alpha_sweep"
    write_run_config(config, directory)
    with command_log_file(directory, "sweep-alpha"):
        sweep, best = ExperimentService.sweep_alpha(
            config,
            teacher,
            data,
            out_dir=directory,
            teacher_checkpoint_id=payload["checkpoint_id"],
        )
    sweep.to_csv(directory / ALPHA_SWEEP_FILENAME, index=False)
    click.echo(f"Best alpha: {best:g} ({directory / ALPHA_SWEEP_FILENAME})")


@router.command("compare-methods")
@run_options
@click.option(
    "--data",
    "data_dir",
    type=click.Path(file_okay=False, path_type=Path),
    default=None,
    help="Dataset directory; without it a synthetic corpus is drawn per seed.",
)
@click.option(
    "--seeds",
    default=None,
    help="Comma-separated seeds (default: comparison_seeds of the config).",
)
@domain_errors
@logged_command
def compare_methods(
    config_path: Optional[Path],
    seed: Optional[int],
    alpha: Optional[float],
    num_passes: Optional[int],
    out_dir: Optional[Path],
    data_dir: Optional[Path],
    seeds: Optional[str],
) -> None:
    """Teacher, U-SLS, Plain-SLS and labeled-only students over several seeds."""
    config = _resolve(
        config_path,
        seed,
        alpha,
        num_passes,
        out_dir,
        data_dir,
        comparison_seeds=parse_list(seeds, int),
    )
    data = None
    if data_dir is not None:
        data = ExperimentService.load(data_dir, config.model.num_classes)
    directory = config.paths.out_dir / "comparison"
    write_run_config(config, directory)
    with command_log_file(directory, "compare-methods"):
        results, summary = ExperimentService.compare_methods(
            config, data=data, out_dir=directory
        )
    results.to_csv(directory / COMPARISON_FILENAME, index=False)
    summary.to_csv(directory / COMPARISON_SUMMARY_FILENAME, index=False)
    click.echo(summary.to_string(index=False))
