from pathlib import Path
from typing import Optional

import click

from src.entrypoints.common import domain_errors, run_options, write_run_config
from src.middleware.run_logger import logged_command
from src.schemas.run_schema import resolve_run_config
from src.services.experiment_service import ExperimentService


@click.group()
def router() -> None:
    """Dataset commands."""


@router.command("synth-data")
@run_options
@click.option("--n-labeled", type=int, default=None, help="Labeled training images.")
@click.option("--n-validation", type=int, default=None, help="Validation images.")
@click.option("--n-unlabeled", type=int, default=None, help="Unlabeled images.")
@click.option("--n-test", type=int, default=None, help="Test images.")
@click.option(
    "--with-boundaries",
    is_flag=True,
    default=False,
    help="Also export each labeled image's layer boundaries as CSV.",
)
@domain_errors
@logged_command
def synth_data(
    config_path: Optional[Path],
    seed: Optional[int],
    alpha: Optional[float],
    num_passes: Optional[int],
    out_dir: Optional[Path],
    n_labeled: Optional[int],
    n_validation: Optional[int],
    n_unlabeled: Optional[int],
    n_test: Optional[int],
    with_boundaries: bool,
) -> None:
    """
    Write a synthetic layered-image dataset (train, validation, test and
    unlabeled splits plus manifest) to --out, or to paths.data_dir.
    """
    config = resolve_run_config(
        config_path,
        seed,
        alpha,
        num_passes,
        extra={
            "dataset.n_labeled": n_labeled,
            "dataset.n_validation": n_validation,
            "dataset.n_unlabeled": n_unlabeled,
            "dataset.n_test": n_test,
            "paths.data_dir": None if out_dir is None else str(out_dir),
        },
    )
    directory = config.paths.data_dir
    data = ExperimentService.synthesize(config)
    manifest = ExperimentService.write(directory, data, config, with_boundaries)
    write_run_config(config, directory)
    click.echo(f"Dataset manifest: {manifest}")
