import contextlib
import functools
from pathlib import Path
from typing import Any, Callable, Iterator, Optional

import click
from loguru import logger

from src.configs.loguru import add_run_uuid, file_handler
from src.exceptions.segmentation_exceptions import SegmentationError
from src.schemas.model_schema import ModelConfig
from src.schemas.run_schema import RUN_CONFIG_FILENAME, RunConfig


def run_options(command: Callable[..., Any]) -> Callable[..., Any]:
    """Flags shared by every command that resolves a RunConfig."""
    options = [
        click.option(
            "--config",
            "config_path",
            type=click.Path(exists=True, dir_okay=False, path_type=Path),
            default=None,
            help="YAML run configuration; flags override its values.",
        ),
        click.option("--seed", type=int, default=None, help="Seed for every RNG."),
        click.option(
            "--alpha",
            type=float,
            default=None,
            help="Confidence sharpness alpha in exp(-alpha * u).",
        ),
        click.option(
            "--num-passes",
            type=int,
            default=None,
            help="Number K of MC dropout passes.",
        ),
        click.option(
            "--out",
            "out_dir",
            type=click.Path(file_okay=False, path_type=Path),
            default=None,
            help="Output directory.",
        ),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def domain_errors(command: Callable[..., Any]) -> Callable[..., Any]:
    """Report domain errors as click errors: message on stderr, exit status 1."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except SegmentationError as error:
            raise click.ClickException(error.detail) from error

    return wrapper


def parse_list(value: Optional[str], cast: Callable[[str], Any]) -> Optional[list]:
    """'0,1,2' -> [0, 1, 2]; None stays None."""
    if value is None:
        return None
    try:
        return [cast(item) for item in value.split(",") if item.strip()]
    except ValueError as error:
        raise click.BadParameter(f"cannot parse {value!r}: {error}")


@contextlib.contextmanager
def command_log_file(directory: Path, command_name: str) -> Iterator[Path]:
    """Mirror the logs of one command into `<directory>/<command_name>.log`."""
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{command_name}.log"
    logger.configure(patcher=add_run_uuid)
    handler_id = logger.add(**file_handler(path))
    try:
        yield path
    finally:
        logger.remove(handler_id)


def write_run_config(config: RunConfig, directory: Path) -> Path:
    path = config.to_yaml(Path(directory) / RUN_CONFIG_FILENAME)
    logger.info(f"Recorded resolved configuration in {path}")
    return path


def adopt_model_config(config: RunConfig, model_cfg: ModelConfig) -> RunConfig:
    """Run configuration describing a model loaded from a checkpoint."""
    overrides: dict[str, Any] = {"model": model_cfg.model_dump()}
    if config.synth.num_classes != model_cfg.num_classes:
        synth = config.synth.model_dump(mode="json")
        synth.update(num_classes=model_cfg.num_classes, layer_intensity_means=None)
        overrides["synth"] = synth
    return config.with_overrides(overrides)
