import sys
from pathlib import Path

from src.configs.env import Config
from src.middleware.run_logger import RUN_UUID

LEVEL_COLOURS = {
    "DEBUG": "blue",
    "INFO": "white",
    "WARNING": "yellow",
    "ERROR": "red",
}
LEVEL_ORDER = ["DEBUG", "INFO", "WARNING", "ERROR"]
FILE_FORMAT = "{time} | {level} | {name}:{function}:{line} | {extra[run_uuid]} | {message}"  # noqa


def add_run_uuid(record):
    record["extra"]["run_uuid"] = RUN_UUID.get()


def _level_filter(level_name: str):
    return lambda record: record["level"].name == level_name


def _enabled_levels(level: str) -> list[str]:
    level = level.upper()
    if level not in LEVEL_ORDER:
        return LEVEL_ORDER[1:]
    return LEVEL_ORDER[LEVEL_ORDER.index(level) :]


def file_handler(log_file: Path, level: str | None = None) -> dict:
    """Plain (uncoloured) sink writing every enabled level to `log_file`."""
    return {
        "sink": str(log_file),
        "format": FILE_FORMAT,
        "serialize": False,
        "level": _enabled_levels(level or Config.LOG_LEVEL)[0],
        "colorize": False,
    }


def logger_config(log_file: Path | None = None, level: str | None = None) -> dict:
    """
    Keyword arguments for `logger.configure`: one coloured stdout handler per
    level plus, when `log_file` is given, a plain file sink.
    """
    level = level or Config.LOG_LEVEL
    handlers = []
    for level_name in _enabled_levels(level):
        colour = LEVEL_COLOURS[level_name]
        handlers.append(
            {
                "sink": sys.stdout,
                "format": f"<green>{{time}}</green> | <{colour}>{{level}}</{colour}> | <cyan>{{name}}<white>:</white>{{function}}<white>:</white>{{line}}</cyan> | <magenta>{{extra[run_uuid]}}</magenta> | <{colour}>{{message}}</{colour}>",  # noqa
                "serialize": False,
                "level": level_name,
                "filter": _level_filter(level_name),
            }
        )
    if log_file is not None:
        handlers.append(file_handler(log_file, level))
    return {
        "handlers": handlers,
        "patcher": add_run_uuid,
    }
