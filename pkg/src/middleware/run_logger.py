import contextvars
import functools
import time
from typing import Any, Callable
from uuid import uuid4

from loguru import logger

RUN_UUID = contextvars.ContextVar("run_uuid", default=None)


def logged_command(command: Callable[..., Any]) -> Callable[..., Any]:
    """
    Wrap a command callback so every run gets its own UUID in the logs,
    a start line with its parameters and a completion line with the elapsed
    wall-clock time.
    """

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        token = RUN_UUID.set(uuid4())
        params = {key: value for key, value in kwargs.items() if value is not None}
        logger.warning(f"Start command={command.__name__}; params={params}")
        start_time = time.time()
        try:
            result = command(*args, **kwargs)
            process_time = (time.time() - start_time) * 1000
            formatted_process_time = "{0:.2f}".format(process_time)
            logger.warning(
                f"Command {command.__name__} completed in {formatted_process_time}ms"
            )
            return result
        except Exception as error:
            process_time = (time.time() - start_time) * 1000
            logger.error(
                f"Command {command.__name__} failed after {process_time:.2f}ms; "
                f"error={error!r}"
            )
            raise
        finally:
            RUN_UUID.reset(token)

    return wrapper
