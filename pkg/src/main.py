import os

import torch
from loguru import logger

from src.configs.env import Config
from src.configs.loguru import logger_config
from src.entrypoints import cli


def main() -> None:
    """Entrypoint of the application."""
    logger.configure(**logger_config())
    torch.set_num_threads(Config.NUM_THREADS)
    if Config.DETERMINISTIC:
        os.environ.setdefault("CUBLAS_WORKSPACE_CONFIG", ":4096:8")
        torch.use_deterministic_algorithms(True, warn_only=True)
    cli()


if __name__ == "__main__":
    main()
