"""
Process environment configuration.

Everything here is optional; run-level settings live in the YAML run
configuration (see `src.schemas.run_schema`).
"""

import os


class Config:
    """Base configuration."""

    ENVIRONMENT = os.getenv("ENVIRONMENT", "DEV")
    DEBUG = ENVIRONMENT == "DEV"
    TESTING = ENVIRONMENT == "TEST"

    LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")

    DEVICE = os.getenv("DEVICE", "cpu")
    NUM_THREADS = int(os.getenv("NUM_THREADS", "1"))
    DETERMINISTIC = os.getenv("DETERMINISTIC", "true").lower() == "true"
