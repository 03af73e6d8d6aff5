"""Logging configuration for the coseg pipeline."""

import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path

LOGGER_NAME = "coseg"
_DATEFMT = "%Y-%m-%dT%H:%M:%S"


def setup_logging(log_dir: Path | None = None, verbosity: str = "INFO") -> logging.Logger:
    """Configure the coseg logger: stderr always, rotating file when log_dir is given.

    Results never go through the logger, so stdout stays free for command output.
    """
    logger = logging.getLogger(LOGGER_NAME)
    logger.setLevel(_parse_level(verbosity))

    if logger.handlers:
        return logger

    formatter = logging.Formatter(
        "[%(asctime)s] %(levelname)s - %(message)s",
        datefmt=_DATEFMT,
    )

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if log_dir is not None:
        log_dir.mkdir(parents=True, exist_ok=True)
        file_handler = RotatingFileHandler(
            log_dir / "coseg.log",
            maxBytes=1_000_000,
            backupCount=5,
        )
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    return logger


def add_run_handler(logger: logging.Logger, output_dir: Path) -> logging.FileHandler:
    """Add a run-specific file handler writing run.log into the output directory.

    Args:
        logger: The logger to add the handler to
        output_dir: Existing output directory of the run

    Returns:
        The created FileHandler so caller can remove it later

    Raises:
        ValueError: If output_dir does not exist
    """
    if not output_dir.exists():
        raise ValueError(f"Output directory does not exist: {output_dir}")

    run_name = output_dir.name
    formatter = logging.Formatter(
        f"[%(asctime)s] %(levelname)s - [{run_name}] %(message)s",
        datefmt=_DATEFMT,
    )

    handler = logging.FileHandler(output_dir / "run.log")
    handler.setFormatter(formatter)
    logger.addHandler(handler)

    return handler


def _parse_level(verbosity: str) -> int:
    level = logging.getLevelName(verbosity.upper())
    if not isinstance(level, int):
        raise ValueError(f"Unknown log level: {verbosity}")
    return level
