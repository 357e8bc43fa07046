"""Colored console logging for the package."""

import logging
import os

import colorlog

ROOT_LOGGER = 'jl_robust'
LEVEL_ENV = 'JL_ROBUST_LOG_LEVEL'
LOG_FORMAT = '%(log_color)s%(levelname)-8s%(reset)s %(name)s: %(message)s'


def configure_logging(level: int | str | None = None) -> logging.Logger:
    """Install the colored handler on the package root logger.

    Repeated calls only adjust the level; the handler is installed once.

    Args:
        level (int | str | None, optional): Logging level. Falls back to the
            `JL_ROBUST_LOG_LEVEL` environment variable, then to WARNING.

    Returns:
        logging.Logger: The package root logger.
    """
    root = logging.getLogger(ROOT_LOGGER)
    if not any(getattr(h, '_jl_robust', False) for h in root.handlers):
        handler = colorlog.StreamHandler()
        handler.setFormatter(colorlog.ColoredFormatter(LOG_FORMAT))
        handler._jl_robust = True  # type: ignore[attr-defined]  # noqa: SLF001
        root.addHandler(handler)
        root.propagate = False

    if level is None:
        level = os.environ.get(LEVEL_ENV, 'WARNING')
    if isinstance(level, str):
        level = level.upper()
    root.setLevel(level)
    return root


def get_logger(name: str) -> logging.Logger:
    """Return a logger in the package hierarchy, configuring the root on first use."""
    root = logging.getLogger(ROOT_LOGGER)
    if not root.handlers:
        configure_logging()
    if not name.startswith(ROOT_LOGGER):
        name = f'{ROOT_LOGGER}.{name}'
    return logging.getLogger(name)
