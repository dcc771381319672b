"""Core logging configuration for djr-verifier."""
import logging
import sys
from typing import TextIO

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s - %(message)s"


def level_for(verbose: bool = False, quiet: bool = False) -> int:
    """Map the -v / -q flags to a logging level."""
    if verbose:
        return logging.DEBUG
    if quiet:
        return logging.WARNING
    return logging.INFO


def setup_logging(level: int = logging.INFO, stream: TextIO | None = None) -> None:
    """Configure the root logger.

    Records go to stderr unless ``stream`` is given, so that command output on
    stdout stays parseable.
    """
    logging.basicConfig(
        level=level,
        format=LOG_FORMAT,
        handlers=[logging.StreamHandler(stream or sys.stderr)],
        force=True,
    )
    # numpy / sympy stay quiet below WARNING even in debug runs
    for name in ("sympy", "numpy"):
        logging.getLogger(name).setLevel(max(level, logging.WARNING))
