"""Structured logging for the porous-medium lab.

Events are JSON lines on standard error; result data only ever goes to files.
"""

import logging
import sys

import numpy as np
import structlog

_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def _json_default(obj):
    # numpy scalars and small arrays show up in solver and scan events
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return repr(obj)


def setup_logging(log_level: str = "INFO") -> None:
    level = log_level.upper()
    if level not in _LEVELS:
        raise ValueError(f"unknown log level {log_level!r}")

    logging.basicConfig(
        format="%(message)s",
        stream=sys.stderr,
        level=getattr(logging, level),
        force=True,
    )

    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.stdlib.PositionalArgumentsFormatter(),
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            structlog.processors.UnicodeDecoder(),
            structlog.processors.JSONRenderer(sort_keys=True, default=_json_default),
        ],
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )


def get_logger(name: str = __name__):
    return structlog.get_logger(name)


def run_logger(name: str, scenario: str, n_cells: int, tau: float):
    """Logger bound to one (scenario, N, tau) run."""
    return get_logger(name).bind(scenario=scenario, n_cells=int(n_cells), tau=float(tau))
