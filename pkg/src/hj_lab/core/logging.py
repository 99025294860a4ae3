"""
Logging setup for the command line entry points.
"""
from __future__ import annotations

import logging

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: str = "INFO") -> None:
    root = logging.getLogger("hj_lab")
    if not any(getattr(handler, "_hj_lab", False) for handler in root.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._hj_lab = True  # type: ignore[attr-defined]
        root.addHandler(handler)
    root.setLevel(level.upper())
