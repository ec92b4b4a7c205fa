"""
Shared helpers: error types, logging setup, dB conversion and timing
"""
import logging
import time
from typing import Optional

import numpy as np


DB_FLOOR = -120.0


class InvalidArgumentError(ValueError):
    """Raised when an operation receives arguments outside its contract"""


class ConfigError(ValueError):
    """Raised for malformed configuration or unreadable input files"""


class SolverFailure(RuntimeError):
    """Raised when a conic subproblem ends without an optimal solution"""


def configure_logging(level: str = "INFO", log_file: Optional[str] = None) -> None:
    """Install root handlers from the [logging] config section"""
    handlers = [logging.StreamHandler()]
    if log_file:
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        handlers=handlers,
        force=True,
    )


def to_db(magnitude: np.ndarray) -> np.ndarray:
    """20*log10(|P|) with zero magnitudes pinned to the -120 dB floor"""
    magnitude = np.abs(np.asarray(magnitude, dtype=float))
    out = np.full(magnitude.shape, DB_FLOOR)
    nonzero = magnitude > 0
    out[nonzero] = np.maximum(20.0 * np.log10(magnitude[nonzero]), DB_FLOOR)
    return out


class Stopwatch:
    """Monotonic wall-clock timer used around solve phases"""

    def __init__(self):
        self.elapsed = 0.0
        self._start: Optional[float] = None

    def __enter__(self) -> "Stopwatch":
        self._start = time.monotonic()
        return self

    def __exit__(self, *exc) -> None:
        self.elapsed += time.monotonic() - self._start
        self._start = None
