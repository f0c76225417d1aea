"""Deterministic parallel execution of Monte-Carlo trials."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from allianceauth.services.hooks import get_extension_logger
from app_utils.helpers import chunks
from app_utils.logging import LoggerAddTag

from isaclimits import __title__
from isaclimits.app_settings import ISAC_TRIAL_CHUNK_SIZE, isac_threads
from isaclimits.exceptions import ConfigError

logger = LoggerAddTag(get_extension_logger(__name__), __title__)


@dataclass(frozen=True)
class MonteCarloEstimate:
    """Sample mean of a Monte-Carlo quantity with its standard error."""

    value: float
    std_error: float
    trials: int

    @classmethod
    def from_samples(cls, samples: np.ndarray) -> "MonteCarloEstimate":
        """Create from per-trial samples."""
        samples = np.asarray(samples, dtype=float)
        trials = samples.shape[0]
        if trials < 1:
            raise ConfigError("At least one trial is required")
        std_error = (
            float(np.std(samples, ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
        )
        return cls(value=float(np.mean(samples)), std_error=std_error, trials=trials)


def resolve_threads(threads: Optional[int] = None) -> int:
    """Return the thread count, from the argument or the environment."""
    if threads is not None:
        if threads < 1:
            raise ConfigError(f"threads must be at least 1, got: {threads}")
        return threads
    try:
        return isac_threads()
    except ValueError as ex:
        raise ConfigError(str(ex)) from None


def run_chunked(
    chunk_fn: Callable[[Sequence[int]], np.ndarray],
    trials: int,
    threads: Optional[int] = None,
) -> np.ndarray:
    """Evaluate ``chunk_fn`` over all trial indices and concatenate in index order.

    Chunk boundaries depend only on ``ISAC_TRIAL_CHUNK_SIZE``, so the
    result is identical for every thread count.
    """
    if trials < 1:
        raise ConfigError(f"trials must be at least 1, got: {trials}")
    work = list(chunks(list(range(trials)), ISAC_TRIAL_CHUNK_SIZE))
    threads = min(resolve_threads(threads), len(work))
    logger.debug("Running %d trials in %d chunks on %d threads", trials, len(work), threads)
    if threads == 1:
        parts = [chunk_fn(chunk) for chunk in work]
    else:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            parts = list(executor.map(chunk_fn, work))
    return np.concatenate(parts, axis=0)
