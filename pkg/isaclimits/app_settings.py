"""Settings for isaclimits."""

import logging
import os

from app_utils.app_settings import clean_setting

logger = logging.getLogger(__name__)


# ============================================================================
# Experiment Defaults
# ============================================================================

ISAC_DEFAULT_SEED = clean_setting("ISAC_DEFAULT_SEED", 20240101, min_value=0)
"""Master seed used when neither the config file nor ``--seed`` provides one.

Default: 20240101
"""

ISAC_DEFAULT_TRIALS = clean_setting("ISAC_DEFAULT_TRIALS", 1000, min_value=1)
"""Number of Monte-Carlo trials when none is given.

Default: 1000
"""


# ============================================================================
# Parallel Execution
# ============================================================================

ISAC_MAX_THREADS = clean_setting("ISAC_MAX_THREADS", 4, min_value=1)
"""Worker threads for Monte-Carlo loops.

The environment variable ``ISAC_THREADS`` overrides this value at call time.

Default: 4
"""

ISAC_TRIAL_CHUNK_SIZE = clean_setting("ISAC_TRIAL_CHUNK_SIZE", 64, min_value=1)
"""Trials per work unit.

Chunks do not depend on the thread count, which keeps results
bit-identical for any value of ``ISAC_THREADS``.

Default: 64
"""


# ============================================================================
# Region Sweeps
# ============================================================================

ISAC_REGION_GRID_POINTS = clean_setting("ISAC_REGION_GRID_POINTS", 51, min_value=3)
"""Number of evenly spaced communication allocations per region curve.

Default: 51
"""

ISAC_SATURATION_FRACTION = clean_setting(
    "ISAC_SATURATION_FRACTION", default_value=0.1, min_value=0.0, max_value=0.5
)
"""Normalized exchange rate below which a segment counts as saturated.

Default: 0.1
Range: 0.0 to 0.5 (exclusive)
"""


# ============================================================================
# Numerics and Output
# ============================================================================

ISAC_CSV_SIGNIFICANT_DIGITS = clean_setting(
    "ISAC_CSV_SIGNIFICANT_DIGITS", 12, min_value=1, max_value=17
)
"""Significant digits for floats written to CSV.

Default: 12
"""

ISAC_EIGEN_CUTOFF = clean_setting(
    "ISAC_EIGEN_CUTOFF", default_value=1e-12, min_value=0.0, max_value=1e-3
)
"""Relative cutoff below which eigenvalues of a PSD matrix are treated as zero.

Default: 1e-12
"""

ISAC_ILL_CONDITION_LIMIT = clean_setting(
    "ISAC_ILL_CONDITION_LIMIT", default_value=1e12, min_value=1.0
)
"""Condition number above which the LMMSE oracle attaches a warning.

Default: 1e12
"""


def isac_threads() -> int:
    """Return the number of worker threads to use.

    Reads the ``ISAC_THREADS`` environment variable on every call,
    falling back to ``ISAC_MAX_THREADS``.

    Raises:
        ValueError: If ``ISAC_THREADS`` is not a positive integer
    """
    raw = os.environ.get("ISAC_THREADS")
    if raw is None or raw.strip() == "":
        return ISAC_MAX_THREADS
    try:
        threads = int(raw)
    except ValueError:
        raise ValueError(f"ISAC_THREADS must be an integer, got: {raw!r}")
    if threads < 1:
        raise ValueError(f"ISAC_THREADS must be at least 1, got: {threads}")
    return threads


# ============================================================================
# Settings Validation
# ============================================================================


def validate_settings():
    """Validate app settings.

    Raises:
        ValueError: If any setting is invalid
    """
    if not 0.0 < ISAC_SATURATION_FRACTION < 0.5:
        raise ValueError("ISAC_SATURATION_FRACTION must be between 0.0 and 0.5")

    if ISAC_EIGEN_CUTOFF <= 0.0:
        raise ValueError("ISAC_EIGEN_CUTOFF must be greater than 0")

    logger.info("All isaclimits settings validated successfully")


# Run validation on import
try:
    validate_settings()
except ValueError as ex:
    logger.exception("Settings validation failed: %s", ex)
    raise
