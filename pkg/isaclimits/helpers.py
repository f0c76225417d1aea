"""Helpers for isaclimits."""

import csv
import hashlib
import json
import subprocess
from enum import Enum
from functools import lru_cache
from numbers import Integral, Real
from pathlib import Path
from typing import Any, Iterable, List

from . import __version__
from .app_settings import ISAC_CSV_SIGNIFICANT_DIGITS


def store_json(data, path) -> Path:
    """Store data as JSON in a file."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as file:
        json.dump(data, file, indent=4, sort_keys=True)
        file.write("\n")
    return path


def format_value(value: Any, digits: int = None) -> str:
    """Format a CSV cell. Floats get a fixed number of significant digits."""
    digits = ISAC_CSV_SIGNIFICANT_DIGITS if digits is None else digits
    if isinstance(value, bool) or value is None:
        return str(value)
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, Integral):
        return str(int(value))
    if isinstance(value, Real):
        return format(float(value), f".{digits}g")
    return str(value)


def write_csv(path, header: List[str], rows: Iterable[Iterable[Any]]) -> Path:
    """Write a CSV file with a header row and return its path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(value) for value in row])
    return path


def params_hash(params: dict) -> str:
    """Calculate a hash of parameters in order to identify identical runs."""
    data = json.dumps(params, sort_keys=True)
    return hashlib.md5(data.encode("utf-8")).hexdigest()


@lru_cache(maxsize=None)
def version_string() -> str:
    """Return a git-describe style version, falling back to the package version."""
    try:
        result = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
            check=True,
        )
    except (OSError, subprocess.SubprocessError):
        return f"v{__version__}"
    described = result.stdout.strip()
    return described or f"v{__version__}"
