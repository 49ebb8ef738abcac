"""
This module provides the small utilities shared across the ttl_agent package:
- Resolving the master seed (with the `TTL_SEED` environment override) and
  deriving reproducible child seeds for maps, agents and independent runs.
- Reading and writing UTF-8 text files with readable errors.
- Aggregating per-run means into the mean/std pairs reported by the harness.
"""

import logging
import os
import zlib
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

SEED_ENV_VAR = "TTL_SEED"


def resolve_master_seed(default=0):
    """
    Returns the master seed for an experiment, honouring the `TTL_SEED`
    environment variable when it is set.

    Args:
        default (int): Seed used when `TTL_SEED` is unset or empty.

    Returns:
        int: The master seed.

    Raises:
        ValueError: If `TTL_SEED` is set to something that is not an integer.
    """
    raw = os.environ.get(SEED_ENV_VAR, "").strip()
    if not raw:
        return int(default)
    try:
        seed = int(raw)
    except ValueError:
        raise ValueError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}")
    logger.info("Master seed overridden by %s=%d", SEED_ENV_VAR, seed)
    return seed


def _key_to_int(key):
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFF
    return zlib.crc32(str(key).encode("utf-8"))


def derive_seed(master_seed, *keys):
    """
    Derives a child seed from a master seed and any number of keys
    (strings or integers). The same inputs always give the same seed,
    so agents compared on the same keys see the same maps.

    Args:
        master_seed (int): The experiment's master seed.
        *keys: Labels such as an experiment name, run index or map index.

    Returns:
        int: A non-negative 32-bit seed.
    """
    entropy = [int(master_seed) & 0xFFFFFFFF] + [_key_to_int(k) for k in keys]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def read_text_file(path):
    """
    Reads a UTF-8 text file.

    Raises:
        ValueError: If the file does not exist.
    """
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ValueError(f"Input file not found at: {path}")


def write_text_file(path, text):
    """
    Writes `text` to `path` as UTF-8, making sure the file ends with a newline
    and creating parent directories as needed.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not text.endswith("\n"):
        text += "\n"
    path.write_text(text, encoding="utf-8")
    logger.debug("Wrote %d characters to %s", len(text), path)
    return path


def mean_and_std_across_runs(run_means):
    """
    Aggregates one mean per independent run into the (mean, std) pair reported
    in result rows. The std is the population std of the run means.

    Args:
        run_means (sequence of float): One value per independent run.

    Returns:
        tuple: (mean, std) as floats; std is 0.0 for a single run.
    """
    values = np.asarray(run_means, dtype=float)
    if values.size == 0:
        raise ValueError("At least one run is required to aggregate results.")
    return float(values.mean()), float(values.std())
