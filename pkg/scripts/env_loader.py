#!/usr/bin/env python3
"""
Environment Loader Utility

This module loads environment variables from a .env file in the project root
directory with python-dotenv. The experiment runner reads its defaults
(seed, worker count, output directory, log level, state cap, grid exponent)
through these helpers.

Usage:
    from env_loader import load_env_from_base, get_env_int
    load_env_from_base()
    seed = get_env_int("FRACTAL_LAB_SEED", 0)
"""

import os
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv


def load_env_from_base(base_dir: Optional[Path] = None, verbose: bool = False) -> bool:
    """
    Load environment variables from the .env file in the project root directory.

    Variables already present in the process environment are not overridden.

    Args:
        base_dir (Path): Directory holding the .env file. Defaults to the parent
            of the scripts folder.
        verbose (bool): Print where the variables came from.

    Returns:
        True if a .env file was found and loaded.
    """
    # Get the project root directory (parent of scripts folder)
    base_dir = Path(__file__).parent.parent if base_dir is None else Path(base_dir)
    env_file = base_dir / ".env"

    if env_file.exists():
        if verbose:
            print(f"📁 Loading environment from: {env_file}")
        load_dotenv(env_file, override=False)
        return True

    if verbose:
        print(f"⚠️  No .env file found at: {env_file}")
        print("   You can copy env.sample to .env to change the defaults")
    return False


def get_env_var(key, default=None, required=False):
    """
    Get an environment variable with optional validation.

    Args:
        key (str): The environment variable name
        default: Default value if not found
        required (bool): If True, raises an error if the variable is not set

    Returns:
        The environment variable value or default

    Raises:
        ValueError: If required=True and the variable is not set
    """
    value = os.getenv(key, default)

    if required and not value:
        raise ValueError(f"Required environment variable '{key}' is not set")

    return value


def get_env_int(key: str, default: Optional[int] = None) -> Optional[int]:
    """Integer environment variable; raises ValueError on a non-integer value."""
    value = get_env_var(key)
    if value is None or value == "":
        return default
    try:
        return int(value)
    except ValueError:
        raise ValueError(f"Environment variable '{key}' must be an integer, got {value!r}") from None


def get_env_float(key: str, default: Optional[float] = None) -> Optional[float]:
    """Float environment variable; raises ValueError on a non-numeric value."""
    value = get_env_var(key)
    if value is None or value == "":
        return default
    try:
        return float(value)
    except ValueError:
        raise ValueError(f"Environment variable '{key}' must be a number, got {value!r}") from None


if __name__ == "__main__":
    print("🧪 Testing Environment Loader")
    print("=" * 40)
    load_env_from_base(verbose=True)

    print("\n🔍 Experiment defaults:")
    for var in ["FRACTAL_LAB_SEED", "FRACTAL_LAB_WORKERS", "FRACTAL_LAB_OUT", "FRACTAL_LAB_LOG_LEVEL"]:
        print(f"  {var}: {get_env_var(var) or 'Not set'}")
