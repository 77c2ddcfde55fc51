"""
base_path.py - Centralized path resolution: repo root, default config, data directory.
"""

import os

from settings import DATA_DIR_ENVS

BASE_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIG_FILE = os.path.join(BASE_DIR, "config.json")
VERSION_FILE = os.path.join(BASE_DIR, "version.txt")
DEFAULT_DATA_DIR = os.path.join(BASE_DIR, "data_files")


def resolve_data_dir(explicit=None, configured=None):
    """Dataset directory: explicit flag > $QUMOS_DATA_DIR > $SPLITQ_DATA_DIR > config value
    > <root>/data_files."""
    env = [os.environ.get(name) for name in DATA_DIR_ENVS]
    for candidate in (explicit, *env, configured):
        if candidate:
            return os.path.abspath(os.path.expanduser(candidate))
    return DEFAULT_DATA_DIR


def read_version():
    try:
        with open(VERSION_FILE, "r", encoding="utf-8") as f:
            return f.read().strip() or "0.0.0"
    except OSError:
        return "0.0.0"
