"""
Shared utility functions
"""
import hashlib
import json
import logging
import os
import sys
from typing import Any, Optional

import colorama
import numpy as np

from config.settings import DEFAULT_SEED, SEED_ENV_VAR


def save_json(path: str, data: Any, indent: Optional[int] = 2):
    """
    Save data to a JSON file with sorted keys so identical data gives identical bytes

    Args:
        path: Destination file
        data: JSON-serializable object
        indent: Indentation (None for compact output)
    """
    with open(path, 'w', encoding='utf-8') as f:
        f.write(canonical_json(data, indent=indent))
        f.write('\n')


def load_json(path: str) -> Any:
    """
    Load a JSON file

    Args:
        path: Path to JSON file

    Returns:
        Parsed JSON content
    """
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)


def canonical_json(data: Any, indent: Optional[int] = None) -> str:
    """Serialize with sorted keys and fixed separators"""
    separators = (',', ': ') if indent is not None else (',', ':')
    return json.dumps(data, sort_keys=True, indent=indent, separators=separators, ensure_ascii=False)


def sha256_hex(data: bytes) -> str:
    """Hex SHA-256 digest of a byte string"""
    return hashlib.sha256(data).hexdigest()


def file_digest(path: str) -> str:
    """Hex SHA-256 digest of a file's contents"""
    h = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 16), b''):
            h.update(chunk)
    return h.hexdigest()


def resolve_seed(flag_seed: Optional[int], config_seed: Optional[int] = None) -> int:
    """
    Resolve the run seed: command-line flag, then config file, then MARS_SEED, then the default

    Args:
        flag_seed: Seed given on the command line (or None)
        config_seed: Seed read from a config file (or None)

    Returns:
        Seed to use
    """
    if flag_seed is not None:
        return int(flag_seed)
    if config_seed is not None:
        return int(config_seed)
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed:
        try:
            return int(env_seed)
        except ValueError:
            logging.warning(f"Ignoring non-integer {SEED_ENV_VAR}={env_seed!r}")
    return DEFAULT_SEED


def derived_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for (seed, *keys), stable across runs and platforms"""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *[int(k) for k in keys]]))


def paint(text: str, color: str) -> str:
    """Color text for the terminal; plain text when stdout is not a TTY"""
    if not sys.stdout.isatty():
        return text
    return f"{color}{text}{colorama.Style.RESET_ALL}"


def print_banner(title: str, lines, color: str = colorama.Fore.CYAN, width: int = 58):
    """Print a boxed summary banner"""
    print(paint(f"╔{'═' * width}╗", color))
    print(paint("║", color) + f" {title}".ljust(width) + paint("║", color))
    print(paint(f"╠{'═' * width}╣", color))
    for line in lines:
        print(paint("║", color) + f" {line}".ljust(width) + paint("║", color))
    print(paint(f"╚{'═' * width}╝", color))
