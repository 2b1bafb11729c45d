"""
Utility Functions

Helper functions for file output, vector bounds and angle handling.
"""

import contextlib
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterator, Union

import numpy as np

PathLike = Union[str, Path]


@contextlib.contextmanager
def wrap_os_error(path: PathLike, action: str = "access") -> Iterator[None]:
    """
    Re-raise filesystem failures with the offending path in the message.

    Args:
        path: File or directory being touched
        action: Verb used in the message ("write", "read", ...)
    """
    try:
        yield
    except OSError as err:
        if str(path) in str(err):
            raise
        raise type(err)(err.errno, f"cannot {action} {path}: {err.strerror or err}") from err


def canonical_json(data: Any, indent: int = 2) -> str:
    """Serialize with sorted keys and a trailing newline; non-finite floats become null."""
    return json.dumps(_finite_or_none(data), indent=indent, sort_keys=True) + "\n"


def save_json_file(data: Any, filepath: PathLike, indent: int = 2) -> None:
    """
    Save data to JSON file in canonical form.

    Args:
        data: Object to save
        filepath: Path where to save the file
        indent: JSON indentation level
    """
    with wrap_os_error(filepath, "write"):
        with open(filepath, "w", encoding="utf-8", newline="\n") as f:
            f.write(canonical_json(data, indent=indent))


def ensure_directory(path: PathLike) -> Path:
    """Create a directory (and parents) if missing and return it as a Path."""
    directory = Path(path)
    with wrap_os_error(directory, "create"):
        directory.mkdir(parents=True, exist_ok=True)
    return directory


def clamp_vector(u: np.ndarray, u_max: float) -> np.ndarray:
    """Clip every component of u to [-u_max, u_max]."""
    return np.clip(u, -u_max, u_max)


def wrap_angles(q: np.ndarray) -> np.ndarray:
    """
    Wrap angles to the half-open interval (-pi, pi].

    Args:
        q: Array of angles in radians

    Returns:
        New array with every entry in (-pi, pi]
    """
    return np.pi - np.mod(np.pi - np.asarray(q, dtype=np.float64), 2.0 * np.pi)


def format_float(value: float) -> str:
    """Format a float with 6 significant digits."""
    return f"{value:.6g}"


def _finite_or_none(data: Any) -> Any:
    if isinstance(data, dict):
        return {str(k): _finite_or_none(v) for k, v in data.items()}
    if isinstance(data, (list, tuple)):
        return [_finite_or_none(v) for v in data]
    if isinstance(data, np.ndarray):
        return _finite_or_none(data.tolist())
    if isinstance(data, np.integer):
        return int(data)
    if isinstance(data, (float, np.floating)):
        value = float(data)
        return value if math.isfinite(value) else None
    return data
