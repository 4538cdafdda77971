"""
CSV output for every table the simulator produces.

Floats are written with their shortest round-trip representation, so a
reloaded table reproduces the values exactly.
"""

import logging
import os
from pathlib import Path
from typing import Union

import pandas as pd

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def ensure_parent(path: PathLike) -> Path:
    """Create the parent directory of ``path`` if needed."""
    target = Path(path)
    if target.parent and not target.parent.exists():
        os.makedirs(target.parent, exist_ok=True)
        logger.debug(f"Created directory: {target.parent}")
    return target


def write_csv(frame: pd.DataFrame, path: PathLike) -> Path:
    """
    Write a table without its index.

    Args:
        frame: Table with its final column order
        path: Destination file

    Returns:
        The written path
    """
    target = ensure_parent(path)
    frame.to_csv(target, index=False, lineterminator="\n")
    logger.info(f"Saved {len(frame)} rows to: {target}")
    return target


def companion_path(figure_path: PathLike, suffix: str = "") -> Path:
    """``drop.svg`` -> ``drop.csv``; with a suffix, ``drop<suffix>.csv``."""
    figure = Path(figure_path)
    return figure.with_name(f"{figure.stem}{suffix}.csv")


def write_text(text: str, path: PathLike) -> Path:
    target = ensure_parent(path)
    with open(target, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    logger.info(f"Saved figure to: {target}")
    return target
