"""
Plain (P2) PGM export of encoded images and saliency maps.
"""

from pathlib import Path
from typing import Union

import numpy as np

from probewatch.errors import ArgumentError, InvalidInputError

PathLike = Union[str, Path]


def to_pgm(image, maxval: int = 255) -> str:
    """
    Renders a 2-D array as P2 text, scaling its range linearly onto ``0..maxval``.

    A constant image renders as all zeros.
    """
    image = np.asarray(image, dtype=float)
    if image.ndim != 2:
        raise ArgumentError(f"expected a 2-D image, got shape {image.shape}")
    lo, hi = float(np.min(image)), float(np.max(image))
    if hi > lo:
        levels = np.rint((image - lo) / (hi - lo) * maxval).astype(np.int64)
    else:
        levels = np.zeros(image.shape, dtype=np.int64)
    height, width = image.shape
    lines = ["P2", f"{width} {height}", str(maxval)]
    lines.extend(" ".join(str(v) for v in row) for row in levels)
    return "\n".join(lines) + "\n"


def write_pgm(image, path: PathLike, maxval: int = 255) -> Path:
    path = Path(path)
    path.write_text(to_pgm(image, maxval), encoding="ascii")
    return path


def read_pgm(source: Union[PathLike, str]) -> np.ndarray:
    """
    Reads P2 text (or a file holding it) back into an integer array.

    Raises:
        InvalidInputError: If the text is not a well-formed P2 image.
    """
    if isinstance(source, str) and source.startswith("P2"):
        text = source
    else:
        text = Path(source).read_text()
    tokens = [t for line in text.splitlines() for t in line.split("#", 1)[0].split()]
    if not tokens or tokens[0] != "P2":
        raise InvalidInputError("not a plain PGM (P2) image")
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
        values = np.array([int(t) for t in tokens[4:]], dtype=np.int64)
    except ValueError as e:
        raise InvalidInputError(f"malformed PGM: {e}") from e
    if len(values) != width * height or np.any(values < 0) or np.any(values > maxval):
        raise InvalidInputError("PGM pixel data does not match its header")
    return values.reshape(height, width)
