"""
Utilities shared across the probewatch pipeline.
"""

import json
import math
import re
from pathlib import Path
from typing import Any, BinaryIO, Union

import numpy as np
import requests

Source = Union[str, Path, bytes, BinaryIO]

_FLOAT_MARK = "\x00f17:"
_FLOAT_TOKEN = re.compile(r'"\\u0000f17:([^"]*)"')


def format_float(value: float) -> str:
    """
    Renders a float with 17 significant digits.

    Non-finite values become ``inf``, ``-inf`` and ``nan``.

    Args:
        value (float): The value to render.

    Returns:
        str: The textual form.
    """
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    text = format(value, ".17g")
    if "e" not in text and "." not in text and "n" not in text:
        text += ".0"
    return text


def _to_jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(float(obj)):
            return format_float(obj)
        return _FLOAT_MARK + format_float(obj)
    if isinstance(obj, Path):
        return str(obj)
    if hasattr(obj, "to_dict"):
        return _to_jsonable(obj.to_dict())
    return obj


def dump_json(obj: Any, indent: int = 2) -> str:
    """
    Serializes an artifact to deterministic JSON text.

    Keys are sorted, finite floats carry 17 significant digits and non-finite
    floats are written as the strings ``"inf"``, ``"-inf"`` and ``"nan"``.
    Numpy scalars and arrays are converted, objects exposing ``to_dict`` are
    serialized through it.

    Args:
        obj (Any): The artifact to serialize.
        indent (int, optional): Indentation width. Defaults to 2.

    Returns:
        str: The JSON document, newline terminated.
    """
    text = json.dumps(_to_jsonable(obj), sort_keys=True, indent=indent)
    return _FLOAT_TOKEN.sub(r"\1", text) + "\n"


def write_json(path: Union[str, Path], obj: Any) -> Path:
    """
    Writes ``dump_json(obj)`` to a file, creating parent directories.

    Returns:
        Path: The written path.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_json(obj), encoding="utf-8", newline="\n")
    return path


def parse_float(value: Any) -> float:
    """Inverse of ``format_float`` for values read back from JSON."""
    return float(value)


def read_json(source: Source) -> Any:
    return json.loads(read_source(source).decode("utf-8"))


def read_source(source: Source) -> bytes:
    """
    Reads raw bytes from a URL, a local file path, raw bytes or a file handle.

    Args:
        source (Source): An ``http(s)://`` URL, a path, a bytes object or a binary handle.

    Returns:
        bytes: The content.

    Raises:
        requests.HTTPError: If the remote server returns an error response.
    """
    if isinstance(source, (bytes, bytearray)):
        return bytes(source)
    if isinstance(source, Path):
        return _read_file(source)
    if isinstance(source, str):
        if source.startswith("http"):
            return _read_url(source)
        return _read_file(source)
    return _read_handle(source)


def _read_url(url: str) -> bytes:
    response = requests.get(url, timeout=60)
    response.raise_for_status()
    return response.content


def _read_file(path: Union[str, Path]) -> bytes:
    with open(path, "rb") as f:
        return f.read()


def _read_handle(handle: BinaryIO) -> bytes:
    data = handle.read()
    if isinstance(data, str):
        return data.encode("utf-8")
    return data
