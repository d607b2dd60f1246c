"""
Report and array export helpers.

Binary dumps are a single JSON header line followed by a flat
little-endian float64 payload in row-major order.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def to_jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays and tuples into plain JSON types."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        if np.isnan(v):
            return "nan"
        if np.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(value, complex) or isinstance(value, np.complexfloating):
        return {"re": float(np.real(value)), "im": float(np.imag(value))}
    return value


def write_json_report(path: PathLike, data: Dict[str, Any]) -> Path:
    """Write a JSON report with sorted keys (byte-stable for equal input)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_jsonable(data), fh, indent=2, sort_keys=True)
        fh.write("\n")
    logger.info(f"Wrote report {path}")
    return path


def write_binary(path: PathLike, header: Dict[str, Any], payload: np.ndarray) -> Path:
    """
    Write header + little-endian float64 payload.

    Args:
        path: Output file
        header: JSON-serializable header; shape and dtype are added
        payload: Array written in C order

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.ascontiguousarray(payload, dtype="<f8")
    header = dict(header)
    header["payload_shape"] = list(data.shape)
    header["dtype"] = "<f8"
    with open(path, "wb") as fh:
        fh.write(json.dumps(to_jsonable(header), sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(data.tobytes(order="C"))
    logger.debug(f"Wrote {data.size} float64 values to {path}")
    return path


def read_binary(path: PathLike) -> Tuple[Dict[str, Any], np.ndarray]:
    """Read a file written by write_binary."""
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        raw = fh.read()
    data = np.frombuffer(raw, dtype="<f8").reshape(header["payload_shape"])
    return header, data.copy()


def write_columns(path: PathLike, columns: Dict[str, np.ndarray]) -> Path:
    """Write a gnuplot-friendly whitespace table with a commented header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(columns)
    table = np.column_stack([np.asarray(columns[n], dtype=float).ravel() for n in names]) if names else np.empty((0, 0))
    np.savetxt(path, table, header=" ".join(names), fmt="%.17g")
    return path
