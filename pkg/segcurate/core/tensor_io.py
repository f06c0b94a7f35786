"""
Tensor IO
Binary tensor containers: uint32 LE header length, JSON header, float32 LE payload
"""

import json
import logging
from collections import OrderedDict
from pathlib import Path
from typing import Dict, Iterable, Tuple, Union

import numpy as np

from segcurate.core.exceptions import DatasetFormatException, DatasetIOException

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
_FLOAT = np.dtype("<f4")
_HEADER_LEN = np.dtype("<u4")


def write_tensor_file(path: PathLike, header: dict,
                      tensors: Iterable[Tuple[str, np.ndarray]]) -> None:
    """Write named tensors in declaration order after a JSON header"""
    tensors = [(name, np.ascontiguousarray(array, dtype=_FLOAT)) for name, array in tensors]
    header = dict(header)
    header["tensors"] = [{"name": name, "shape": list(array.shape)} for name, array in tensors]
    encoded = json.dumps(header, sort_keys=True).encode("utf-8")

    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as handle:
            handle.write(np.array([len(encoded)], dtype=_HEADER_LEN).tobytes())
            handle.write(encoded)
            for _, array in tensors:
                handle.write(array.tobytes())
    except OSError as e:
        raise DatasetIOException(f"cannot write tensor file {path}: {e}") from e
    logger.debug(f"Wrote {len(tensors)} tensors to {path}")


def read_tensor_file(path: PathLike) -> Tuple[dict, Dict[str, np.ndarray]]:
    """Inverse of write_tensor_file; tensors come back as float64"""
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise DatasetIOException(f"cannot read tensor file {path}: {e}") from e

    if len(raw) < _HEADER_LEN.itemsize:
        raise DatasetFormatException("truncated tensor file", str(path))
    header_len = int(np.frombuffer(raw[:4], dtype=_HEADER_LEN)[0])
    try:
        header = json.loads(raw[4:4 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DatasetFormatException(f"bad tensor header: {e}", str(path)) from e

    tensors: Dict[str, np.ndarray] = OrderedDict()
    offset = 4 + header_len
    for entry in header.get("tensors", []):
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        end = offset + count * _FLOAT.itemsize
        if end > len(raw):
            raise DatasetFormatException(f"tensor '{entry['name']}' is truncated", str(path))
        tensors[entry["name"]] = np.frombuffer(raw[offset:end], dtype=_FLOAT).reshape(shape).astype(np.float64)
        offset = end
    if offset != len(raw):
        raise DatasetFormatException(f"{len(raw) - offset} trailing bytes after tensors", str(path))
    return header, tensors


def write_f32(path: PathLike, array: np.ndarray) -> None:
    """Flat little-endian float32 dump (shape lives in a sidecar index)"""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.ascontiguousarray(array, dtype=_FLOAT).tofile(path)
    except OSError as e:
        raise DatasetIOException(f"cannot write {path}: {e}") from e


def read_f32(path: PathLike, shape: Tuple[int, ...]) -> np.ndarray:
    try:
        flat = np.fromfile(path, dtype=_FLOAT)
    except OSError as e:
        raise DatasetIOException(f"cannot read {path}: {e}") from e
    expected = int(np.prod(shape, dtype=np.int64))
    if flat.size != expected:
        raise DatasetFormatException(f"expected {expected} floats for shape {shape}, found {flat.size}",
                                     str(path))
    return flat.reshape(shape)
