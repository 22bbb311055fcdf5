"""
traveling_observer.checkpoint

Portable parameter files.  Layout::

    b"TOMF"                       magic
    uint16 little-endian          format version
    uint32 little-endian          manifest length in bytes
    manifest                      UTF-8 JSON {"params": [...], "meta": {...}};
                                  each param entry holds name, shape, dtype
    raw arrays                    little-endian, C order, in manifest order
"""
from __future__ import annotations
import json
import struct
from collections import OrderedDict
from typing import Any, Dict, Mapping, Tuple

import numpy as np

from .errors import FormatError

MAGIC = b"TOMF"
VERSION = 1
_HEADER = struct.Struct("<4sHI")
_DTYPES = {"<f8": np.dtype("<f8"), "<f4": np.dtype("<f4")}


def save_checkpoint(
        path: str,
        arrays: Mapping[str, np.ndarray],
        meta: Mapping[str, Any]
) -> None:
    """
    Writes ``arrays`` (in iteration order) and a JSON-serializable
    ``meta`` mapping to ``path``.
    """
    manifest_params = []
    payloads = []
    for name, values in arrays.items():
        values = np.asarray(values)
        dtype = values.dtype.newbyteorder("<")
        if dtype.str not in _DTYPES:
            raise FormatError(f"unsupported dtype {values.dtype} for parameter {name}", path)
        manifest_params.append({"name": name, "shape": list(values.shape), "dtype": dtype.str})
        payloads.append(np.ascontiguousarray(values, dtype=dtype).tobytes(order="C"))

    manifest = json.dumps({"params": manifest_params, "meta": meta}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as handle:
        handle.write(_HEADER.pack(MAGIC, VERSION, len(manifest)))
        handle.write(manifest)
        for payload in payloads:
            handle.write(payload)


def load_checkpoint(path: str) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    """
    Reads a file written by :func:`save_checkpoint`.

    :returns: The arrays keyed by name in manifest order, and the meta
              mapping.
    """
    with open(path, "rb") as handle:
        blob = handle.read()

    if len(blob) < _HEADER.size:
        raise FormatError("file shorter than the checkpoint header", path, 0)
    magic, version, length = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}", path, 0)
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", path, 4)

    offset = _HEADER.size
    try:
        manifest = json.loads(blob[offset:offset + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as error:
        raise FormatError(f"unreadable manifest: {error}", path, offset) from error
    offset += length

    arrays: Dict[str, np.ndarray] = OrderedDict()
    for entry in manifest.get("params", []):
        dtype = _DTYPES.get(entry.get("dtype"))
        if dtype is None:
            raise FormatError(f"unsupported dtype {entry.get('dtype')!r}", path, offset)
        shape = tuple(int(s) for s in entry["shape"])
        nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        if offset + nbytes > len(blob):
            raise FormatError(f"truncated data for parameter {entry['name']}", path, offset)
        arrays[entry["name"]] = np.frombuffer(blob, dtype=dtype, count=nbytes // dtype.itemsize,
                                              offset=offset).reshape(shape).copy()
        offset += nbytes

    if offset != len(blob):
        raise FormatError(f"{len(blob) - offset} trailing bytes after the last parameter", path,
                          offset)
    return arrays, manifest.get("meta", {})
