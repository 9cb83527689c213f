"""Binary container of named tensors plus a JSON manifest.

Layout of ``params.bin`` (all integers little-endian)::

    magic   b"CPTK"
    u32     version (1)
    u32     tensor count
    per tensor:
        u16 name length, name bytes (UTF-8)
        u8  dtype code (0 = float64, 1 = float32)
        u8  ndim
        u32 * ndim shape
        raw little-endian scalars, C order
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"CPTK"
VERSION = 1
_CODES = {np.dtype("float64"): 0, np.dtype("float32"): 1}
_DTYPES = {0: np.dtype("<f8"), 1: np.dtype("<f4")}


class CheckpointError(ValueError):
    pass


def write_tensors(path, tensors: dict) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(tensors)))
        for name, arr in tensors.items():
            arr = np.asarray(arr)
            if arr.dtype not in _CODES:
                raise CheckpointError(f"unsupported dtype {arr.dtype} for {name!r}")
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<BB", _CODES[arr.dtype], arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype=_DTYPES[_CODES[arr.dtype]]).tobytes())


def read_tensors(path) -> dict:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a tensor container")
    version, count = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    pos, out = 12, {}
    for _ in range(count):
        (n,) = struct.unpack_from("<H", data, pos)
        pos += 2
        name = data[pos:pos + n].decode("utf-8")
        pos += n
        code, ndim = struct.unpack_from("<BB", data, pos)
        pos += 2
        shape = struct.unpack_from(f"<{ndim}I", data, pos)
        pos += 4 * ndim
        dt = _DTYPES[code]
        size = int(np.prod(shape)) * dt.itemsize
        out[name] = np.frombuffer(data, dtype=dt, count=int(np.prod(shape)), offset=pos).reshape(shape).astype(dt.newbyteorder("="))
        pos += size
    if pos != len(data):
        raise CheckpointError(f"{path}: {len(data) - pos} trailing bytes")
    return out


def save_checkpoint(directory, tensors: dict, manifest: dict) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_tensors(d / "params.bin", tensors)
    (d / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return d


def load_checkpoint(directory):
    d = Path(directory)
    if not (d / "manifest.json").exists():
        raise CheckpointError(f"{d}: missing manifest.json")
    manifest = json.loads((d / "manifest.json").read_text())
    return read_tensors(d / "params.bin"), manifest
