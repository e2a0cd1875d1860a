"""Checkpoint file format for ParamStore ("SWP1").

Little-endian layout:

    magic   4 bytes  b"SWP1"
    version u32      (currently 1)
    step    u64      optimizer step counter
    count   u32      number of parameters
    entry*  name_len u32, name utf-8, ndim u32, shape u32*ndim,
            data f32*numel, m f32*numel, v f32*numel

Entries are written sorted by name so the file is a canonical function of
the store's contents; load(save(store)) is bit-identical to store.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from ..errors import DataFormatError
from .optim import ParamStore

MAGIC = b"SWP1"
VERSION = 1


def save_params(store: ParamStore, path) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IQ I".replace(" ", ""), VERSION, store.step, len(store.params)))
        for name in sorted(store.params):
            data = store.params[name].data
            raw_name = name.encode("utf-8")
            f.write(struct.pack("<I", len(raw_name)))
            f.write(raw_name)
            f.write(struct.pack("<I", data.ndim))
            f.write(struct.pack(f"<{data.ndim}I", *data.shape))
            f.write(np.ascontiguousarray(data, dtype="<f4").tobytes())
            f.write(np.ascontiguousarray(store.m[name], dtype="<f4").tobytes())
            f.write(np.ascontiguousarray(store.v[name], dtype="<f4").tobytes())
    os.replace(tmp, path)


def _read_exact(f, n: int, what: str) -> bytes:
    raw = f.read(n)
    if len(raw) != n:
        raise DataFormatError(f"checkpoint truncated while reading {what}")
    return raw


def load_params(path) -> ParamStore:
    store = ParamStore()
    with open(path, "rb") as f:
        if _read_exact(f, 4, "magic") != MAGIC:
            raise DataFormatError(f"{path}: not a SWP1 checkpoint")
        version, step, count = struct.unpack("<IQI", _read_exact(f, 16, "header"))
        if version != VERSION:
            raise DataFormatError(f"{path}: unsupported checkpoint version {version}")
        for _ in range(count):
            (name_len,) = struct.unpack("<I", _read_exact(f, 4, "name length"))
            name = _read_exact(f, name_len, "name").decode("utf-8")
            (ndim,) = struct.unpack("<I", _read_exact(f, 4, "ndim"))
            shape = struct.unpack(f"<{ndim}I", _read_exact(f, 4 * ndim, "shape"))
            numel = int(np.prod(shape, dtype=np.int64)) if ndim else 1
            nbytes = 4 * numel
            data = np.frombuffer(_read_exact(f, nbytes, f"{name} data"), dtype="<f4").reshape(shape)
            m = np.frombuffer(_read_exact(f, nbytes, f"{name} m"), dtype="<f4").reshape(shape)
            v = np.frombuffer(_read_exact(f, nbytes, f"{name} v"), dtype="<f4").reshape(shape)
            store.add(name, data.copy())
            store.m[name] = m.copy()
            store.v[name] = v.copy()
        if f.read(1):
            raise DataFormatError(f"{path}: trailing bytes after last parameter")
    store.step = step
    return store
