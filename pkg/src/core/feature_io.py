# -*- coding: utf-8 -*-
"""
Feature IO - P2AF binary tensor files

Layout (little-endian):
    magic   4 bytes  b"P2AF"
    version u16      1
    rank    u16
    dims    u32 * rank
    payload f64 * prod(dims), row-major
"""
import struct
from pathlib import Path
from typing import Union

import numpy as np

from src.core.errors import FileFormatError
from src.core.tensor import Tensor


MAGIC = b"P2AF"
VERSION = 1
_HEADER = struct.Struct("<4sHH")

PathLike = Union[str, Path]


def encode_tensor(t: Tensor) -> bytes:
    header = _HEADER.pack(MAGIC, VERSION, t.rank)
    dims = struct.pack(f"<{t.rank}I", *t.shape)
    return header + dims + t.data.astype("<f8").tobytes(order="C")


def decode_tensor(blob: bytes) -> Tensor:
    if len(blob) < _HEADER.size:
        raise FileFormatError("truncated P2AF header")
    magic, version, rank = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise FileFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FileFormatError(f"unsupported P2AF version {version}")
    offset = _HEADER.size
    if len(blob) < offset + 4 * rank:
        raise FileFormatError("truncated P2AF dimension table")
    dims = struct.unpack_from(f"<{rank}I", blob, offset)
    offset += 4 * rank
    count = int(np.prod(dims)) if rank else 1
    if len(blob) - offset != 8 * count:
        raise FileFormatError(f"payload holds {len(blob) - offset} bytes, expected {8 * count}")
    values = np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
    return Tensor(values.astype(np.float64).reshape(dims))


def write_tensor(path: PathLike, t: Tensor) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_bytes(encode_tensor(t))


def read_tensor(path: PathLike) -> Tensor:
    try:
        blob = Path(path).read_bytes()
    except OSError as e:
        raise FileFormatError(f"cannot read tensor file {path}: {e}") from e
    return decode_tensor(blob)
