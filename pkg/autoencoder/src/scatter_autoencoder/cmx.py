"""Reader/writer for the CMX1 complex-matrix interchange format.

A CMX1 file is: the 4 bytes ``CMX1``, the row and column counts as
little-endian unsigned 64-bit integers, then the entries column by
column, each as a little-endian float64 pair (real, imaginary).  The
file length is exactly 20 + 16 * rows * cols bytes.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Union

import numpy as np

_MAGIC = b"CMX1"
_HEADER = struct.Struct("<4sQQ")


class CmxError(ValueError):
    """File does not conform to the CMX1 layout."""


def write_cmx(matrix: np.ndarray, path: Union[str, Path]) -> None:
    m = np.asarray(matrix, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError("CMX1 stores 2-D matrices only")
    col_major = np.asfortranarray(m)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, m.shape[0], m.shape[1]))
        pairs = np.empty(m.size * 2, dtype="<f8")
        pairs[0::2] = col_major.real.ravel(order="F")
        pairs[1::2] = col_major.imag.ravel(order="F")
        fh.write(pairs.tobytes())


def read_cmx(path: Union[str, Path]) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise CmxError(f"{path}: truncated header")
    magic, rows, cols = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise CmxError(f"{path}: bad magic {magic!r}")
    if len(raw) != _HEADER.size + 16 * rows * cols:
        raise CmxError(f"{path}: payload length does not match {rows}x{cols}")
    pairs = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    flat = pairs[0::2] + 1j * pairs[1::2]
    return flat.reshape((rows, cols), order="F").copy()
