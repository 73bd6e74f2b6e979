"""CMX1 binary matrix interchange format.

Layout: 4-byte magic "CMX1", then rows and cols as unsigned 64-bit
little-endian integers, then rows*cols complex entries in column-major
order, each entry two IEEE-754 float64 little-endian reals (real part
then imaginary part).  Total file length is 20 + 16*rows*cols bytes.
"""

from __future__ import annotations

import struct
import warnings
from pathlib import Path
from typing import Union

import numpy as np

MAGIC = b"CMX1"
HEADER = struct.Struct("<4sQQ")


class CmxFormatError(ValueError):
    """File does not conform to the CMX1 layout."""


class CmxMagicError(CmxFormatError):
    """Wrong magic bytes."""


class CmxSizeError(CmxFormatError):
    """Payload length inconsistent with the declared shape."""


def write_cmx(matrix: np.ndarray, path: Union[str, Path]) -> None:
    """Write a complex matrix to `path` in CMX1 format."""
    m = np.asarray(matrix, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError("CMX1 stores 2-D matrices only")
    rows, cols = m.shape
    # interleave (re, im) per entry, column-major over the matrix
    inter = np.empty(rows * cols * 2, dtype="<f8")
    inter[0::2] = np.ascontiguousarray(m.T.real).ravel()
    inter[1::2] = np.ascontiguousarray(m.T.imag).ravel()
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, rows, cols))
        fh.write(inter.tobytes())


def read_cmx(path: Union[str, Path], *, reject_nonfinite: bool = False) -> np.ndarray:
    """Read a CMX1 file; round-trips with write_cmx bit-exactly."""
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size:
        raise CmxSizeError(f"{path}: file shorter than the 20-byte header")
    magic, rows, cols = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise CmxMagicError(f"{path}: bad magic {magic!r}")
    expected = HEADER.size + 16 * rows * cols
    if len(raw) != expected:
        raise CmxSizeError(
            f"{path}: length {len(raw)} != expected {expected} for {rows}x{cols}")
    inter = np.frombuffer(raw, dtype="<f8", offset=HEADER.size)
    m = (inter[0::2] + 1j * inter[1::2]).reshape(cols, rows).T.copy()
    if not np.all(np.isfinite(m.view(float))):
        if reject_nonfinite:
            raise CmxFormatError(f"{path}: non-finite entries")
        warnings.warn(f"{path}: non-finite entries in CMX1 payload")
    return m
