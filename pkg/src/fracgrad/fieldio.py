"""Binary field (``FSF1``) and mask (``FSM1``) files.

Layout, all little-endian: 4-byte magic, uint32 ``d``, uint32 ``n``,
float64 ``L``, then ``n^d`` row-major samples (float64 for fields, uint8 0/1
for masks).
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .errors import ValidationError
from .grid import GridSpec, ScalarField

_HEADER = struct.Struct("<4sIId")
FIELD_MAGIC = b"FSF1"
MASK_MAGIC = b"FSM1"


def _write(path, magic: bytes, spec: GridSpec, payload: bytes) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(magic, spec.d, spec.n, spec.L))
        fh.write(payload)


def _read(path, magic: bytes, dtype, itemsize: int):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ValidationError(f"{os.fspath(path)}: truncated header")
    got, d, n, L = _HEADER.unpack_from(raw)
    if got != magic:
        raise ValidationError(f"{os.fspath(path)}: bad magic {got!r}, expected {magic!r}")
    spec = GridSpec(d, n, L)
    body = raw[_HEADER.size :]
    if len(body) != spec.size * itemsize:
        raise ValidationError(
            f"{os.fspath(path)}: payload has {len(body)} bytes, expected {spec.size * itemsize}"
        )
    return spec, np.frombuffer(body, dtype=dtype).reshape(spec.shape)


def write_field(path, f: ScalarField) -> None:
    _write(path, FIELD_MAGIC, f.spec, f.values.astype("<f8").tobytes(order="C"))


def read_field(path) -> ScalarField:
    spec, vals = _read(path, FIELD_MAGIC, "<f8", 8)
    return ScalarField(spec, vals)


def write_mask(path, spec: GridSpec, mask: np.ndarray) -> None:
    m = np.asarray(mask, dtype=bool).reshape(spec.shape)
    _write(path, MASK_MAGIC, spec, m.astype(np.uint8).tobytes(order="C"))


def read_mask(path) -> tuple[GridSpec, np.ndarray]:
    spec, vals = _read(path, MASK_MAGIC, np.uint8, 1)
    if np.any(vals > 1):
        raise ValidationError(f"{os.fspath(path)}: mask bytes must be 0 or 1")
    return spec, vals.astype(bool)
