"""Scalar dtypes, shapes, and dense tensor values.

Everything downstream (graph nodes, IR constants, backend results) stores
tensors as a dtype, a shape tuple, and a flat row-major tuple of Python
scalars. Integer elements are always kept in-range for their width; float32
elements are always exactly representable in float32.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Tuple

Shape = Tuple[int, ...]


class DType(Enum):
    INT64 = "int64"
    INT32 = "int32"
    INT16 = "int16"
    INT8 = "int8"
    UINT64 = "uint64"
    UINT32 = "uint32"
    UINT16 = "uint16"
    UINT8 = "uint8"
    FLOAT64 = "float64"
    FLOAT32 = "float32"
    BOOL = "bool"

    def __repr__(self) -> str:
        return f"DType.{self.name}"

    @property
    def is_signed_int(self) -> bool:
        return self in _SIGNED

    @property
    def is_unsigned_int(self) -> bool:
        return self in _UNSIGNED

    @property
    def is_int(self) -> bool:
        return self in _SIGNED or self in _UNSIGNED

    @property
    def is_float(self) -> bool:
        return self is DType.FLOAT64 or self is DType.FLOAT32

    @property
    def is_bool(self) -> bool:
        return self is DType.BOOL

    @property
    def width(self) -> int:
        return _WIDTH[self]


_SIGNED = frozenset({DType.INT64, DType.INT32, DType.INT16, DType.INT8})
_UNSIGNED = frozenset({DType.UINT64, DType.UINT32, DType.UINT16, DType.UINT8})
_WIDTH = {
    DType.INT64: 64, DType.INT32: 32, DType.INT16: 16, DType.INT8: 8,
    DType.UINT64: 64, DType.UINT32: 32, DType.UINT16: 16, DType.UINT8: 8,
    DType.FLOAT64: 64, DType.FLOAT32: 32, DType.BOOL: 1,
}

ALL_DTYPES: Tuple[DType, ...] = tuple(DType)

SIGNED_INT_DTYPES = frozenset(_SIGNED)
UNSIGNED_INT_DTYPES = frozenset(_UNSIGNED)
INT_DTYPES = SIGNED_INT_DTYPES | UNSIGNED_INT_DTYPES
FLOAT_DTYPES = frozenset({DType.FLOAT64, DType.FLOAT32})
BOOL_DTYPES = frozenset({DType.BOOL})
NUMERIC_DTYPES = INT_DTYPES | FLOAT_DTYPES


def dtype_from_name(name: str) -> DType:
    try:
        return DType(name)
    except ValueError:
        raise ValueError(f"unknown dtype name {name!r}") from None


class ShapeMismatchError(ValueError):
    """Shapes are not broadcast-compatible."""


def broadcast_shapes(a: Shape, b: Shape) -> Shape:
    """Right-aligned elementwise broadcast of two shapes.

    Aligned extents must match or one of them must be 1; the result takes
    the larger extent. Raises ShapeMismatchError otherwise.
    """
    out = []
    la, lb = len(a), len(b)
    for i in range(max(la, lb)):
        x = a[la - 1 - i] if i < la else 1
        y = b[lb - 1 - i] if i < lb else 1
        if x == y or y == 1:
            out.append(x)
        elif x == 1:
            out.append(y)
        else:
            raise ShapeMismatchError(f"cannot broadcast {a} with {b}")
    out.reverse()
    return tuple(out)


def volume(shape: Shape) -> int:
    n = 1
    for d in shape:
        n *= d
    return n


def int_range(dt: DType) -> Tuple[int, int]:
    """Inclusive value range for an integer dtype."""
    w = dt.width
    if dt.is_signed_int:
        return -(1 << (w - 1)), (1 << (w - 1)) - 1
    return 0, (1 << w) - 1


def wrap_int(v: int, dt: DType) -> int:
    """Reduce an arbitrary integer into dt's range modulo 2^width."""
    w = dt.width
    if dt.is_signed_int:
        half = 1 << (w - 1)
        return ((v + half) % (1 << w)) - half
    return v % (1 << w)


# Halfway point between float32 max and 2^128; doubles at or beyond it
# round to infinity under round-to-nearest-even.
_F32_INF_BOUND = 2.0 ** 128 - 2.0 ** 103


def to_float32(x: float) -> float:
    """Round a double to the nearest float32, as a Python float."""
    if math.isnan(x) or math.isinf(x):
        return x
    if abs(x) >= _F32_INF_BOUND:
        return math.copysign(math.inf, x)
    return struct.unpack("<f", struct.pack("<f", x))[0]


@dataclass(frozen=True)
class TensorValue:
    """A dense tensor: dtype, shape, and flat row-major data tuple."""

    dtype: DType
    shape: Shape
    data: Tuple

    def __post_init__(self) -> None:
        if len(self.data) != volume(self.shape):
            raise ValueError(
                f"data length {len(self.data)} does not match shape {self.shape}"
            )

    @property
    def num_elements(self) -> int:
        return len(self.data)

    def item(self):
        if len(self.data) != 1:
            raise ValueError("item() requires a single-element tensor")
        return self.data[0]

    @staticmethod
    def filled(dtype: DType, shape: Shape, scalar) -> "TensorValue":
        return TensorValue(dtype, shape, (scalar,) * volume(shape))

    @staticmethod
    def scalar(dtype: DType, value) -> "TensorValue":
        return TensorValue(dtype, (), (value,))


def broadcast_data(t: TensorValue, out_shape: Shape) -> Tuple:
    """Flat data of t broadcast to out_shape (must be broadcast-compatible)."""
    if t.shape == out_shape:
        return t.data
    if t.num_elements == 1:
        return t.data * volume(out_shape)
    # Per-dimension effective strides; broadcast dims contribute stride 0.
    in_shape = t.shape
    pad = len(out_shape) - len(in_shape)
    strides = []
    acc = 1
    for d in reversed(in_shape):
        strides.append(acc)
        acc *= d
    strides.reverse()
    eff = [0] * len(out_shape)
    for i in range(pad, len(out_shape)):
        d = in_shape[i - pad]
        eff[i] = 0 if (d == 1 and out_shape[i] != 1) else strides[i - pad]
    data = t.data
    out = []
    for coord in _iter_coords(out_shape):
        flat = 0
        for c, s in zip(coord, eff):
            flat += c * s
        out.append(data[flat])
    return tuple(out)


def _iter_coords(shape: Shape) -> Iterator[Tuple[int, ...]]:
    if not shape:
        yield ()
        return
    # Mixed-radix counter, row-major order.
    coord = [0] * len(shape)
    total = volume(shape)
    for _ in range(total):
        yield tuple(coord)
        for axis in range(len(shape) - 1, -1, -1):
            coord[axis] += 1
            if coord[axis] < shape[axis]:
                break
            coord[axis] = 0
