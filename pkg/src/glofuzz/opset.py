"""The elementwise operator inventory: 23 binary and 35 unary operators.

Each operator has a fixed admissible dtype set and one scalar kernel per
admissible dtype. Integer kernels wrap modulo 2^width and use total division
semantics (x/0 = 0, x%0 = 0, shift amounts reduced mod bit-width). Float
kernels follow IEEE-754; float32 kernels round every step to float32.
Comparison and predicate operators produce bool, everything else preserves
the operand dtype. All execution backends dispatch to eval_elementwise, so
this module is the single source of truth for value semantics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, FrozenSet, Sequence, Tuple

from .dtypes import (
    BOOL_DTYPES,
    DType,
    FLOAT_DTYPES,
    INT_DTYPES,
    NUMERIC_DTYPES,
    SIGNED_INT_DTYPES,
    TensorValue,
    broadcast_data,
    broadcast_shapes,
    to_float32,
    wrap_int,
)


class UnknownOperatorError(KeyError):
    pass


class AdmissibilityError(TypeError):
    """Operand dtypes are unequal or not admissible for the operator."""


@dataclass(frozen=True)
class OperatorSpec:
    name: str
    arity: int
    admissible: FrozenSet[DType]
    result_is_bool: bool

    def result_dtype(self, operand: DType) -> DType:
        return DType.BOOL if self.result_is_bool else operand


_NEGATABLE = SIGNED_INT_DTYPES | FLOAT_DTYPES

# (name, admissible dtypes, result is bool); order is the registry's
# stable iteration order.
_BINARY = (
    ("add", NUMERIC_DTYPES, False),
    ("subtract", NUMERIC_DTYPES, False),
    ("multiply", NUMERIC_DTYPES, False),
    ("divide", NUMERIC_DTYPES, False),
    ("power", FLOAT_DTYPES, False),
    ("mod", NUMERIC_DTYPES, False),
    ("floor_mod", NUMERIC_DTYPES, False),
    ("floor_divide", NUMERIC_DTYPES, False),
    ("logical_and", BOOL_DTYPES, False),
    ("logical_or", BOOL_DTYPES, False),
    ("logical_xor", BOOL_DTYPES, False),
    ("bitwise_and", INT_DTYPES, False),
    ("bitwise_or", INT_DTYPES, False),
    ("equal", NUMERIC_DTYPES, True),
    ("not_equal", NUMERIC_DTYPES, True),
    ("less", NUMERIC_DTYPES, True),
    ("lessequal", NUMERIC_DTYPES, True),
    ("greater", NUMERIC_DTYPES, True),
    ("greaterequal", NUMERIC_DTYPES, True),
    ("maximum", NUMERIC_DTYPES, False),
    ("minimum", NUMERIC_DTYPES, False),
    ("right_shift", INT_DTYPES, False),
    ("left_shift", INT_DTYPES, False),
)

_UNARY = (
    ("log", FLOAT_DTYPES, False),
    ("log2", FLOAT_DTYPES, False),
    ("log10", FLOAT_DTYPES, False),
    ("tan", FLOAT_DTYPES, False),
    ("tanh", FLOAT_DTYPES, False),
    ("cos", FLOAT_DTYPES, False),
    ("cosh", FLOAT_DTYPES, False),
    ("sin", FLOAT_DTYPES, False),
    ("sinh", FLOAT_DTYPES, False),
    ("acos", FLOAT_DTYPES, False),
    ("acosh", FLOAT_DTYPES, False),
    ("asin", FLOAT_DTYPES, False),
    ("asinh", FLOAT_DTYPES, False),
    ("atan", FLOAT_DTYPES, False),
    ("atanh", FLOAT_DTYPES, False),
    ("exp", FLOAT_DTYPES, False),
    ("erf", FLOAT_DTYPES, False),
    ("sqrt", FLOAT_DTYPES, False),
    ("rsqrt", FLOAT_DTYPES, False),
    ("sigmoid", FLOAT_DTYPES, False),
    ("floor", FLOAT_DTYPES, False),
    ("ceil", FLOAT_DTYPES, False),
    ("trunc", FLOAT_DTYPES, False),
    ("round", FLOAT_DTYPES, False),
    ("abs", NUMERIC_DTYPES, False),
    ("sign", NUMERIC_DTYPES, False),
    ("negative", _NEGATABLE, False),
    ("logical_not", BOOL_DTYPES, False),
    ("bitwise_not", INT_DTYPES, False),
    ("zeros_like", NUMERIC_DTYPES, False),
    ("ones_like", NUMERIC_DTYPES, False),
    ("copy", NUMERIC_DTYPES, False),
    ("isnan", FLOAT_DTYPES, True),
    ("isfinite", FLOAT_DTYPES, True),
    ("isinf", FLOAT_DTYPES, True),
)

_REGISTRY: Tuple[OperatorSpec, ...] = tuple(
    [OperatorSpec(n, 2, frozenset(adm), rb) for n, adm, rb in _BINARY]
    + [OperatorSpec(n, 1, frozenset(adm), rb) for n, adm, rb in _UNARY]
)
_BY_NAME: Dict[str, OperatorSpec] = {s.name: s for s in _REGISTRY}

BINARY_NAMES: Tuple[str, ...] = tuple(n for n, _, _ in _BINARY)
UNARY_NAMES: Tuple[str, ...] = tuple(n for n, _, _ in _UNARY)


def registry() -> Tuple[OperatorSpec, ...]:
    """All operator specs in stable order (binary block, then unary block)."""
    return _REGISTRY


def get_spec(name: str) -> OperatorSpec:
    try:
        return _BY_NAME[name]
    except KeyError:
        raise UnknownOperatorError(name) from None


def is_operator(name: str) -> bool:
    return name in _BY_NAME


def dtype_admissible(op: str, dt: DType) -> bool:
    return dt in get_spec(op).admissible


# ---------------------------------------------------------------------------
# Scalar kernels


def _build_int_kernel(name: str, dt: DType) -> Callable:
    w = dt.width

    def wrap(v: int) -> int:
        return wrap_int(v, dt)

    if name == "add":
        return lambda a, b: wrap(a + b)
    if name == "subtract":
        return lambda a, b: wrap(a - b)
    if name == "multiply":
        return lambda a, b: wrap(a * b)
    if name == "divide":
        def tdiv(a, b):
            if b == 0:
                return 0
            q = abs(a) // abs(b)
            return wrap(q if (a < 0) == (b < 0) else -q)
        return tdiv
    if name == "mod":
        def tmod(a, b):
            if b == 0:
                return 0
            r = abs(a) % abs(b)
            return r if a >= 0 else wrap(-r)
        return tmod
    if name == "floor_divide":
        return lambda a, b: 0 if b == 0 else wrap(a // b)
    if name == "floor_mod":
        return lambda a, b: 0 if b == 0 else a % b
    if name == "maximum":
        return lambda a, b: a if a >= b else b
    if name == "minimum":
        return lambda a, b: a if a <= b else b
    if name == "abs":
        return lambda a: wrap(abs(a))
    if name == "sign":
        return lambda a: (a > 0) - (a < 0)
    if name == "negative":
        return lambda a: wrap(-a)
    if name == "zeros_like":
        return lambda a: 0
    if name == "ones_like":
        return lambda a: 1
    if name == "copy":
        return lambda a: a
    if name == "bitwise_and":
        return lambda a, b: wrap(a & b)
    if name == "bitwise_or":
        return lambda a, b: wrap(a | b)
    if name == "bitwise_not":
        return lambda a: wrap(~a)
    if name == "left_shift":
        return lambda a, b: wrap(a << (b % w))
    if name == "right_shift":
        return lambda a, b: a >> (b % w)
    return _comparison_kernel(name)


def _comparison_kernel(name: str) -> Callable:
    if name == "equal":
        return lambda a, b: a == b
    if name == "not_equal":
        return lambda a, b: a != b
    if name == "less":
        return lambda a, b: a < b
    if name == "lessequal":
        return lambda a, b: a <= b
    if name == "greater":
        return lambda a, b: a > b
    if name == "greaterequal":
        return lambda a, b: a >= b
    raise UnknownOperatorError(name)


def _float_divide(a: float, b: float, q: Callable) -> float:
    if b == 0.0:
        if math.isnan(a) or a == 0.0:
            return math.nan
        return math.copysign(1.0, a) * math.copysign(1.0, b) * math.inf
    return q(a / b)


def _float_pow(a: float, b: float, q: Callable) -> float:
    # C99 pow special cases; math.pow raises where IEEE defines values.
    if b == 0.0:
        return 1.0
    if a == 1.0:
        return 1.0
    if math.isnan(a) or math.isnan(b):
        return math.nan
    odd_int_exp = not math.isinf(b) and float(b).is_integer() and int(b) % 2 != 0
    try:
        return q(math.pow(a, b))
    except OverflowError:
        return -math.inf if (a < 0 and odd_int_exp) else math.inf
    except ValueError:
        if a == 0.0:  # zero base, negative exponent
            neg = math.copysign(1.0, a) < 0 and odd_int_exp
            return -math.inf if neg else math.inf
        return math.nan  # negative base, non-integer exponent


def _build_float_kernel(name: str, dt: DType) -> Callable:
    q = to_float32 if dt is DType.FLOAT32 else (lambda x: x)

    if name == "add":
        return lambda a, b: q(a + b)
    if name == "subtract":
        return lambda a, b: q(a - b)
    if name == "multiply":
        return lambda a, b: q(a * b)
    if name == "divide":
        return lambda a, b: _float_divide(a, b, q)
    if name == "power":
        return lambda a, b: _float_pow(a, b, q)
    if name == "mod":
        def fmod(a, b):
            try:
                return q(math.fmod(a, b))
            except ValueError:
                return math.nan
        return fmod
    if name == "floor_mod":
        def ffloormod(a, b):
            try:
                return q(a % b)
            except ZeroDivisionError:
                return math.nan
        return ffloormod
    if name == "floor_divide":
        def ffloordiv(a, b):
            d = _float_divide(a, b, q)
            if math.isnan(d) or math.isinf(d):
                return d
            return q(float(math.floor(d)))
        return ffloordiv
    if name == "maximum":
        def fmax(a, b):
            if math.isnan(a) or math.isnan(b):
                return math.nan
            return a if a >= b else b
        return fmax
    if name == "minimum":
        def fmin(a, b):
            if math.isnan(a) or math.isnan(b):
                return math.nan
            return a if a <= b else b
        return fmin
    if name in ("log", "log2", "log10"):
        fn = {"log": math.log, "log2": math.log2, "log10": math.log10}[name]
        def flog(x):
            if math.isnan(x):
                return math.nan
            if x < 0.0:
                return math.nan
            if x == 0.0:
                return -math.inf
            return q(fn(x))
        return flog
    if name in ("tan", "sin", "cos"):
        fn = {"tan": math.tan, "sin": math.sin, "cos": math.cos}[name]
        def ftrig(x):
            try:
                return q(fn(x))
            except ValueError:  # infinite argument
                return math.nan
        return ftrig
    if name == "tanh":
        return lambda x: q(math.tanh(x))
    if name == "sinh":
        def fsinh(x):
            try:
                return q(math.sinh(x))
            except OverflowError:
                return math.copysign(math.inf, x)
        return fsinh
    if name == "cosh":
        def fcosh(x):
            try:
                return q(math.cosh(x))
            except OverflowError:
                return math.inf
        return fcosh
    if name in ("acos", "asin"):
        fn = math.acos if name == "acos" else math.asin
        def farc(x):
            try:
                return q(fn(x))
            except ValueError:
                return math.nan
        return farc
    if name == "acosh":
        def facosh(x):
            try:
                return q(math.acosh(x))
            except ValueError:
                return math.nan
        return facosh
    if name == "asinh":
        return lambda x: q(math.asinh(x))
    if name == "atan":
        return lambda x: q(math.atan(x))
    if name == "atanh":
        def fatanh(x):
            if math.isnan(x):
                return math.nan
            if x == 1.0:
                return math.inf
            if x == -1.0:
                return -math.inf
            if abs(x) > 1.0:
                return math.nan
            return q(math.atanh(x))
        return fatanh
    if name == "exp":
        def fexp(x):
            try:
                return q(math.exp(x))
            except OverflowError:
                return math.inf
        return fexp
    if name == "erf":
        return lambda x: q(math.erf(x))
    if name == "sqrt":
        def fsqrt(x):
            try:
                return q(math.sqrt(x))
            except ValueError:
                return math.nan
        return fsqrt
    if name == "rsqrt":
        def frsqrt(x):
            if math.isnan(x):
                return math.nan
            if x == 0.0:
                return math.copysign(math.inf, x)
            if x < 0.0:
                return math.nan
            s = q(math.sqrt(x))
            return q(1.0 / s)
        return frsqrt
    if name == "sigmoid":
        # Stable two-branch form; each step rounds so a float32-native
        # runtime computing the same branches lands within ulps.
        def fsig(x):
            if math.isnan(x):
                return math.nan
            if x >= 0:
                t = q(math.exp(-x))  # exponent <= 0, never overflows
                return q(1.0 / q(1.0 + t))
            t = q(math.exp(x))
            return q(t / q(1.0 + t))
        return fsig
    if name == "floor":
        return lambda x: x if (math.isnan(x) or math.isinf(x)) else q(float(math.floor(x)))
    if name == "ceil":
        return lambda x: x if (math.isnan(x) or math.isinf(x)) else q(float(math.ceil(x)))
    if name == "trunc":
        return lambda x: x if (math.isnan(x) or math.isinf(x)) else q(float(math.trunc(x)))
    if name == "round":
        # round() is banker's rounding, matching IEEE round-half-to-even.
        return lambda x: x if (math.isnan(x) or math.isinf(x)) else q(float(round(x)))
    if name == "abs":
        return lambda x: math.fabs(x)
    if name == "sign":
        def fsign(x):
            if math.isnan(x):
                return math.nan
            return 1.0 if x > 0 else (-1.0 if x < 0 else 0.0)
        return fsign
    if name == "negative":
        return lambda x: -x
    if name == "zeros_like":
        return lambda x: 0.0
    if name == "ones_like":
        return lambda x: 1.0
    if name == "copy":
        return lambda x: x
    if name == "isnan":
        return lambda x: math.isnan(x)
    if name == "isfinite":
        return lambda x: math.isfinite(x)
    if name == "isinf":
        return lambda x: math.isinf(x)
    return _comparison_kernel(name)


def _build_bool_kernel(name: str) -> Callable:
    if name == "logical_and":
        return lambda a, b: a and b
    if name == "logical_or":
        return lambda a, b: a or b
    if name == "logical_xor":
        return lambda a, b: a != b
    if name == "logical_not":
        return lambda a: not a
    raise UnknownOperatorError(name)


_KERNEL_CACHE: Dict[Tuple[str, DType], Callable] = {}


def kernel(op: str, dt: DType) -> Callable:
    """The scalar kernel for op at dtype dt (must be admissible)."""
    key = (op, dt)
    k = _KERNEL_CACHE.get(key)
    if k is None:
        spec = get_spec(op)
        if dt not in spec.admissible:
            raise AdmissibilityError(f"{op} is not admissible for {dt.value}")
        if dt.is_bool:
            k = _build_bool_kernel(op)
        elif dt.is_float:
            k = _build_float_kernel(op, dt)
        else:
            k = _build_int_kernel(op, dt)
        _KERNEL_CACHE[key] = k
    return k


def eval_elementwise(op: str, operands: Sequence[TensorValue]) -> TensorValue:
    """Apply an operator elementwise with broadcasting.

    Operand dtypes must be equal and admissible for the operator. The
    result dtype is bool for comparisons/predicates, the operand dtype
    otherwise.
    """
    spec = get_spec(op)
    if len(operands) != spec.arity:
        raise AdmissibilityError(
            f"{op} expects {spec.arity} operand(s), got {len(operands)}"
        )
    dt = operands[0].dtype
    for t in operands[1:]:
        if t.dtype is not dt:
            raise AdmissibilityError(
                f"{op} operand dtypes differ: {dt.value} vs {t.dtype.value}"
            )
    k = kernel(op, dt)  # also checks admissibility
    rdt = spec.result_dtype(dt)
    if spec.arity == 1:
        x = operands[0]
        return TensorValue(rdt, x.shape, tuple(k(v) for v in x.data))
    a, b = operands
    out_shape = broadcast_shapes(a.shape, b.shape)
    da = broadcast_data(a, out_shape)
    db = broadcast_data(b, out_shape)
    return TensorValue(rdt, out_shape, tuple(k(u, v) for u, v in zip(da, db)))
