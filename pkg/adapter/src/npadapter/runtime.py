"""NumPy evaluation of parsed modules, on a declared operator subset.

The harness's reference interpreter uses total arithmetic: integer
division and remainder by zero produce 0, shift counts reduce modulo the
bit width, integer overflow wraps, and float32 arithmetic rounds after
every step. NumPy's native integer kernels already wrap, and IEEE basic
operations (+, -, *, /, sqrt and friends) round identically whether
computed in float32 directly or in float64 and rounded once, so on the
ops declared here native NumPy evaluation reproduces the reference bit
for bit. Transcendentals (exp, log, trig, erf, sigmoid, power) are NOT
declared: their last-ulp behavior is libm-specific, and one subtraction
can turn an ulp of drift into an arbitrarily large relative error.

Division by zero policy: NumPy warns and picks its own fill values, so
zero divisors are masked out before dividing and the totalized result
(0 for ints, IEEE inf/nan for floats) is substituted afterwards.
"""

from __future__ import annotations

from typing import Dict, List, Sequence

import numpy as np

from .irtext import Call, Const, Fn, FnRef, Let, Prim, Proj, Tup, UnsupportedConstruct, Var

NP_DTYPES: Dict[str, np.dtype] = {
    "bool": np.dtype(np.bool_),
    "int8": np.dtype(np.int8),
    "int16": np.dtype(np.int16),
    "int32": np.dtype(np.int32),
    "int64": np.dtype(np.int64),
    "uint8": np.dtype(np.uint8),
    "uint16": np.dtype(np.uint16),
    "uint32": np.dtype(np.uint32),
    "uint64": np.dtype(np.uint64),
    "float32": np.dtype(np.float32),
    "float64": np.dtype(np.float64),
}
DTYPE_OF = {v: k for k, v in NP_DTYPES.items()}

SUPPORTED_DTYPES = tuple(NP_DTYPES)


class EvalError(RuntimeError):
    pass


def _zero(dt) -> np.ndarray:
    return np.zeros((), dtype=dt)


def _masked_div(a, b):
    """Floor quotient with zero divisors replaced by 1; caller masks."""
    bb = np.where(b == 0, np.ones((), b.dtype), b)
    with np.errstate(divide="ignore", over="ignore"):
        return np.floor_divide(a, bb), bb


def _int_trunc_div(a, b):
    q, bb = _masked_div(a, b)
    if a.dtype.kind == "i":
        # floor rounds away from zero exactly when signs differ and the
        # division is inexact; bump back toward zero.
        with np.errstate(over="ignore"):
            r = a - q * bb
            q = q + ((r != 0) & ((a < 0) != (bb < 0))).astype(a.dtype)
    return np.where(b == 0, _zero(a.dtype), q)


def _int_trunc_mod(a, b):
    q, bb = _masked_div(a, b)
    with np.errstate(over="ignore"):
        if a.dtype.kind == "i":
            r = a - q * bb
            q = q + ((r != 0) & ((a < 0) != (bb < 0))).astype(a.dtype)
        r = a - q * bb
    return np.where(b == 0, _zero(a.dtype), r)


def _int_floor_div(a, b):
    q, _ = _masked_div(a, b)
    return np.where(b == 0, _zero(a.dtype), q)


def _int_floor_mod(a, b):
    bb = np.where(b == 0, np.ones((), b.dtype), b)
    with np.errstate(over="ignore"):
        r = np.remainder(a, bb)
    return np.where(b == 0, _zero(a.dtype), r)


def _float_div(a, b):
    with np.errstate(divide="ignore", invalid="ignore", over="ignore", under="ignore"):
        return np.true_divide(a, b)


def _float_floor_div(a, b):
    q = _float_div(a, b)
    r = np.where(np.isfinite(q), np.floor(q), q)
    # adding +0.0 turns a -0.0 quotient into +0.0 and leaves everything else alone
    return r + np.zeros((), r.dtype)


def _divide(a, b):
    return _float_div(a, b) if a.dtype.kind == "f" else _int_trunc_div(a, b)


def _mod(a, b):
    if a.dtype.kind == "f":
        with np.errstate(invalid="ignore"):
            return np.fmod(a, b)
    return _int_trunc_mod(a, b)


def _floor_divide(a, b):
    return _float_floor_div(a, b) if a.dtype.kind == "f" else _int_floor_div(a, b)


def _floor_mod(a, b):
    if a.dtype.kind == "f":
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.remainder(a, b)
    return _int_floor_mod(a, b)


def _shift_count(b):
    width = b.dtype.itemsize * 8
    return np.remainder(b, np.asarray(width, dtype=b.dtype))


def _left_shift(a, b):
    with np.errstate(over="ignore"):
        return np.left_shift(a, _shift_count(b))


def _right_shift(a, b):
    return np.right_shift(a, _shift_count(b))


def _rsqrt(x):
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.reciprocal(np.sqrt(x))


def _maximum(a, b):
    if a.dtype.kind != "f":
        return np.maximum(a, b)
    # ties (including 0.0 vs -0.0) keep the first operand; NaN poisons
    with np.errstate(invalid="ignore"):
        r = np.where(a >= b, a, b)
        return np.where(np.isnan(a) | np.isnan(b), np.asarray(np.nan, dtype=a.dtype), r)


def _minimum(a, b):
    if a.dtype.kind != "f":
        return np.minimum(a, b)
    with np.errstate(invalid="ignore"):
        r = np.where(a <= b, a, b)
        return np.where(np.isnan(a) | np.isnan(b), np.asarray(np.nan, dtype=a.dtype), r)


def _signless(fn):
    # the rounding family maps -0.0 (and negative values that round to zero) to +0.0
    def run(a):
        r = fn(a)
        return r + np.zeros((), r.dtype)

    return run


def _sqrt(x):
    with np.errstate(invalid="ignore"):
        return np.sqrt(x)


def _overflow_ok(fn):
    def run(*args):
        with np.errstate(over="ignore", invalid="ignore"):
            return fn(*args)

    return run


_BINARY = {
    "add": _overflow_ok(np.add),
    "subtract": _overflow_ok(np.subtract),
    "multiply": _overflow_ok(np.multiply),
    "divide": _divide,
    "mod": _mod,
    "floor_divide": _floor_divide,
    "floor_mod": _floor_mod,
    "maximum": _maximum,
    "minimum": _minimum,
    "logical_and": np.logical_and,
    "logical_or": np.logical_or,
    "logical_xor": np.logical_xor,
    "bitwise_and": np.bitwise_and,
    "bitwise_or": np.bitwise_or,
    "equal": np.equal,
    "not_equal": np.not_equal,
    "less": np.less,
    "lessequal": np.less_equal,
    "greater": np.greater,
    "greaterequal": np.greater_equal,
    "left_shift": _left_shift,
    "right_shift": _right_shift,
}

_UNARY = {
    "negative": _overflow_ok(np.negative),
    "abs": _overflow_ok(np.abs),
    "sign": np.sign,
    "sqrt": _sqrt,
    "rsqrt": _rsqrt,
    "floor": _signless(np.floor),
    "ceil": _signless(np.ceil),
    "trunc": _signless(np.trunc),
    "round": _signless(np.rint),
    "logical_not": np.logical_not,
    "bitwise_not": np.invert,
    "zeros_like": np.zeros_like,
    "ones_like": np.ones_like,
    "copy": np.copy,
    "isnan": np.isnan,
    "isfinite": np.isfinite,
    "isinf": np.isinf,
}

KERNELS = {**_BINARY, **_UNARY}
SUPPORTED_OPS = tuple(sorted(KERNELS))


class _FnVal:
    __slots__ = ("fn",)

    def __init__(self, fn: Fn):
        self.fn = fn


def _eval(e, env: dict, funcs: Dict[str, Fn]):
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise EvalError(f"unbound name {e.name}") from None
    if isinstance(e, Const):
        return np.asarray(e.data, dtype=NP_DTYPES[e.dtype]).reshape(e.shape)
    if isinstance(e, Prim):
        k = KERNELS.get(e.op)
        if k is None:
            raise UnsupportedConstruct(f"operator {e.op} is not declared")
        args = [_eval(a, env, funcs) for a in e.args]
        return np.asarray(k(*args))
    if isinstance(e, Let):
        env2 = dict(env)
        env2[e.name] = _eval(e.value, env, funcs)
        return _eval(e.body, env2, funcs)
    if isinstance(e, FnRef):
        try:
            return _FnVal(funcs[e.name])
        except KeyError:
            raise EvalError(f"unknown function {e.name}") from None
    if isinstance(e, Call):
        callee = _eval(e.callee, env, funcs)
        if not isinstance(callee, _FnVal):
            raise EvalError("call of a non-function value")
        args = [_eval(a, env, funcs) for a in e.args]
        return _apply(callee.fn, args, funcs)
    if isinstance(e, Tup):
        return tuple(_eval(f, env, funcs) for f in e.fields)
    if isinstance(e, Proj):
        tup = _eval(e.tup, env, funcs)
        if not isinstance(tup, tuple) or not 0 <= e.index < len(tup):
            raise EvalError(f"bad projection index {e.index}")
        return tup[e.index]
    raise EvalError(f"unknown expression {type(e).__name__}")


def _apply(fn: Fn, args: Sequence, funcs: Dict[str, Fn]):
    if len(args) != len(fn.params):
        raise EvalError(f"{fn.name} expects {len(fn.params)} arguments, got {len(args)}")
    env = {name: arg for (name, _, _), arg in zip(fn.params, args)}
    return _eval(fn.body, env, funcs)


def run_main(funcs: Dict[str, Fn], inputs: List) -> object:
    """Evaluate main on the given inputs; arrays in, arrays (or nested
    tuples of arrays) out."""
    return _apply(funcs["main"], inputs, funcs)
