"""JSON-lines stdio server speaking the harness adapter protocol.

One request per line on stdin, one response per line on stdout:

    {"cmd": "hello"}
        -> {"name", "ops", "dtypes", "pipelines", "float_rtol"}
    {"cmd": "run", "ir_text": ..., "pipeline": [...], "inputs": [value*]}
        -> {"status": "ok", "outputs": value}
         | {"status": "error", "trace": ...}
         | {"status": "unsupported"}

A value is {"kind": "tensor", "dtype", "shape", "data"} with row-major
flat data, or {"kind": "tuple", "items": [...]}. Non-finite floats ride
as the bare JSON literals NaN/Infinity/-Infinity.

Requests outside the declared capability answer "unsupported"; the
harness skips those, they are not findings. Malformed protocol input is
unrecoverable: the server prints a diagnostic to stderr and exits.

--corrupt makes every numeric output deliberately wrong (for harness
self-tests that need a misbehaving backend on demand).
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .irtext import ParseError, UnsupportedConstruct, parse_module, scan_interface
from .runtime import DTYPE_OF, NP_DTYPES, SUPPORTED_DTYPES, SUPPORTED_OPS, run_main

FLOAT_RTOL = 1e-5

_OPS = frozenset(SUPPORTED_OPS)
_DTYPES = frozenset(SUPPORTED_DTYPES)


def capability() -> dict:
    return {
        "name": "npadapter",
        "ops": list(SUPPORTED_OPS),
        "dtypes": list(SUPPORTED_DTYPES),
        "pipelines": [],
        "float_rtol": FLOAT_RTOL,
    }


def decode_value(v):
    if not isinstance(v, dict):
        raise ParseError(f"bad value: {v!r}")
    if v.get("kind") == "tuple":
        return tuple(decode_value(x) for x in v["items"])
    if v.get("kind") == "tensor":
        dt = NP_DTYPES.get(v.get("dtype"))
        if dt is None:
            raise UnsupportedConstruct(f"dtype {v.get('dtype')!r} is not declared")
        return np.asarray(v["data"], dtype=dt).reshape(tuple(v["shape"]))
    raise ParseError(f"bad value kind: {v.get('kind')!r}")


def encode_value(v) -> dict:
    if isinstance(v, tuple):
        return {"kind": "tuple", "items": [encode_value(x) for x in v]}
    arr = np.asarray(v)
    return {
        "kind": "tensor",
        "dtype": DTYPE_OF[arr.dtype],
        "shape": list(arr.shape),
        "data": arr.reshape(-1).tolist(),
    }


def corrupt_value(v):
    """A wrong answer that no tolerance forgives: flipped bools, ints
    off by one, finite floats scaled 4x (zeros sent to one)."""
    if isinstance(v, tuple):
        return tuple(corrupt_value(x) for x in v)
    arr = np.asarray(v)
    if arr.dtype.kind == "b":
        return np.logical_not(arr)
    if arr.dtype.kind == "f":
        with np.errstate(invalid="ignore", over="ignore"):
            return np.where(arr == 0, np.ones((), arr.dtype), arr * 4)
    with np.errstate(over="ignore"):
        return arr + np.ones((), arr.dtype)


def handle_run(msg: dict, corrupt: bool) -> dict:
    try:
        funcs = parse_module(msg["ir_text"])
        ops, dtypes = scan_interface(funcs)
        if not (ops <= _OPS and dtypes <= _DTYPES):
            return {"status": "unsupported"}
        if msg.get("pipeline"):
            return {"status": "unsupported"}  # no optimization toggles
        inputs = [decode_value(v) for v in msg.get("inputs", [])]
        out = run_main(funcs, inputs)
        if corrupt:
            out = corrupt_value(out)
        return {"status": "ok", "outputs": encode_value(out)}
    except UnsupportedConstruct:
        return {"status": "unsupported"}
    except Exception as e:
        return {"status": "error", "trace": f"{type(e).__name__}: {e}"}


def serve(stdin, stdout, corrupt: bool) -> int:
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as e:
            print(f"npadapter: bad request line: {e}", file=sys.stderr)
            return 1
        if not isinstance(msg, dict) or "cmd" not in msg:
            print(f"npadapter: request is not a command object", file=sys.stderr)
            return 1
        if msg["cmd"] == "hello":
            resp = capability()
        elif msg["cmd"] == "run":
            resp = handle_run(msg, corrupt)
        else:
            print(f"npadapter: unknown command {msg['cmd']!r}", file=sys.stderr)
            return 1
        stdout.write(json.dumps(resp) + "\n")
        stdout.flush()
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="npadapter", description=__doc__.splitlines()[0])
    ap.add_argument(
        "--corrupt",
        action="store_true",
        help="return deliberately wrong numeric outputs",
    )
    args = ap.parse_args(argv)
    return serve(sys.stdin, sys.stdout, args.corrupt)


if __name__ == "__main__":
    sys.exit(main())
