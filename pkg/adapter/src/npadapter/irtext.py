"""Reader for the harness's canonical module text.

The wire format is a small s-expression language:

    module := fn*
    fn     := (fn NAME ((param TYPE)*) expr)
    expr   := NAME
            | (const TYPE atom*)
            | (prim OP expr*)
            | (let NAME expr expr)
            | (call expr expr*)
            | (fnref NAME)
            | (tuple expr*)
            | (proj expr INDEX)
    TYPE   := dtype[extent,extent,...]

Closures also exist in the source language; this adapter does not
evaluate them and reports such modules as unsupported rather than
guessing at their semantics.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Dict, Tuple

DTYPE_NAMES = (
    "bool",
    "int8", "int16", "int32", "int64",
    "uint8", "uint16", "uint32", "uint64",
    "float32", "float64",
)


class ParseError(ValueError):
    pass


class UnsupportedConstruct(Exception):
    """Module uses a language feature this adapter does not evaluate."""


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    dtype: str
    shape: Tuple[int, ...]
    data: tuple


@dataclass(frozen=True)
class Prim:
    op: str
    args: tuple


@dataclass(frozen=True)
class Let:
    name: str
    value: object
    body: object


@dataclass(frozen=True)
class Call:
    callee: object
    args: tuple


@dataclass(frozen=True)
class FnRef:
    name: str


@dataclass(frozen=True)
class Tup:
    fields: tuple


@dataclass(frozen=True)
class Proj:
    tup: object
    index: int


@dataclass(frozen=True)
class Fn:
    name: str
    params: Tuple[Tuple[str, str, Tuple[int, ...]], ...]  # (name, dtype, shape)
    body: object


_TOKEN = re.compile(r"\(|\)|[^\s()]+")
_TYPE = re.compile(r"([a-z0-9]+)\[([0-9,]*)\]")


def _read(tokens, pos):
    """One s-expression starting at pos -> (tree, next position)."""
    if pos >= len(tokens):
        raise ParseError("unexpected end of input")
    tok = tokens[pos]
    if tok == "(":
        pos += 1
        out = []
        while True:
            if pos >= len(tokens):
                raise ParseError("unclosed form")
            if tokens[pos] == ")":
                return out, pos + 1
            node, pos = _read(tokens, pos)
            out.append(node)
    if tok == ")":
        raise ParseError("unexpected )")
    return tok, pos + 1


def _parse_type(tok) -> Tuple[str, Tuple[int, ...]]:
    m = _TYPE.fullmatch(tok) if isinstance(tok, str) else None
    if not m or m.group(1) not in DTYPE_NAMES:
        raise ParseError(f"bad type: {tok!r}")
    dims = m.group(2)
    shape = tuple(int(d) for d in dims.split(",")) if dims else ()
    return m.group(1), shape


def _parse_atom(dtype: str, tok: str):
    if dtype == "bool":
        if tok == "true":
            return True
        if tok == "false":
            return False
        raise ParseError(f"bad bool literal: {tok!r}")
    try:
        return float(tok) if dtype.startswith("float") else int(tok)
    except ValueError:
        raise ParseError(f"bad {dtype} literal: {tok!r}") from None


def _parse_expr(form):
    if isinstance(form, str):
        return Var(form)
    if not form or not isinstance(form[0], str):
        raise ParseError(f"bad form: {form!r}")
    head = form[0]
    if head == "const":
        if len(form) < 2:
            raise ParseError("const needs a type")
        dtype, shape = _parse_type(form[1])
        data = tuple(_parse_atom(dtype, t) for t in form[2:])
        return Const(dtype, shape, data)
    if head == "prim":
        if len(form) < 2 or not isinstance(form[1], str):
            raise ParseError("prim needs an operator name")
        return Prim(form[1], tuple(_parse_expr(a) for a in form[2:]))
    if head == "let":
        if len(form) != 4 or not isinstance(form[1], str):
            raise ParseError("let needs (let name value body)")
        return Let(form[1], _parse_expr(form[2]), _parse_expr(form[3]))
    if head == "call":
        if len(form) < 2:
            raise ParseError("call needs a callee")
        return Call(_parse_expr(form[1]), tuple(_parse_expr(a) for a in form[2:]))
    if head == "fnref":
        if len(form) != 2 or not isinstance(form[1], str):
            raise ParseError("fnref needs a name")
        return FnRef(form[1])
    if head == "tuple":
        return Tup(tuple(_parse_expr(f) for f in form[1:]))
    if head == "proj":
        if len(form) != 3 or not isinstance(form[2], str) or not form[2].isdigit():
            raise ParseError("proj needs (proj expr index)")
        return Proj(_parse_expr(form[1]), int(form[2]))
    if head == "closure":
        raise UnsupportedConstruct("closure expressions are not evaluated")
    raise ParseError(f"unknown form head: {head!r}")


def _parse_params(forms):
    params = []
    for p in forms:
        if not (isinstance(p, list) and len(p) == 2 and isinstance(p[0], str)):
            raise ParseError(f"bad parameter: {p!r}")
        dtype, shape = _parse_type(p[1])
        params.append((p[0], dtype, shape))
    return tuple(params)


def parse_module(text: str) -> Dict[str, Fn]:
    """All function definitions in the module, keyed by name."""
    tokens = _TOKEN.findall(text)
    pos = 0
    funcs: Dict[str, Fn] = {}
    while pos < len(tokens):
        form, pos = _read(tokens, pos)
        if not (isinstance(form, list) and len(form) == 4 and form[0] == "fn"):
            raise ParseError(f"expected (fn name (params) body), got {form!r}")
        name = form[1]
        if not isinstance(name, str):
            raise ParseError("function name must be an atom")
        if not isinstance(form[2], list):
            raise ParseError("parameter list must be a form")
        funcs[name] = Fn(name, _parse_params(form[2]), _parse_expr(form[3]))
    if "main" not in funcs:
        raise ParseError("module has no main function")
    return funcs


def scan_interface(funcs: Dict[str, Fn]):
    """(operator names, dtype names) the module touches."""
    ops = set()
    dtypes = set()
    for fn in funcs.values():
        for _, dt, _ in fn.params:
            dtypes.add(dt)
        stack = [fn.body]
        while stack:
            e = stack.pop()
            if isinstance(e, Prim):
                ops.add(e.op)
                stack.extend(e.args)
            elif isinstance(e, Const):
                dtypes.add(e.dtype)
            elif isinstance(e, Let):
                stack.append(e.value)
                stack.append(e.body)
            elif isinstance(e, Call):
                stack.append(e.callee)
                stack.extend(e.args)
            elif isinstance(e, Tup):
                stack.extend(e.fields)
            elif isinstance(e, Proj):
                stack.append(e.tup)
    return ops, dtypes
