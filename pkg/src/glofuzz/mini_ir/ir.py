"""Expression-based tensor IR: types, expressions, module container, and
the canonical text form.

Expressions are immutable trees. The optional `ty` annotation is excluded
from equality/hashing so structural identity (which constant folding and
common-subexpression elimination key on) ignores whether inference has
run. Within any one function, each name is bound at most once; separate
globals may reuse names (scopes never mix). Passes keep it that way by
drawing fresh names from `fresh_namer`, which avoids every name in the
module.

Text form: s-expressions with exactly one atom syntax (no quoting).
Tensor types print as `dtype[d1,d2]` (scalar: `dtype[]`), so parens only
ever mean tree structure. Round-trip is byte-stable: parse(text) reprints
to the identical text.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple, Union

from ..dtypes import DType, Shape, TensorValue, dtype_from_name, volume


@dataclass(frozen=True)
class TensorType:
    dtype: DType
    shape: Shape


@dataclass(frozen=True)
class TupleType:
    fields: Tuple["Type", ...]


@dataclass(frozen=True)
class FuncType:
    params: Tuple["Type", ...]
    result: "Type"


Type = Union[TensorType, TupleType, FuncType]


@dataclass(frozen=True)
class Var:
    name: str
    ty: Optional[Type] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Const:
    value: TensorValue
    ty: Optional[Type] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Prim:
    op: str
    args: Tuple["Expr", ...]
    ty: Optional[Type] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Let:
    name: str
    value: "Expr"
    body: "Expr"
    ty: Optional[Type] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class FuncRef:
    name: str
    ty: Optional[Type] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class CallExpr:
    callee: "Expr"
    args: Tuple["Expr", ...]
    ty: Optional[Type] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Param:
    name: str
    ty: TensorType


@dataclass(frozen=True)
class Closure:
    params: Tuple[Param, ...]
    body: "Expr"
    ty: Optional[Type] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class TupleExpr:
    fields: Tuple["Expr", ...]
    ty: Optional[Type] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Proj:
    tup: "Expr"
    index: int
    ty: Optional[Type] = field(default=None, compare=False, repr=False)


Expr = Union[Var, Const, Prim, Let, FuncRef, CallExpr, Closure, TupleExpr, Proj]


@dataclass(frozen=True)
class GlobalFunc:
    name: str
    params: Tuple[Param, ...]
    body: Expr
    ret: Optional[Type] = field(default=None, compare=False, repr=False)


@dataclass
class IrModule:
    """Ordered map of global functions; "main" is the entry point."""

    funcs: Dict[str, GlobalFunc]

    @property
    def main(self) -> GlobalFunc:
        return self.funcs["main"]

    def replace(self, fn: GlobalFunc) -> "IrModule":
        funcs = dict(self.funcs)
        funcs[fn.name] = fn
        return IrModule(funcs)


def children(e: Expr) -> Tuple[Expr, ...]:
    if isinstance(e, Prim):
        return e.args
    if isinstance(e, Let):
        return (e.value, e.body)
    if isinstance(e, CallExpr):
        return (e.callee,) + e.args
    if isinstance(e, Closure):
        return (e.body,)
    if isinstance(e, TupleExpr):
        return e.fields
    if isinstance(e, Proj):
        return (e.tup,)
    return ()


def walk(e: Expr) -> Iterator[Expr]:
    stack = [e]
    while stack:
        cur = stack.pop()
        yield cur
        stack.extend(children(cur))


def expr_size(e: Expr) -> int:
    return sum(1 for _ in walk(e))


def fresh_namer(m: IrModule, prefix: str):
    """Name factory guaranteed not to collide with any binder, parameter,
    or global already in the module."""
    taken = set(m.funcs)
    for fn in m.funcs.values():
        taken.update(p.name for p in fn.params)
        for e in walk(fn.body):
            if isinstance(e, Let):
                taken.add(e.name)
            elif isinstance(e, Closure):
                taken.update(p.name for p in e.params)
    counter = [0]

    def fresh() -> str:
        while True:
            name = f"{prefix}{counter[0]}"
            counter[0] += 1
            if name not in taken:
                taken.add(name)
                return name

    return fresh


# -- canonical text -----------------------------------------------------------


def type_atom(t: TensorType) -> str:
    return f"{t.dtype.value}[{','.join(str(d) for d in t.shape)}]"


def _parse_type_atom(tok: str) -> TensorType:
    m = re.fullmatch(r"([a-z0-9]+)\[([0-9,]*)\]", tok)
    if not m:
        raise ValueError(f"bad type atom: {tok}")
    dt = dtype_from_name(m.group(1))
    dims = m.group(2)
    shape: Shape = tuple(int(d) for d in dims.split(",")) if dims else ()
    return TensorType(dt, shape)


def _scalar_atom(dt: DType, v) -> str:
    if dt.is_bool:
        return "true" if v else "false"
    return repr(v) if dt.is_float else str(v)


def _parse_scalar_atom(dt: DType, tok: str):
    if dt.is_bool:
        if tok in ("true", "false"):
            return tok == "true"
        raise ValueError(f"bad bool literal: {tok}")
    return float(tok) if dt.is_float else int(tok)


def expr_text(e: Expr) -> str:
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Const):
        v = e.value
        data = "".join(" " + _scalar_atom(v.dtype, x) for x in v.data)
        return f"(const {type_atom(TensorType(v.dtype, v.shape))}{data})"
    if isinstance(e, Prim):
        return f"(prim {e.op}{''.join(' ' + expr_text(a) for a in e.args)})"
    if isinstance(e, Let):
        return f"(let {e.name} {expr_text(e.value)}\n  {expr_text(e.body)})"
    if isinstance(e, FuncRef):
        return f"(fnref {e.name})"
    if isinstance(e, CallExpr):
        return (
            f"(call {expr_text(e.callee)}"
            f"{''.join(' ' + expr_text(a) for a in e.args)})"
        )
    if isinstance(e, Closure):
        return f"(closure ({_params_text(e.params)}) {expr_text(e.body)})"
    if isinstance(e, TupleExpr):
        return f"(tuple{''.join(' ' + expr_text(f) for f in e.fields)})"
    assert isinstance(e, Proj)
    return f"(proj {expr_text(e.tup)} {e.index})"


def _params_text(params: Tuple[Param, ...]) -> str:
    return " ".join(f"({p.name} {type_atom(p.ty)})" for p in params)


def func_text(f: GlobalFunc) -> str:
    return f"(fn {f.name} ({_params_text(f.params)})\n  {expr_text(f.body)})"


def module_text(m: IrModule) -> str:
    return "\n".join(func_text(f) for f in m.funcs.values()) + "\n"


# -- parser -------------------------------------------------------------------

_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def _tokens(text: str) -> List[str]:
    return _TOKEN.findall(text)


class _Reader:
    def __init__(self, toks: List[str]):
        self.toks = toks
        self.pos = 0

    def peek(self) -> Optional[str]:
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def next(self) -> str:
        tok = self.peek()
        if tok is None:
            raise ValueError("unexpected end of input")
        self.pos += 1
        return tok

    def expect(self, tok: str) -> None:
        got = self.next()
        if got != tok:
            raise ValueError(f"expected {tok!r}, got {got!r}")


def _read_sexpr(r: _Reader):
    tok = r.next()
    if tok == "(":
        out = []
        while r.peek() != ")":
            if r.peek() is None:
                raise ValueError("unclosed form")
            out.append(_read_sexpr(r))
        r.next()
        return out
    if tok == ")":
        raise ValueError("unexpected )")
    return tok


def _parse_params(form) -> Tuple[Param, ...]:
    out = []
    for p in form:
        if not (isinstance(p, list) and len(p) == 2):
            raise ValueError(f"bad parameter form: {p}")
        out.append(Param(p[0], _parse_type_atom(p[1])))
    return tuple(out)


def _parse_expr(form) -> Expr:
    if isinstance(form, str):
        return Var(form)
    if not form or not isinstance(form[0], str):
        raise ValueError(f"bad expression form: {form}")
    head = form[0]
    if head == "const":
        t = _parse_type_atom(form[1])
        data = tuple(_parse_scalar_atom(t.dtype, tok) for tok in form[2:])
        if len(data) != volume(t.shape):
            raise ValueError(f"constant data length mismatch: {form}")
        return Const(TensorValue(t.dtype, t.shape, data))
    if head == "prim":
        return Prim(form[1], tuple(_parse_expr(a) for a in form[2:]))
    if head == "let":
        if len(form) != 4:
            raise ValueError(f"let takes name, value, body: {form}")
        return Let(form[1], _parse_expr(form[2]), _parse_expr(form[3]))
    if head == "fnref":
        return FuncRef(form[1])
    if head == "call":
        return CallExpr(_parse_expr(form[1]), tuple(_parse_expr(a) for a in form[2:]))
    if head == "closure":
        return Closure(_parse_params(form[1]), _parse_expr(form[2]))
    if head == "tuple":
        return TupleExpr(tuple(_parse_expr(f) for f in form[1:]))
    if head == "proj":
        return Proj(_parse_expr(form[1]), int(form[2]))
    raise ValueError(f"unknown expression head: {head}")


def parse_module(text: str) -> IrModule:
    r = _Reader(_tokens(text))
    funcs: Dict[str, GlobalFunc] = {}
    while r.peek() is not None:
        form = _read_sexpr(r)
        if not (isinstance(form, list) and form and form[0] == "fn"):
            raise ValueError(f"top-level forms must be (fn ...): {form}")
        name = form[1]
        if name in funcs:
            raise ValueError(f"duplicate global {name}")
        funcs[name] = GlobalFunc(name, _parse_params(form[2]), _parse_expr(form[3]))
    if "main" not in funcs:
        raise ValueError("module has no main")
    return IrModule(funcs)
