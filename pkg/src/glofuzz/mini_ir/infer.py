"""Type inference over the expression IR.

Produces a new module with every sub-expression annotated and every
global's return type filled in. Integrity failures raise IrTypeError with
a structured, dedup-friendly trace line:

    ERROR <kind> at <expr-path>: <message>

Kinds: DtypeMismatch, ShapeMismatch, Inadmissible, ArityMismatch.
Malformed scope (unbound names, projections off non-tuples) raises
ValueError instead: those are bugs in whoever built the module, not
behaviors under test.
"""

from __future__ import annotations

from typing import Dict, List

from .. import opset
from ..dtypes import ShapeMismatchError, broadcast_shapes
from .ir import (
    CallExpr,
    Closure,
    Const,
    Expr,
    FuncRef,
    FuncType,
    GlobalFunc,
    IrModule,
    Let,
    Prim,
    Proj,
    TensorType,
    TupleExpr,
    TupleType,
    Type,
    Var,
)


class IrTypeError(Exception):
    def __init__(self, kind: str, path: str, message: str):
        super().__init__(f"ERROR {kind} at {path}: {message}")
        self.kind = kind
        self.path = path
        self.message = message

    @property
    def trace(self) -> str:
        return str(self)


def _type_name(t: Type) -> str:
    if isinstance(t, TensorType):
        return f"{t.dtype.value}[{','.join(str(d) for d in t.shape)}]"
    if isinstance(t, TupleType):
        return "(" + ", ".join(_type_name(f) for f in t.fields) + ")"
    return "fn(" + ", ".join(_type_name(p) for p in t.params) + ")"


class _Inferencer:
    def __init__(self, module: IrModule):
        self.module = module
        self.global_types: Dict[str, FuncType] = {}
        self.typed: Dict[str, GlobalFunc] = {}
        self.in_progress: List[str] = []

    def run(self) -> IrModule:
        for name in self.module.funcs:
            self.global_func(name)
        return IrModule({name: self.typed[name] for name in self.module.funcs})

    def global_func(self, name: str) -> FuncType:
        if name in self.global_types:
            return self.global_types[name]
        if name not in self.module.funcs:
            raise ValueError(f"unknown global {name}")
        if name in self.in_progress:
            raise ValueError(f"recursive global {name}")
        self.in_progress.append(name)
        fn = self.module.funcs[name]
        env: Dict[str, Type] = {p.name: p.ty for p in fn.params}
        body = self.expr(fn.body, env, [name])
        fty = FuncType(tuple(p.ty for p in fn.params), body.ty)
        self.global_types[name] = fty
        self.typed[name] = GlobalFunc(fn.name, fn.params, body, ret=body.ty)
        self.in_progress.pop()
        return fty

    def expr(self, e: Expr, env: Dict[str, Type], path: List[str]) -> Expr:
        if isinstance(e, Var):
            if e.name not in env:
                raise ValueError(f"unbound variable {e.name} at {'/'.join(path)}")
            return Var(e.name, ty=env[e.name])
        if isinstance(e, Const):
            return Const(e.value, ty=TensorType(e.value.dtype, e.value.shape))
        if isinstance(e, Prim):
            return self._prim(e, env, path)
        if isinstance(e, Let):
            value = self.expr(e.value, env, path + [f"let[{e.name}]"])
            env[e.name] = value.ty
            body = self.expr(e.body, env, path)
            return Let(e.name, value, body, ty=body.ty)
        if isinstance(e, FuncRef):
            return FuncRef(e.name, ty=self.global_func(e.name))
        if isinstance(e, CallExpr):
            return self._call(e, env, path)
        if isinstance(e, Closure):
            inner = dict(env)
            inner.update({p.name: p.ty for p in e.params})
            body = self.expr(e.body, inner, path + ["closure"])
            return Closure(e.params, body, ty=FuncType(tuple(p.ty for p in e.params), body.ty))
        if isinstance(e, TupleExpr):
            fields = tuple(
                self.expr(f, env, path + [f"field{i}"]) for i, f in enumerate(e.fields)
            )
            return TupleExpr(fields, ty=TupleType(tuple(f.ty for f in fields)))
        assert isinstance(e, Proj)
        tup = self.expr(e.tup, env, path + ["tup"])
        if not isinstance(tup.ty, TupleType):
            raise ValueError(f"projection off a non-tuple at {'/'.join(path)}")
        if not (0 <= e.index < len(tup.ty.fields)):
            raise ValueError(f"projection index {e.index} out of range at {'/'.join(path)}")
        return Proj(tup, e.index, ty=tup.ty.fields[e.index])

    def _prim(self, e: Prim, env: Dict[str, Type], path: List[str]) -> Expr:
        here = "/".join(path + [f"prim[{e.op}]"])
        spec = opset.get_spec(e.op)
        args = tuple(
            self.expr(a, env, path + [f"prim[{e.op}]", f"arg{i}"])
            for i, a in enumerate(e.args)
        )
        if len(args) != spec.arity:
            raise IrTypeError(
                "ArityMismatch", here, f"{e.op} takes {spec.arity} operands, got {len(args)}"
            )
        for a in args:
            if not isinstance(a.ty, TensorType):
                raise IrTypeError(
                    "DtypeMismatch", here, f"operand is not a tensor: {_type_name(a.ty)}"
                )
        dts = [a.ty.dtype for a in args]
        if any(d is not dts[0] for d in dts):
            raise IrTypeError(
                "DtypeMismatch",
                here,
                "operand dtypes differ: " + ", ".join(d.value for d in dts),
            )
        if dts[0] not in spec.admissible:
            raise IrTypeError(
                "Inadmissible", here, f"{e.op} does not admit {dts[0].value}"
            )
        shape = args[0].ty.shape
        for a in args[1:]:
            try:
                shape = broadcast_shapes(shape, a.ty.shape)
            except ShapeMismatchError as exc:
                raise IrTypeError("ShapeMismatch", here, str(exc)) from exc
        return Prim(e.op, args, ty=TensorType(spec.result_dtype(dts[0]), shape))

    def _call(self, e: CallExpr, env: Dict[str, Type], path: List[str]) -> Expr:
        here = "/".join(path + ["call"])
        callee = self.expr(e.callee, env, path + ["callee"])
        if not isinstance(callee.ty, FuncType):
            raise ValueError(f"callee is not a function at {here}")
        args = tuple(
            self.expr(a, env, path + ["call", f"arg{i}"]) for i, a in enumerate(e.args)
        )
        if len(args) != len(callee.ty.params):
            raise IrTypeError(
                "ArityMismatch",
                here,
                f"call passes {len(args)} arguments, callee takes {len(callee.ty.params)}",
            )
        for i, (a, p) in enumerate(zip(args, callee.ty.params)):
            if a.ty == p:
                continue
            if (
                isinstance(a.ty, TensorType)
                and isinstance(p, TensorType)
                and a.ty.dtype is p.dtype
            ):
                kind = "ShapeMismatch"
            else:
                kind = "DtypeMismatch"
            raise IrTypeError(
                kind,
                here,
                f"argument {i} has type {_type_name(a.ty)}, parameter wants {_type_name(p)}",
            )
        return CallExpr(callee, args, ty=callee.ty.result)


def infer_types(m: IrModule) -> IrModule:
    return _Inferencer(m).run()
