"""Three execution strategies for the expression IR.

tree   walks the expression tree directly with environment dicts; the
       reference semantics everything else is judged against.
graph  partially evaluates the module into a flat tape of tensor
       instructions (inlining every call), then runs the tape.
vm     compiles each global to stack bytecode and interprets it on an
       explicit frame stack.

All three take the elementwise evaluator as a parameter so a harness can
swap in an instrumented one. Let-spines are walked iteratively; Python
recursion is only ever as deep as genuine expression nesting, which stays
shallow in practice.

Execution is untyped: annotations are ignored, and structural problems
(unbound names, calling a tensor, projecting off a non-tuple, arity
mismatches) raise ValueError.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence, Tuple, Union

from ..dtypes import TensorValue
from ..opset import eval_elementwise
from .ir import (
    CallExpr,
    Closure,
    Const,
    Expr,
    FuncRef,
    GlobalFunc,
    IrModule,
    Let,
    Param,
    Prim,
    Proj,
    TupleExpr,
    Var,
)

PrimEval = Callable[[str, Sequence[TensorValue]], TensorValue]

BACKENDS = ("tree", "graph", "vm")


@dataclass(frozen=True)
class FuncRefValue:
    name: str


@dataclass(frozen=True, eq=False)
class ClosureValue:
    params: Tuple[Param, ...]
    body: Expr
    env: Dict[str, "RunValue"]


RunValue = Union[TensorValue, FuncRefValue, ClosureValue, Tuple["RunValue", ...]]


def _bind_args(params: Tuple[Param, ...], args: Sequence[RunValue]) -> Dict[str, RunValue]:
    if len(args) != len(params):
        raise ValueError(f"call passes {len(args)} arguments, callee takes {len(params)}")
    return {p.name: a for p, a in zip(params, args)}


# -- tree ----------------------------------------------------------------------


def _tree_eval(e: Expr, env: Dict[str, RunValue], m: IrModule, pe: PrimEval) -> RunValue:
    while isinstance(e, Let):
        env[e.name] = _tree_eval(e.value, env, m, pe)
        e = e.body
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise ValueError(f"unbound variable {e.name}") from None
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Prim):
        return pe(e.op, [_tree_eval(a, env, m, pe) for a in e.args])
    if isinstance(e, FuncRef):
        if e.name not in m.funcs:
            raise ValueError(f"unknown global {e.name}")
        return FuncRefValue(e.name)
    if isinstance(e, CallExpr):
        callee = _tree_eval(e.callee, env, m, pe)
        args = [_tree_eval(a, env, m, pe) for a in e.args]
        if isinstance(callee, FuncRefValue):
            fn = m.funcs[callee.name]
            return _tree_eval(fn.body, _bind_args(fn.params, args), m, pe)
        if isinstance(callee, ClosureValue):
            inner = dict(callee.env)
            inner.update(_bind_args(callee.params, args))
            return _tree_eval(callee.body, inner, m, pe)
        raise ValueError(f"calling a non-function value: {callee!r}")
    if isinstance(e, Closure):
        return ClosureValue(e.params, e.body, dict(env))
    if isinstance(e, TupleExpr):
        return tuple(_tree_eval(f, env, m, pe) for f in e.fields)
    assert isinstance(e, Proj)
    tup = _tree_eval(e.tup, env, m, pe)
    if not isinstance(tup, tuple):
        raise ValueError("projection off a non-tuple value")
    if not (0 <= e.index < len(tup)):
        raise ValueError(f"projection index {e.index} out of range")
    return tup[e.index]


# -- graph ---------------------------------------------------------------------

# Flatten-values: tensors become int tape slots; tuples/function values
# stay symbolic. Nothing else is an int, so the slot encoding is unambiguous.


def _as_slot(v: RunValue) -> int:
    if not isinstance(v, int):
        raise ValueError(f"operator applied to a non-tensor value: {v!r}")
    return v


def _flatten(e: Expr, env: Dict, m: IrModule, tape: List) -> RunValue:
    while isinstance(e, Let):
        env[e.name] = _flatten(e.value, env, m, tape)
        e = e.body
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise ValueError(f"unbound variable {e.name}") from None
    if isinstance(e, Const):
        tape.append(("const", e.value))
        return len(tape) - 1
    if isinstance(e, Prim):
        slots = tuple(_as_slot(_flatten(a, env, m, tape)) for a in e.args)
        tape.append(("prim", e.op, slots))
        return len(tape) - 1
    if isinstance(e, FuncRef):
        if e.name not in m.funcs:
            raise ValueError(f"unknown global {e.name}")
        return FuncRefValue(e.name)
    if isinstance(e, CallExpr):
        callee = _flatten(e.callee, env, m, tape)
        args = [_flatten(a, env, m, tape) for a in e.args]
        if isinstance(callee, FuncRefValue):
            fn = m.funcs[callee.name]
            return _flatten(fn.body, _bind_args(fn.params, args), m, tape)
        if isinstance(callee, ClosureValue):
            inner = dict(callee.env)
            inner.update(_bind_args(callee.params, args))
            return _flatten(callee.body, inner, m, tape)
        raise ValueError(f"calling a non-function value: {callee!r}")
    if isinstance(e, Closure):
        return ClosureValue(e.params, e.body, dict(env))
    if isinstance(e, TupleExpr):
        return tuple(_flatten(f, env, m, tape) for f in e.fields)
    assert isinstance(e, Proj)
    tup = _flatten(e.tup, env, m, tape)
    if not isinstance(tup, tuple):
        raise ValueError("projection off a non-tuple value")
    if not (0 <= e.index < len(tup)):
        raise ValueError(f"projection index {e.index} out of range")
    return tup[e.index]


def _run_tape(tape: List, pe: PrimEval) -> List[TensorValue]:
    values: List[TensorValue] = []
    for instr in tape:
        if instr[0] == "const":
            values.append(instr[1])
        else:
            _, op, slots = instr
            values.append(pe(op, [values[s] for s in slots]))
    return values


def _materialize(v: RunValue, values: List[TensorValue]) -> RunValue:
    if isinstance(v, int):
        return values[v]
    if isinstance(v, tuple):
        return tuple(_materialize(f, values) for f in v)
    return v


def _graph_run(m: IrModule, args: Sequence[TensorValue], pe: PrimEval) -> RunValue:
    tape: List = []
    env: Dict = {}
    for p, a in zip(m.main.params, args):
        tape.append(("const", a))
        env[p.name] = len(tape) - 1
    result = _flatten(m.main.body, env, m, tape)
    return _materialize(result, _run_tape(tape, pe))


# -- vm ------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class _VmClosure:
    params: Tuple[Param, ...]
    code: Tuple
    captures: Dict[str, RunValue]


def _compile(e: Expr, out: List) -> None:
    while isinstance(e, Let):
        _compile(e.value, out)
        out.append(("store", e.name))
        e = e.body
    if isinstance(e, Var):
        out.append(("load", e.name))
    elif isinstance(e, Const):
        out.append(("push", e.value))
    elif isinstance(e, Prim):
        for a in e.args:
            _compile(a, out)
        out.append(("prim", e.op, len(e.args)))
    elif isinstance(e, FuncRef):
        out.append(("fnref", e.name))
    elif isinstance(e, CallExpr):
        _compile(e.callee, out)
        for a in e.args:
            _compile(a, out)
        out.append(("call", len(e.args)))
    elif isinstance(e, Closure):
        body: List = []
        _compile(e.body, body)
        out.append(("closure", e.params, tuple(body)))
    elif isinstance(e, TupleExpr):
        for f in e.fields:
            _compile(f, out)
        out.append(("tuple", len(e.fields)))
    else:
        assert isinstance(e, Proj)
        _compile(e.tup, out)
        out.append(("proj", e.index))


def _compile_global(fn: GlobalFunc) -> Tuple:
    out: List = []
    _compile(fn.body, out)
    return tuple(out)


class _Frame:
    __slots__ = ("code", "pc", "locals", "stack")

    def __init__(self, code: Tuple, local_env: Dict[str, RunValue]):
        self.code = code
        self.pc = 0
        self.locals = local_env
        self.stack: List[RunValue] = []


def _vm_run(m: IrModule, args: Sequence[TensorValue], pe: PrimEval) -> RunValue:
    code_cache: Dict[str, Tuple] = {}

    def code_for(name: str) -> Tuple:
        if name not in code_cache:
            if name not in m.funcs:
                raise ValueError(f"unknown global {name}")
            code_cache[name] = _compile_global(m.funcs[name])
        return code_cache[name]

    frames = [_Frame(code_for("main"), _bind_args(m.main.params, args))]
    while True:
        frame = frames[-1]
        if frame.pc >= len(frame.code):
            if len(frame.stack) != 1:
                raise ValueError("frame ended with an unbalanced stack")
            result = frame.stack.pop()
            frames.pop()
            if not frames:
                return result
            frames[-1].stack.append(result)
            continue
        instr = frame.code[frame.pc]
        frame.pc += 1
        tag = instr[0]
        if tag == "load":
            try:
                frame.stack.append(frame.locals[instr[1]])
            except KeyError:
                raise ValueError(f"unbound variable {instr[1]}") from None
        elif tag == "store":
            frame.locals[instr[1]] = frame.stack.pop()
        elif tag == "push":
            frame.stack.append(instr[1])
        elif tag == "prim":
            _, op, argc = instr
            operands = frame.stack[-argc:]
            del frame.stack[-argc:]
            frame.stack.append(pe(op, operands))
        elif tag == "fnref":
            if instr[1] not in m.funcs:
                raise ValueError(f"unknown global {instr[1]}")
            frame.stack.append(FuncRefValue(instr[1]))
        elif tag == "call":
            argc = instr[1]
            call_args = frame.stack[-argc:] if argc else []
            if argc:
                del frame.stack[-argc:]
            callee = frame.stack.pop()
            if isinstance(callee, FuncRefValue):
                fn = m.funcs[callee.name]
                frames.append(
                    _Frame(code_for(callee.name), _bind_args(fn.params, call_args))
                )
            elif isinstance(callee, _VmClosure):
                local_env = dict(callee.captures)
                local_env.update(_bind_args(callee.params, call_args))
                frames.append(_Frame(callee.code, local_env))
            else:
                raise ValueError(f"calling a non-function value: {callee!r}")
        elif tag == "closure":
            _, params, code = instr
            frame.stack.append(_VmClosure(params, code, dict(frame.locals)))
        elif tag == "tuple":
            n = instr[1]
            fields = tuple(frame.stack[-n:]) if n else ()
            if n:
                del frame.stack[-n:]
            frame.stack.append(fields)
        else:
            assert tag == "proj"
            tup = frame.stack.pop()
            if not isinstance(tup, tuple):
                raise ValueError("projection off a non-tuple value")
            if not (0 <= instr[1] < len(tup)):
                raise ValueError(f"projection index {instr[1]} out of range")
            frame.stack.append(tup[instr[1]])


# -- dispatch ------------------------------------------------------------------


def run_module(
    m: IrModule,
    args: Sequence[TensorValue],
    backend: str = "tree",
    prim_eval: PrimEval = eval_elementwise,
) -> RunValue:
    """Run main on positional arguments and return its result value
    (nested tuples of tensors)."""
    if len(args) != len(m.main.params):
        raise ValueError(
            f"main takes {len(m.main.params)} arguments, got {len(args)}"
        )
    if backend == "tree":
        return _tree_eval(m.main.body, _bind_args(m.main.params, args), m, prim_eval)
    if backend == "graph":
        return _graph_run(m, args, prim_eval)
    if backend == "vm":
        return _vm_run(m, args, prim_eval)
    raise ValueError(f"unknown backend {backend!r}")
