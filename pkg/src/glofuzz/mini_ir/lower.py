"""Lowering from the graph form to the expression IR.

Naming scheme (all derived from node ids, so binders are unique):
  x{nid}  value of node nid (main binding, or a let inside a function body)
  p{nid}  function parameter standing for outside node nid
  f{nid}  global function lowered from function node nid
  n{nid}  raw tuple returned by the call at node nid

Function globals come first (in node-id order), then main. Functions
return a tuple of their output nodes; a call projects the field its
node designates. Main's parameters are the graph's variables in id
order and its result is a tuple of every visible value node that no
other node consumes, in id order.

Grouping nodes into a function hides them from later operand pools but
stays transparent to dataflow: a node created before the grouping may
reference a node that ended up inside a body. Main therefore also binds
any hidden node a main-level binding transitively needs, duplicating
that slice of the body outside the call.

Lowering is purely structural: integrity problems (dtype/shape/
admissibility) are left for type inference to report. A body node that
reaches outside the declared inputs is malformed beyond repair and
raises ValueError.
"""

from __future__ import annotations

from typing import Dict, List, Tuple

from ..graph import Call, Constant, Function, Graph, Operator, Variable
from .ir import (
    CallExpr,
    Const,
    Expr,
    FuncRef,
    GlobalFunc,
    IrModule,
    Let,
    Param,
    Prim,
    Proj,
    TensorType,
    TupleExpr,
    Var,
)


def _chain(bindings: List[Tuple[str, Expr]], result: Expr) -> Expr:
    for name, value in reversed(bindings):
        result = Let(name, value, result)
    return result


def _lower_function(g: Graph, fid: int, fn: Function) -> GlobalFunc:
    params = tuple(
        Param(f"p{i}", TensorType(g.infos[i].dtype, g.infos[i].shape))
        for i in fn.inputs
    )
    inputs = set(fn.inputs)

    def ref(nid: int) -> Var:
        if nid in fn.body:
            return Var(f"x{nid}")
        if nid in inputs:
            return Var(f"p{nid}")
        raise ValueError(
            f"function {fid}: body references node {nid} outside body and inputs"
        )

    bindings: List[Tuple[str, Expr]] = []
    for nid in sorted(fn.body):
        node = g.nodes[nid]
        if isinstance(node, Constant):
            value: Expr = Const(node.value)
        else:
            assert isinstance(node, Operator)
            value = Prim(node.op, tuple(ref(p) for p in node.parents))
        bindings.append((f"x{nid}", value))
    result = TupleExpr(tuple(Var(f"x{o}") for o in fn.outputs))
    return GlobalFunc(f"f{fid}", params, _chain(bindings, result))


def lower(g: Graph) -> IrModule:
    funcs: Dict[str, GlobalFunc] = {}
    for fid, node in enumerate(g.nodes):
        if isinstance(node, Function):
            fn = _lower_function(g, fid, node)
            funcs[fn.name] = fn

    hidden = g.hidden()
    needed: set = set()
    stack: List[int] = []

    def need(ids) -> None:
        for i in ids:
            if i in hidden and i not in needed:
                needed.add(i)
                stack.append(i)

    for nid, node in enumerate(g.nodes):
        if nid in hidden:
            continue
        if isinstance(node, Operator):
            need(node.parents)
        elif isinstance(node, Call):
            callee = g.nodes[node.func]
            assert isinstance(callee, Function)
            need(callee.inputs)
    while stack:
        inner = g.nodes[stack.pop()]
        if isinstance(inner, Operator):
            need(inner.parents)

    params: List[Param] = []
    bindings: List[Tuple[str, Expr]] = []
    for nid, node in enumerate(g.nodes):
        if (nid in hidden and nid not in needed) or isinstance(node, Function):
            continue
        if isinstance(node, Variable):
            params.append(Param(f"x{nid}", TensorType(node.dtype, node.shape)))
        elif isinstance(node, Constant):
            bindings.append((f"x{nid}", Const(node.value)))
        elif isinstance(node, Operator):
            prim = Prim(node.op, tuple(Var(f"x{p}") for p in node.parents))
            bindings.append((f"x{nid}", prim))
        else:
            assert isinstance(node, Call)
            callee = g.nodes[node.func]
            assert isinstance(callee, Function)
            call = CallExpr(
                FuncRef(f"f{node.func}"),
                tuple(Var(f"x{i}") for i in callee.inputs),
            )
            bindings.append((f"n{nid}", call))
            field = callee.outputs.index(node.output)
            bindings.append((f"x{nid}", Proj(Var(f"n{nid}"), field)))

    result = TupleExpr(tuple(Var(f"x{s}") for s in g.sinks()))
    funcs["main"] = GlobalFunc("main", tuple(params), _chain(bindings, result))
    return IrModule(funcs)
