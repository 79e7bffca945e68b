"""Semantics-preserving module mutations.

Each strategy rewrites call structure without changing any computed
value, giving the optimizer a differently shaped module that must still
produce identical results:

  1  route one call through a fresh forwarding global: g(..) calls f(..)
     and the chosen site calls g instead.
  2  route one call through a function-returning global: g() returns f
     as a value and the chosen site becomes ((g())(args)).
  3  convert every direct call of one global into a call of an inline
     closure carrying a freshly renamed copy of its body; the global
     itself is dropped once nothing references it anymore.

mutate raises NoTarget when the module has no applicable call site.
"""

from __future__ import annotations

import random
from typing import Callable, Dict, List, Tuple

from .ir import (
    CallExpr,
    Closure,
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
    fresh_namer,
    walk,
)
from .passes import _build_spine, _rename, _split_spine

MUTATION_STRATEGIES = (1, 2, 3)


class NoTarget(Exception):
    """The module has no call site the strategy could apply to."""


def _rewrite_calls(e: Expr, visit: Callable[[CallExpr], Expr]) -> Expr:
    """Rebuild e, replacing each CallExpr with visit's answer. visit
    receives calls in deterministic traversal order (spine, then leaf,
    children left to right, callee before arguments)."""
    if isinstance(e, Let):
        bindings, leaf = _split_spine(e)
        out = [(name, _rewrite_calls(value, visit)) for name, value in bindings]
        return _build_spine(out, _rewrite_calls(leaf, visit))
    if isinstance(e, Prim):
        return Prim(e.op, tuple(_rewrite_calls(a, visit) for a in e.args))
    if isinstance(e, CallExpr):
        callee = _rewrite_calls(e.callee, visit)
        args = tuple(_rewrite_calls(a, visit) for a in e.args)
        return visit(CallExpr(callee, args))
    if isinstance(e, Closure):
        return Closure(e.params, _rewrite_calls(e.body, visit))
    if isinstance(e, TupleExpr):
        return TupleExpr(tuple(_rewrite_calls(f, visit) for f in e.fields))
    if isinstance(e, Proj):
        return Proj(_rewrite_calls(e.tup, visit), e.index)
    return e


def _direct_call_sites(m: IrModule) -> List[Tuple[str, int, str]]:
    """(function name, site index within it, callee name) for every call
    whose callee is a bare global reference, in traversal order."""
    sites: List[Tuple[str, int, str]] = []

    for fname, fn in m.funcs.items():
        index = [0]

        def visit(call: CallExpr) -> Expr:
            if isinstance(call.callee, FuncRef):
                sites.append((fname, index[0], call.callee.name))
                index[0] += 1
            return call

        _rewrite_calls(fn.body, visit)
    return sites


def _rewrite_direct_site(
    m: IrModule, fname: str, site: int, rewrite: Callable[[CallExpr], Expr]
) -> IrModule:
    fn = m.funcs[fname]
    index = [0]

    def visit(call: CallExpr) -> Expr:
        if not isinstance(call.callee, FuncRef):
            return call
        here = index[0]
        index[0] += 1
        return rewrite(call) if here == site else call

    return m.replace(GlobalFunc(fn.name, fn.params, _rewrite_calls(fn.body, visit)))


def _append_global(m: IrModule, fn: GlobalFunc) -> IrModule:
    funcs = dict(m.funcs)
    funcs[fn.name] = fn
    return IrModule(funcs)


def _pick_site(m: IrModule, rng: random.Random) -> Tuple[str, int, str]:
    sites = _direct_call_sites(m)
    if not sites:
        raise NoTarget("module has no direct call site")
    return sites[rng.randrange(len(sites))]


def _forwarding_wrapper(m: IrModule, rng: random.Random) -> IrModule:
    fname, site, callee = _pick_site(m, rng)
    target = m.funcs[callee]
    gname = fresh_namer(m, "g")()
    wrapper = GlobalFunc(
        gname,
        target.params,
        CallExpr(FuncRef(callee), tuple(Var(p.name) for p in target.params)),
    )
    m = _rewrite_direct_site(
        m, fname, site, lambda call: CallExpr(FuncRef(gname), call.args)
    )
    return _append_global(m, wrapper)


def _function_value_wrapper(m: IrModule, rng: random.Random) -> IrModule:
    fname, site, callee = _pick_site(m, rng)
    gname = fresh_namer(m, "g")()
    wrapper = GlobalFunc(gname, (), FuncRef(callee))
    m = _rewrite_direct_site(
        m,
        fname,
        site,
        lambda call: CallExpr(CallExpr(FuncRef(gname), ()), call.args),
    )
    return _append_global(m, wrapper)


def _closure_conversion(m: IrModule, rng: random.Random) -> IrModule:
    sites = _direct_call_sites(m)
    callables = sorted({callee for _, _, callee in sites if callee != "main"})
    if not callables:
        raise NoTarget("module has no direct call site")
    target_name = callables[rng.randrange(len(callables))]
    target = m.funcs[target_name]
    fresh = fresh_namer(m, "q")

    def closure_copy() -> Closure:
        mapping: Dict[str, str] = {p.name: fresh() for p in target.params}
        for node in walk(target.body):
            if isinstance(node, Let):
                mapping[node.name] = fresh()
            elif isinstance(node, Closure):
                for p in node.params:
                    mapping[p.name] = fresh()
        params = tuple(Param(mapping[p.name], p.ty) for p in target.params)
        return Closure(params, _rename(target.body, mapping))

    def visit(call: CallExpr) -> Expr:
        if isinstance(call.callee, FuncRef) and call.callee.name == target_name:
            return CallExpr(closure_copy(), call.args)
        return call

    funcs = {
        name: GlobalFunc(fn.name, fn.params, _rewrite_calls(fn.body, visit))
        for name, fn in m.funcs.items()
    }
    out = IrModule(funcs)
    still_referenced = any(
        isinstance(e, FuncRef) and e.name == target_name
        for fn in out.funcs.values()
        for e in walk(fn.body)
    )
    if not still_referenced:
        del out.funcs[target_name]
    return out


_STRATEGIES = {
    1: _forwarding_wrapper,
    2: _function_value_wrapper,
    3: _closure_conversion,
}


def mutate(m: IrModule, rng: random.Random, strategy: int) -> IrModule:
    if strategy not in _STRATEGIES:
        raise ValueError(f"unknown mutation strategy {strategy}")
    return _STRATEGIES[strategy](m, rng)
