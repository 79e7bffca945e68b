"""Optimization passes over the expression IR.

Every pass maps a type-valid module to a semantically equivalent module.
Rewrites that are only exact for some dtypes are gated accordingly:
float addition of zero is not an identity (signed zeros), multiplying a
float by zero is not zero (nan, inf), so those rules fire on ints only;
multiplying by one is exact for ints and floats alike. Rules that drop
or duplicate an operand also check the inferred type so broadcasting
never changes under the rewrite.

The _*_with helpers expose the pass's one policy knob (the fold
evaluator, the dedup key, the liveness threshold, the argument binding)
so harness code can install deliberately broken variants.
"""

from __future__ import annotations

from collections import Counter
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from ..dtypes import TensorValue
from ..opset import eval_elementwise
from .infer import infer_types
from .ir import (
    CallExpr,
    Closure,
    Const,
    Expr,
    FuncRef,
    GlobalFunc,
    IrModule,
    Let,
    Prim,
    Proj,
    TensorType,
    TupleExpr,
    Var,
    expr_size,
    fresh_namer,
    walk,
)

PASS_NAMES = (
    "fold_constant",
    "eliminate_common_subexpr",
    "dead_code_elimination",
    "inline",
    "simplify_expr",
    "to_a_normal_form",
    "canonicalize",
)

Binding = Tuple[str, Expr]


def _split_spine(e: Expr) -> Tuple[List[Binding], Expr]:
    bindings: List[Binding] = []
    while isinstance(e, Let):
        bindings.append((e.name, e.value))
        e = e.body
    return bindings, e


def _build_spine(bindings: Sequence[Binding], leaf: Expr) -> Expr:
    for name, value in reversed(bindings):
        leaf = Let(name, value, leaf)
    return leaf


def _is_atom(e: Expr) -> bool:
    return isinstance(e, (Var, Const, FuncRef))


def _rename(e: Expr, mp: Dict[str, str]) -> Expr:
    """Rename variables, binders, and closure parameters per mp. Names
    are unique module-wide, so this is capture-free."""
    if isinstance(e, Let):
        bindings, leaf = _split_spine(e)
        renamed = [(mp.get(n, n), _rename(v, mp)) for n, v in bindings]
        return _build_spine(renamed, _rename(leaf, mp))
    if isinstance(e, Var):
        return Var(mp.get(e.name, e.name))
    if isinstance(e, (Const, FuncRef)):
        return e
    if isinstance(e, Prim):
        return Prim(e.op, tuple(_rename(a, mp) for a in e.args))
    if isinstance(e, CallExpr):
        return CallExpr(_rename(e.callee, mp), tuple(_rename(a, mp) for a in e.args))
    if isinstance(e, Closure):
        params = tuple(
            p if p.name not in mp else type(p)(mp[p.name], p.ty) for p in e.params
        )
        return Closure(params, _rename(e.body, mp))
    if isinstance(e, TupleExpr):
        return TupleExpr(tuple(_rename(f, mp) for f in e.fields))
    assert isinstance(e, Proj)
    return Proj(_rename(e.tup, mp), e.index)


def _var_counts(e: Expr) -> Counter:
    return Counter(n.name for n in walk(e) if isinstance(n, Var))


def _map_func_bodies(m: IrModule, f: Callable[[GlobalFunc], Expr]) -> IrModule:
    return IrModule(
        {
            name: GlobalFunc(fn.name, fn.params, f(fn))
            for name, fn in m.funcs.items()
        }
    )


# -- constant folding ----------------------------------------------------------


def _fold_with(m: IrModule, evaluator) -> IrModule:
    def fold_expr(e: Expr, consts: Dict[str, Const]) -> Expr:
        if isinstance(e, Let):
            bindings, leaf = _split_spine(e)
            out: List[Binding] = []
            for name, value in bindings:
                value = fold_expr(value, consts)
                if isinstance(value, Const):
                    consts[name] = value
                out.append((name, value))
            return _build_spine(out, fold_expr(leaf, consts))
        if isinstance(e, Var):
            return consts.get(e.name, e)
        if isinstance(e, (Const, FuncRef)):
            return e
        if isinstance(e, Prim):
            args = tuple(fold_expr(a, consts) for a in e.args)
            if all(isinstance(a, Const) for a in args):
                return Const(evaluator(e.op, [a.value for a in args]))
            return Prim(e.op, args)
        if isinstance(e, CallExpr):
            return CallExpr(
                fold_expr(e.callee, consts),
                tuple(fold_expr(a, consts) for a in e.args),
            )
        if isinstance(e, Closure):
            return Closure(e.params, fold_expr(e.body, dict(consts)))
        if isinstance(e, TupleExpr):
            return TupleExpr(tuple(fold_expr(f, consts) for f in e.fields))
        assert isinstance(e, Proj)
        return Proj(fold_expr(e.tup, consts), e.index)

    return _map_func_bodies(m, lambda fn: fold_expr(fn.body, {}))


def fold_constant(m: IrModule) -> IrModule:
    """Evaluate operators whose operands are all constants, propagating
    constant bindings forward through let-chains."""
    return _fold_with(m, eval_elementwise)


# -- A-normal form -------------------------------------------------------------


def to_a_normal_form(m: IrModule) -> IrModule:
    """Flatten each function body into a single let-spine whose bound
    values have only atomic (variable/constant/function-name) operands."""
    fresh = fresh_namer(m, "t")

    def to_flat(e: Expr, emit: List[Binding]) -> Expr:
        while isinstance(e, Let):
            emit.append((e.name, to_flat(e.value, emit)))
            e = e.body
        if _is_atom(e):
            return e
        if isinstance(e, Prim):
            return Prim(e.op, tuple(to_atom(a, emit) for a in e.args))
        if isinstance(e, CallExpr):
            return CallExpr(
                to_atom(e.callee, emit), tuple(to_atom(a, emit) for a in e.args)
            )
        if isinstance(e, Closure):
            return Closure(e.params, anf_body(e.body))
        if isinstance(e, TupleExpr):
            return TupleExpr(tuple(to_atom(f, emit) for f in e.fields))
        assert isinstance(e, Proj)
        return Proj(to_atom(e.tup, emit), e.index)

    def to_atom(e: Expr, emit: List[Binding]) -> Expr:
        flat = to_flat(e, emit)
        if _is_atom(flat):
            return flat
        name = fresh()
        emit.append((name, flat))
        return Var(name)

    def anf_body(e: Expr) -> Expr:
        emit: List[Binding] = []
        leaf = to_flat(e, emit)
        return _build_spine(emit, leaf)

    return _map_func_bodies(m, lambda fn: anf_body(fn.body))


# -- common-subexpression elimination -------------------------------------------


def _structural_key(e: Expr) -> Expr:
    return e


def _cse_with(m: IrModule, key: Callable[[Expr], object]) -> IrModule:
    m = to_a_normal_form(m)

    def dedup(e: Expr, seen: Dict[object, str], repl: Dict[str, str]) -> Expr:
        bindings, leaf = _split_spine(e)
        out: List[Binding] = []
        for name, value in bindings:
            value = _rename(value, repl)
            if isinstance(value, Closure):
                value = Closure(
                    value.params, dedup(value.body, dict(seen), dict(repl))
                )
            k = key(value)
            prior = seen.get(k)
            if prior is not None:
                repl[name] = prior
                continue
            seen[k] = name
            out.append((name, value))
        return _build_spine(out, _rename(leaf, repl))

    return _map_func_bodies(m, lambda fn: dedup(fn.body, {}, {}))


def eliminate_common_subexpr(m: IrModule) -> IrModule:
    """Normalize to A-normal form, then collapse bindings whose values
    are structurally identical, rewriting later uses to the survivor."""
    return _cse_with(m, _structural_key)


# -- dead code elimination -------------------------------------------------------


def _dce_with(m: IrModule, min_uses: int) -> IrModule:
    def sweep(e: Expr) -> Expr:
        bindings, leaf = _split_spine(e)
        leaf = clean(leaf)
        cleaned = [(name, clean(value)) for name, value in bindings]
        counts = _var_counts(leaf)
        kept: List[Binding] = []
        for name, value in reversed(cleaned):
            if counts[name] >= min_uses:
                counts.update(_var_counts(value))
                kept.append((name, value))
        kept.reverse()
        return _build_spine(kept, leaf)

    def clean(e: Expr) -> Expr:
        if isinstance(e, Let):
            return sweep(e)
        if isinstance(e, Prim):
            return Prim(e.op, tuple(clean(a) for a in e.args))
        if isinstance(e, CallExpr):
            return CallExpr(clean(e.callee), tuple(clean(a) for a in e.args))
        if isinstance(e, Closure):
            return Closure(e.params, sweep(e.body))
        if isinstance(e, TupleExpr):
            return TupleExpr(tuple(clean(f) for f in e.fields))
        if isinstance(e, Proj):
            return Proj(clean(e.tup), e.index)
        return e

    return _map_func_bodies(m, lambda fn: sweep(fn.body))


def dead_code_elimination(m: IrModule) -> IrModule:
    """Drop let bindings whose names are never referenced by live code.
    Globals are never removed: the module's entry points are external."""
    return _dce_with(m, 1)


# -- inlining --------------------------------------------------------------------


def _bind_positional(params, args):
    return list(zip(params, args))


def _inline_with(m: IrModule, bind, max_size: int) -> IrModule:
    fresh = fresh_namer(m, "i")

    def splice(fn: GlobalFunc, args: Sequence[Expr]) -> Expr:
        mapping: Dict[str, str] = {}
        for node in walk(fn.body):
            if isinstance(node, Let):
                mapping[node.name] = fresh()
            elif isinstance(node, Closure):
                for p in node.params:
                    mapping[p.name] = fresh()
        prologue: List[Binding] = []
        for param, arg in bind(fn.params, args):
            mapping[param.name] = fresh()
            prologue.append((mapping[param.name], arg))
        return _build_spine(prologue, _rename(fn.body, mapping))

    def rewrite(e: Expr) -> Expr:
        if isinstance(e, Let):
            bindings, leaf = _split_spine(e)
            out = [(name, rewrite(value)) for name, value in bindings]
            return _build_spine(out, rewrite(leaf))
        if isinstance(e, Prim):
            return Prim(e.op, tuple(rewrite(a) for a in e.args))
        if isinstance(e, CallExpr):
            callee = rewrite(e.callee)
            args = tuple(rewrite(a) for a in e.args)
            if (
                isinstance(callee, FuncRef)
                and callee.name in m.funcs
                and len(args) == len(m.funcs[callee.name].params)
                and expr_size(m.funcs[callee.name].body) <= max_size
            ):
                return splice(m.funcs[callee.name], args)
            return CallExpr(callee, args)
        if isinstance(e, Closure):
            return Closure(e.params, rewrite(e.body))
        if isinstance(e, TupleExpr):
            return TupleExpr(tuple(rewrite(f) for f in e.fields))
        if isinstance(e, Proj):
            return Proj(rewrite(e.tup), e.index)
        return e

    return _map_func_bodies(m, lambda fn: rewrite(fn.body))


def inline(m: IrModule) -> IrModule:
    """Replace calls to small globals (at most 32 expression nodes) with
    the callee body: arguments are let-bound to fresh names and every
    binder in the spliced body is renamed fresh."""
    return _inline_with(m, _bind_positional, 32)


# -- algebraic simplification -----------------------------------------------------


def _tensor_ty(e: Expr) -> Optional[TensorType]:
    ty = getattr(e, "ty", None)
    return ty if isinstance(ty, TensorType) else None


def _const_filled_like(ty: TensorType, scalar) -> Const:
    if ty.dtype.is_bool:
        scalar = bool(scalar)
    elif ty.dtype.is_float:
        scalar = float(scalar)
    return Const(TensorValue.filled(ty.dtype, ty.shape, scalar))


def _is_all(e: Expr, scalar) -> bool:
    return isinstance(e, Const) and all(v == scalar for v in e.value.data)


def _same_var(a: Expr, b: Expr) -> bool:
    return isinstance(a, Var) and isinstance(b, Var) and a.name == b.name


def simplify_expr(m: IrModule) -> IrModule:
    """Local algebraic rewrites, each gated so the replacement has the
    same type and bit-exact semantics as the original:

      x+0, 0+x, x-0        int only (float zero signs differ)
      x*0, 0*x -> zeros    int only (float nan/inf poison zero)
      x-x -> zeros         int only, deliberately skipping float
      x*1, 1*x             int and float (exact either way)
      negative(negative x) any admissible dtype (wraparound is involutive)
      and/or idempotence, and-true, or-false, not(not x)
    """
    m = infer_types(m)

    def defn(e: Expr, defs: Dict[str, Expr]) -> Expr:
        return defs.get(e.name, e) if isinstance(e, Var) else e

    def neutral(prim: Prim, a: Expr, b: Expr, scalar) -> Optional[Expr]:
        # b is the candidate neutral operand; a survives.
        if _is_all(b, scalar) and _tensor_ty(a) == _tensor_ty(prim) is not None:
            return a
        return None

    def rules(prim: Prim, defs: Dict[str, Expr]) -> Optional[Expr]:
        ty = _tensor_ty(prim)
        is_int = ty is not None and ty.dtype.is_int
        if prim.op in ("add", "subtract", "multiply"):
            a, b = prim.args
            if is_int:
                if prim.op in ("add", "subtract"):
                    out = neutral(prim, a, b, 0)
                    if out is None and prim.op == "add":
                        out = neutral(prim, b, a, 0)
                    if out is not None:
                        return out
                if prim.op == "subtract" and _same_var(a, b):
                    return _const_filled_like(ty, 0)
                if prim.op == "multiply" and (_is_all(a, 0) or _is_all(b, 0)):
                    return _const_filled_like(ty, 0)
            if prim.op == "multiply" and ty is not None and not ty.dtype.is_bool:
                out = neutral(prim, a, b, 1)
                if out is None:
                    out = neutral(prim, b, a, 1)
                if out is not None:
                    return out
        elif prim.op == "negative":
            inner = defn(prim.args[0], defs)
            if isinstance(inner, Prim) and inner.op == "negative":
                arg = inner.args[0]
                if _is_atom(arg) and _tensor_ty(arg) == ty is not None:
                    return arg
        elif prim.op in ("logical_and", "logical_or"):
            a, b = prim.args
            if _same_var(a, b) and _tensor_ty(a) == ty is not None:
                return a
            unit = prim.op == "logical_and"
            out = neutral(prim, a, b, unit)
            if out is None:
                out = neutral(prim, b, a, unit)
            if out is not None:
                return out
        elif prim.op == "logical_not":
            inner = defn(prim.args[0], defs)
            if isinstance(inner, Prim) and inner.op == "logical_not":
                arg = inner.args[0]
                if _is_atom(arg) and _tensor_ty(arg) == ty is not None:
                    return arg
        return None

    def simp(e: Expr, defs: Dict[str, Expr]) -> Expr:
        if isinstance(e, Let):
            bindings, leaf = _split_spine(e)
            out: List[Binding] = []
            for name, value in bindings:
                value = simp(value, defs)
                defs[name] = value
                out.append((name, value))
            return _build_spine(out, simp(leaf, defs))
        if isinstance(e, Prim):
            args = tuple(simp(a, defs) for a in e.args)
            prim = Prim(e.op, args, ty=e.ty)
            replacement = rules(prim, defs)
            return prim if replacement is None else replacement
        if isinstance(e, CallExpr):
            return CallExpr(
                simp(e.callee, defs), tuple(simp(a, defs) for a in e.args)
            )
        if isinstance(e, Closure):
            return Closure(e.params, simp(e.body, dict(defs)))
        if isinstance(e, TupleExpr):
            return TupleExpr(tuple(simp(f, defs) for f in e.fields))
        if isinstance(e, Proj):
            return Proj(simp(e.tup, defs), e.index)
        return e

    return _map_func_bodies(m, lambda fn: simp(fn.body, {}))


# -- canonicalization --------------------------------------------------------------


_COMPARISON_SWAP = {"greater": "less", "greaterequal": "lessequal"}


def canonicalize(m: IrModule) -> IrModule:
    """Direction-normalize comparisons (greater becomes flipped less),
    drop copies, and turn zeros_like/ones_like into literal constants."""
    m = infer_types(m)

    def canon(e: Expr) -> Expr:
        if isinstance(e, Let):
            bindings, leaf = _split_spine(e)
            out = [(name, canon(value)) for name, value in bindings]
            return _build_spine(out, canon(leaf))
        if isinstance(e, Prim):
            args = tuple(canon(a) for a in e.args)
            if e.op in _COMPARISON_SWAP:
                return Prim(_COMPARISON_SWAP[e.op], (args[1], args[0]), ty=e.ty)
            if e.op == "copy":
                return args[0]
            if e.op in ("zeros_like", "ones_like"):
                ty = _tensor_ty(e)
                if ty is not None:
                    return _const_filled_like(ty, 0 if e.op == "zeros_like" else 1)
            return Prim(e.op, args, ty=e.ty)
        if isinstance(e, CallExpr):
            return CallExpr(canon(e.callee), tuple(canon(a) for a in e.args))
        if isinstance(e, Closure):
            return Closure(e.params, canon(e.body))
        if isinstance(e, TupleExpr):
            return TupleExpr(tuple(canon(f) for f in e.fields))
        if isinstance(e, Proj):
            return Proj(canon(e.tup), e.index)
        return e

    return _map_func_bodies(m, lambda fn: canon(fn.body))


ALL_PASSES: Dict[str, Callable[[IrModule], IrModule]] = {
    "fold_constant": fold_constant,
    "eliminate_common_subexpr": eliminate_common_subexpr,
    "dead_code_elimination": dead_code_elimination,
    "inline": inline,
    "simplify_expr": simplify_expr,
    "to_a_normal_form": to_a_normal_form,
    "canonicalize": canonicalize,
}
