"""A toolchain bundles the swappable pieces of the compiler: type
inference, the optimization passes, and the per-backend elementwise
evaluators. apply_pipeline runs passes in order, re-inferring after each
one so every pass receives fresh annotations and type breakage surfaces
at the pass that caused it.

The seeded-defect catalog ships six deliberately broken toolchain
variants used to measure harness sensitivity. Each defect swaps exactly
one component and records which oracle is expected to catch it:

  fold-umod    constant folding flips the low bit of unsigned floor_mod
  cse-const    dedup key ignores constant payloads
  inline-arg   inlining binds every parameter to the first argument
  dce-live     liveness demands two uses, dropping once-used bindings
  vm-neg       the vm backend evaluates negative as identity
  infer-tanh   inference crashes on tanh
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional, Sequence

from ..dtypes import TensorValue
from ..opset import eval_elementwise
from .backends import PrimEval, RunValue, run_module
from .infer import infer_types
from .ir import Const, IrModule, Prim, walk
from .passes import (
    ALL_PASSES,
    PASS_NAMES,
    _cse_with,
    _dce_with,
    _fold_with,
    _inline_with,
)

DEFAULT_PIPELINE = PASS_NAMES


class UnknownBug(ValueError):
    pass


@dataclass
class Toolchain:
    infer: Callable[[IrModule], IrModule] = infer_types
    passes: Dict[str, Callable[[IrModule], IrModule]] = field(
        default_factory=lambda: dict(ALL_PASSES)
    )
    prim_evals: Dict[str, PrimEval] = field(default_factory=dict)
    bug: Optional[str] = None

    def run(self, m: IrModule, args, backend: str = "tree") -> RunValue:
        pe = self.prim_evals.get(backend, eval_elementwise)
        return run_module(m, args, backend, pe)


def default_toolchain() -> Toolchain:
    return Toolchain()


def apply_pipeline(tc: Toolchain, m: IrModule, pipeline: Sequence[str]) -> IrModule:
    m = tc.infer(m)
    for name in pipeline:
        if name not in tc.passes:
            raise ValueError(f"unknown pass {name!r}")
        m = tc.passes[name](m)
        m = tc.infer(m)
    return m


# -- seeded defects ------------------------------------------------------------


def _umod_bitflip_eval(op, operands):
    out = eval_elementwise(op, operands)
    if op == "floor_mod" and out.dtype.is_unsigned_int:
        return TensorValue(out.dtype, out.shape, tuple(v ^ 1 for v in out.data))
    return out


def _const_blind_key(e):
    if isinstance(e, Const):
        return ("const", e.value.dtype, e.value.shape)
    return e


def _first_arg_bind(params, args):
    if len(args) >= 2:
        return [(p, args[0]) for p in params]
    return list(zip(params, args))


def _neg_identity_eval(op, operands):
    if op == "negative":
        return operands[0]
    return eval_elementwise(op, operands)


def _tanh_fragile_infer(m: IrModule) -> IrModule:
    for fn in m.funcs.values():
        for e in walk(fn.body):
            if isinstance(e, Prim) and e.op == "tanh":
                raise RuntimeError("no inference rule for tanh on the fast path")
    return infer_types(m)


@dataclass(frozen=True)
class SeededBug:
    name: str
    component: str
    expected_oracle: str
    description: str
    apply: Callable[[Toolchain], Toolchain]


def _swap_pass(name: str, fn) -> Callable[[Toolchain], Toolchain]:
    def do(tc: Toolchain) -> Toolchain:
        passes = dict(tc.passes)
        passes[name] = fn
        return replace(tc, passes=passes)

    return do


def _swap_prim_eval(backend: str, pe) -> Callable[[Toolchain], Toolchain]:
    def do(tc: Toolchain) -> Toolchain:
        prim_evals = dict(tc.prim_evals)
        prim_evals[backend] = pe
        return replace(tc, prim_evals=prim_evals)

    return do


BUG_CATALOG: Dict[str, SeededBug] = {
    b.name: b
    for b in (
        SeededBug(
            "fold-umod",
            "fold_constant",
            "O2",
            "folded unsigned floor_mod results have their low bit flipped",
            _swap_pass(
                "fold_constant",
                functools.partial(_fold_with, evaluator=_umod_bitflip_eval),
            ),
        ),
        SeededBug(
            "cse-const",
            "eliminate_common_subexpr",
            "O2",
            "dedup treats all same-typed constants as interchangeable",
            _swap_pass(
                "eliminate_common_subexpr",
                functools.partial(_cse_with, key=_const_blind_key),
            ),
        ),
        SeededBug(
            "inline-arg",
            "inline",
            "O2",
            "inlining a call with two or more arguments binds every "
            "parameter to the first one",
            _swap_pass(
                "inline",
                functools.partial(_inline_with, bind=_first_arg_bind, max_size=32),
            ),
        ),
        SeededBug(
            "dce-live",
            "dead_code_elimination",
            "O2",
            "liveness requires two uses, so once-used bindings are dropped",
            _swap_pass(
                "dead_code_elimination", functools.partial(_dce_with, min_uses=2)
            ),
        ),
        SeededBug(
            "vm-neg",
            "vm backend",
            "O3",
            "the vm evaluates negative as the identity",
            _swap_prim_eval("vm", _neg_identity_eval),
        ),
        SeededBug(
            "infer-tanh",
            "type inference",
            "O1",
            "inference raises RuntimeError when the module contains tanh",
            lambda tc: replace(tc, infer=_tanh_fragile_infer),
        ),
    )
}

BUG_NAMES = tuple(BUG_CATALOG)


def inject_bug(tc: Toolchain, name: str) -> Toolchain:
    if name not in BUG_CATALOG:
        raise UnknownBug(f"unknown seeded defect {name!r}")
    out = BUG_CATALOG[name].apply(tc)
    out.bug = name
    return out
