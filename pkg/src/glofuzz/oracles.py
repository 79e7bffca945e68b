"""Verdict classification for one fuzzing case.

A case is a generated graph plus a toolchain. It runs through three
detectors in a fixed order:

  O1  the compile-and-execute gate: lowering, type inference, and a
      baseline run on the tree backend. Failures here end the case.
  O2  optimization and rewrite consistency: the default pass pipeline,
      extra randomly drawn pipelines, and semantics-preserving call
      rewrites, all compared against the baseline on the tree backend.
  O3  cross-backend consistency: the graph and vm backends (plus any
      external adapter processes) compared against the tree baseline.

The first failing detector names the verdict; every divergence found by
later detectors is still recorded in the verdict details so nothing is
lost. All randomness derives from the case seed, so a verdict replays
exactly from (graph text, seed).

Failure grammar at the gate: exceptions carrying a structured
diagnostic (type errors, admissibility and shape complaints, malformed
structure) are the toolchain doing its job when the graph was built
with constraints off, so at integrity level 0 they classify as
ExpectedRejection. At level 1 the generator promised a valid graph, so
the same diagnostics are Crash. Anything without a structured
diagnostic is Crash at every level.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from .adapter_client import AdapterError
from .dtypes import TensorValue
from .generator import random_value
from .graph import Graph, Variable
from .mini_ir import (
    Const,
    DEFAULT_PIPELINE,
    IrModule,
    IrTypeError,
    PASS_NAMES,
    Prim,
    TensorType,
    Toolchain,
    apply_pipeline,
    lower,
    module_text,
    mutate,
    walk,
)
from .mini_ir.mutators import MUTATION_STRATEGIES, NoTarget

OUTCOMES = ("Pass", "Crash", "Inconsistency", "ExpectedRejection")
ORACLE_NAMES = ("O1", "O2", "O3", "none")

# Diagnostics a toolchain is allowed to emit on rule-breaking input.
STRUCTURED_ERRORS = (IrTypeError, ValueError, TypeError, KeyError)


@dataclass
class FuzzVerdict:
    outcome: str
    oracle: str
    level: int
    trace: Optional[str] = None
    graph_ref: Optional[str] = None
    details: Dict[str, Any] = field(default_factory=dict)

    @property
    def is_failure(self) -> bool:
        return self.outcome in ("Crash", "Inconsistency")

    def to_json(self) -> Dict[str, Any]:
        return {
            "outcome": self.outcome,
            "oracle": self.oracle,
            "level": self.level,
            "trace": self.trace,
            "graph_ref": self.graph_ref,
            "details": self.details,
        }


def format_error(e: BaseException) -> str:
    return f"{type(e).__name__}: {e}"


# -- result comparison -------------------------------------------------------------


def _floats_agree(a: float, b: float, rtol: float) -> bool:
    if math.isnan(a) or math.isnan(b):
        return math.isnan(a) and math.isnan(b)
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= rtol * max(abs(a), abs(b))


def tensors_agree(a: TensorValue, b: TensorValue, rtol: float = 0.0) -> bool:
    if a.dtype != b.dtype or a.shape != b.shape:
        return False
    if a.dtype.is_float and rtol > 0.0:
        return all(_floats_agree(x, y, rtol) for x, y in zip(a.data, b.data))
    # Ints and bools compare exactly; NaN payloads compare by identity
    # of the nan-ness, which tuple equality alone would get wrong.
    if a.dtype.is_float:
        return all(
            (x == y) or (math.isnan(x) and math.isnan(y))
            for x, y in zip(a.data, b.data)
        )
    return a.data == b.data


def values_agree(a: Any, b: Any, rtol: float = 0.0) -> bool:
    """Structural agreement of run results: nested tuples of tensors."""
    if isinstance(a, tuple) and isinstance(b, tuple):
        return len(a) == len(b) and all(
            values_agree(x, y, rtol) for x, y in zip(a, b)
        )
    if isinstance(a, TensorValue) and isinstance(b, TensorValue):
        return tensors_agree(a, b, rtol)
    return False


# -- case inputs --------------------------------------------------------------------


def graph_variables(g: Graph) -> List[int]:
    return [nid for nid, n in enumerate(g.nodes) if isinstance(n, Variable)]


def draw_inputs(g: Graph, rng: random.Random, count: int) -> List[List[TensorValue]]:
    """count independent input vectors for the graph's variables, in id
    order (the lowering binds main's params in the same order)."""
    vids = graph_variables(g)
    out = []
    for _ in range(count):
        out.append(
            [random_value(g.infos[v].dtype, g.infos[v].shape, rng) for v in vids]
        )
    return out


def module_interface(m: IrModule) -> Tuple[set, set]:
    """(operator names, dtype names) a module touches; used to prefilter
    cases against an adapter's declared capability."""
    ops: set = set()
    dts: set = set()
    for fn in m.funcs.values():
        for p in fn.params:
            if isinstance(p.ty, TensorType):
                dts.add(p.ty.dtype.value)
        for e in walk(fn.body):
            if isinstance(e, Prim):
                ops.add(e.op)
            if isinstance(e, Const):
                dts.add(e.value.dtype.value)
            ty = getattr(e, "ty", None)
            if isinstance(ty, TensorType):
                dts.add(ty.dtype.value)
    return ops, dts


# -- O1: the compile-and-execute gate ------------------------------------------------


def classify_failure(e: BaseException, level: int) -> Tuple[str, str]:
    """Map a gate exception to (outcome, trace)."""
    if isinstance(e, STRUCTURED_ERRORS) and level == 0:
        return "ExpectedRejection", format_error(e)
    return "Crash", format_error(e)


def oracle1_crash(attempt: Callable[[], Any], level: int):
    """Run one compile-or-execute attempt; None when it succeeds, an
    (outcome, trace) fragment when it does not."""
    try:
        attempt()
    except Exception as e:
        return classify_failure(e, level)
    return None


# -- O2: optimization and rewrite consistency ----------------------------------------


def _evaluate(tc: Toolchain, m: IrModule, inputs, backend: str = "tree"):
    """('ok', results per input) or ('error', trace, input index)."""
    results = []
    for i, args in enumerate(inputs):
        try:
            results.append(tc.run(m, args, backend))
        except Exception as e:
            return ("error", format_error(e), i)
    return ("ok", results, None)


def _fragment(oracle, kind, where, trace=None, input_index=None):
    return {
        "oracle": oracle,
        "kind": kind,
        "where": where,
        "trace": trace,
        "input": input_index,
    }


def _compare_candidate(oracle, where, tc, m, inputs, base, rtol, backend="tree"):
    status = _evaluate(tc, m, inputs, backend)
    if status[0] == "error":
        return [_fragment(oracle, "status", where, status[1], status[2])]
    out = []
    for i, (got, want) in enumerate(zip(status[1], base)):
        if not values_agree(got, want, rtol):
            out.append(_fragment(oracle, "value", where, None, i))
    return out


def random_pipeline(rng: random.Random) -> List[str]:
    k = rng.randint(1, len(PASS_NAMES))
    return rng.sample(PASS_NAMES, k)


def oracle2_opt_mutation(
    tc: Toolchain,
    typed: IrModule,
    inputs: Sequence[Sequence[TensorValue]],
    base: Sequence[Any],
    pipelines: Sequence[Sequence[str]],
    rng_mut: random.Random,
    mutants_per_case: int = 3,
    float_rtol: float = 1e-6,
) -> List[dict]:
    fragments: List[dict] = []
    for pipe in pipelines:
        where = {"candidate": "pipeline", "pipeline": list(pipe)}
        try:
            opt = apply_pipeline(tc, typed, pipe)
        except Exception as e:
            fragments.append(_fragment("O2", "status", where, format_error(e)))
            continue
        fragments.extend(
            _compare_candidate("O2", where, tc, opt, inputs, base, float_rtol)
        )
    for _ in range(mutants_per_case):
        strategy = rng_mut.choice(MUTATION_STRATEGIES)
        try:
            mutant = mutate(typed, rng_mut, strategy)
        except NoTarget:
            continue
        where = {"candidate": "mutant", "strategy": strategy}
        fragments.extend(
            _compare_candidate("O2", where, tc, mutant, inputs, base, float_rtol)
        )
        # The rewritten module also goes through the standard pipeline:
        # rewrites create fresh call shapes the passes must cope with.
        where = {"candidate": "mutant+pipeline", "strategy": strategy}
        try:
            opt = apply_pipeline(tc, mutant, DEFAULT_PIPELINE)
        except Exception as e:
            fragments.append(_fragment("O2", "status", where, format_error(e)))
            continue
        fragments.extend(
            _compare_candidate("O2", where, tc, opt, inputs, base, float_rtol)
        )
    return fragments


# -- O3: cross-backend consistency ---------------------------------------------------


def oracle3_cross_backend(
    tc: Toolchain,
    typed: IrModule,
    inputs: Sequence[Sequence[TensorValue]],
    base: Sequence[Any],
    adapters: Sequence[Any] = (),
    float_rtol: float = 1e-6,
) -> List[dict]:
    fragments: List[dict] = []
    for backend in ("graph", "vm"):
        where = {"candidate": "backend", "backend": backend}
        fragments.extend(
            _compare_candidate(
                "O3", where, tc, typed, inputs, base, float_rtol, backend
            )
        )
    if not adapters:
        return fragments
    ops, dts = module_interface(typed)
    text = module_text(typed)
    for client in adapters:
        if not client.supports(ops, dts):
            continue
        where = {"candidate": "adapter", "adapter": client.name}
        for i, args in enumerate(inputs):
            try:
                status, payload = client.run(text, [], args)
            except AdapterError as e:
                # Timeout or death counts as one backend failing to
                # produce a result the others produced.
                fragments.append(_fragment("O3", "status", where, str(e), i))
                break
            if status == "unsupported":
                break
            if status == "error":
                fragments.append(_fragment("O3", "status", where, payload, i))
                continue
            if not values_agree(payload, base[i], client.float_rtol):
                fragments.append(_fragment("O3", "value", where, None, i))
    return fragments


# -- the full battery ---------------------------------------------------------------


def run_case(
    g: Graph,
    tc: Toolchain,
    level: int,
    seed,
    inputs_per_case: int = 3,
    extra_pipelines: int = 2,
    mutants_per_case: int = 3,
    float_rtol: float = 1e-6,
    adapters: Sequence[Any] = (),
) -> FuzzVerdict:
    """Run one graph through O1 -> O2 -> O3 and classify.

    Each randomness consumer gets its own stream keyed off the case
    seed, so disabling one detector cannot change what another sees.
    """
    details: Dict[str, Any] = {"seed": str(seed)}

    try:
        m = lower(g)
    except Exception as e:
        outcome, trace = classify_failure(e, level)
        details["stage"] = "lower"
        return FuzzVerdict(outcome, "O1", level, trace, details=details)

    try:
        typed = tc.infer(m)
    except Exception as e:
        outcome, trace = classify_failure(e, level)
        details["stage"] = "infer"
        return FuzzVerdict(outcome, "O1", level, trace, details=details)

    inputs = draw_inputs(g, random.Random(f"{seed}:inputs"), inputs_per_case)

    base = []
    for i, args in enumerate(inputs):
        try:
            base.append(tc.run(typed, args, "tree"))
        except Exception as e:
            outcome, trace = classify_failure(e, level)
            details["stage"] = "baseline"
            details["input"] = i
            return FuzzVerdict(outcome, "O1", level, trace, details=details)

    rng_pipes = random.Random(f"{seed}:pipelines")
    pipelines = [list(DEFAULT_PIPELINE)]
    for _ in range(extra_pipelines):
        pipelines.append(random_pipeline(rng_pipes))

    fragments = oracle2_opt_mutation(
        tc,
        typed,
        inputs,
        base,
        pipelines,
        random.Random(f"{seed}:mutants"),
        mutants_per_case,
        float_rtol,
    )
    fragments += oracle3_cross_backend(
        tc, typed, inputs, base, adapters, float_rtol
    )

    if fragments:
        first = fragments[0]
        details["fragments"] = fragments
        return FuzzVerdict(
            "Inconsistency",
            first["oracle"],
            level,
            first["trace"],
            details=details,
        )
    return FuzzVerdict("Pass", "none", level, details=details)
