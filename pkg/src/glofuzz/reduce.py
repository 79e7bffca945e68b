"""Test-case reduction: the active-node metric and the failure shrinker.

count_active_nodes measures how much of a graph survives compilation:
the largest insertion-order prefix that lowers, type-checks, optimizes,
and executes cleanly. Prefixes are ancestor-closed by construction
(every node only references earlier ids), and failure is monotone in
the prefix length: the strict evaluator and whole-module inference
visit every binding, so adding nodes never hides an earlier fault.
That monotonicity lets a binary search find the boundary after a fast
full-length probe.

shrink walks the opposite direction: given a failing case it greedily
removes one node at a time, each removal taking the node's transitive
consumers with it (including any function whose declared input it was,
since that function would otherwise dangle), and keeps the smaller
graph whenever the verdict class survives, with trace similarity
guarding against morphing one bug into another. The loop runs to a
fixpoint, so the result is 1-minimal: no single removal preserves the
failure.
"""

from __future__ import annotations

import random
from typing import Dict, List, Optional, Sequence, Set

from .generator import random_value
from .graph import Function, Graph, Variable
from .mini_ir import DEFAULT_PIPELINE, Toolchain, apply_pipeline, default_toolchain, lower
from .oracles import FuzzVerdict, run_case
from .relaxation import DedupConfig, trace_similarity


class NotReproducible(Exception):
    pass


def _prefix_runs(g: Graph, tc: Toolchain, pipeline: Sequence[str], seed, n: int) -> bool:
    pg = g.prefix(n)
    try:
        typed = tc.infer(lower(pg))
        opt = apply_pipeline(tc, typed, pipeline)
        rng = random.Random(f"{seed}:{n}")
        args = [
            random_value(pg.infos[v].dtype, pg.infos[v].shape, rng)
            for v, node in enumerate(pg.nodes)
            if isinstance(node, Variable)
        ]
        tc.run(opt, args, "tree")
    except Exception:
        return False
    return True


def count_active_nodes(
    g: Graph,
    tc: Optional[Toolchain] = None,
    pipeline: Sequence[str] = DEFAULT_PIPELINE,
    seed=0,
) -> int:
    tc = tc or default_toolchain()
    n = len(g)
    if n == 0 or _prefix_runs(g, tc, pipeline, seed, n):
        return n
    lo, hi = 0, n  # empty prefix always runs; full prefix just failed
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _prefix_runs(g, tc, pipeline, seed, mid):
            lo = mid
        else:
            hi = mid
    return lo


# -- shrinking ---------------------------------------------------------------------


def _removal_closure(g: Graph, nid: int) -> Set[int]:
    """nid plus everything that cannot survive without it."""
    cons: Dict[int, List[int]] = {i: [] for i in range(len(g))}
    for i in range(len(g)):
        for c in g.consumed_ids(i):
            cons[c].append(i)
    for fid, node in enumerate(g.nodes):
        if isinstance(node, Function):
            # A function does not consume its declared inputs, but it
            # cannot outlive them: the declaration would dangle.
            for i in node.inputs:
                cons[i].append(fid)
    dead: Set[int] = set()
    stack = [nid]
    while stack:
        x = stack.pop()
        if x in dead:
            continue
        dead.add(x)
        stack.extend(cons[x])
    return dead


def _same_class(base: FuzzVerdict, cand: FuzzVerdict, d: DedupConfig) -> bool:
    if (cand.outcome, cand.oracle) != (base.outcome, base.oracle):
        return False
    if base.trace is None:
        return cand.trace is None
    if cand.trace is None:
        return False
    return trace_similarity(base.trace, cand.trace, d.shingle_size) >= d.similarity_threshold


def shrink(
    g: Graph,
    tc: Toolchain,
    level: int,
    seed,
    dedup: Optional[DedupConfig] = None,
    **case_kwargs,
) -> Graph:
    """Greedy 1-minimal reduction of a failing case.

    case_kwargs are forwarded to run_case so the replay uses the same
    oracle knobs (input count, pipelines, mutants, adapters) that found
    the bug in the first place.
    """
    d = dedup or DedupConfig()
    base = run_case(g, tc, level, seed, **case_kwargs)
    if not base.is_failure:
        raise NotReproducible(
            f"base case no longer fails: {base.outcome}({base.oracle})"
        )
    cur = g
    changed = True
    while changed:
        changed = False
        for nid in reversed(range(len(cur))):
            dead = _removal_closure(cur, nid)
            if len(dead) == len(cur):
                continue
            cand = cur.remove_nodes(dead)
            v = run_case(cand, tc, level, seed, **case_kwargs)
            if v.is_failure and _same_class(base, v, d):
                cur = cand
                changed = True
                break
    return cur
