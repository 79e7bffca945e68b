"""Independent oracles shared across the test suite.

These deliberately avoid the library's own code paths wherever the thing
under test is the library's algorithm: results are computed a second way
(brute force, numpy, or direct graph walking) and compared.
"""

from __future__ import annotations

import math
from collections import Counter
from typing import Dict, List, Optional, Sequence, Set, Tuple

from glofuzz.dtypes import DType, Shape, TensorValue
from glofuzz import opset


def brute_broadcast(a: Shape, b: Shape) -> Optional[Shape]:
    """Broadcast oracle: pad left with 1s, take max extents, None on clash."""
    rank = max(len(a), len(b))
    pa = (1,) * (rank - len(a)) + tuple(a)
    pb = (1,) * (rank - len(b)) + tuple(b)
    out = []
    for x, y in zip(pa, pb):
        if x != 1 and y != 1 and x != y:
            return None
        out.append(max(x, y))
    return tuple(out)


def scalars_agree(a, b, rtol: float = 0.0) -> bool:
    if isinstance(a, float) or isinstance(b, float):
        if math.isnan(a) and math.isnan(b):
            return True
        if a == b:
            return True
        if rtol > 0 and math.isfinite(a) and math.isfinite(b):
            return abs(a - b) <= rtol * max(abs(a), abs(b))
        return False
    return a == b


def tensors_agree(a: TensorValue, b: TensorValue, rtol: float = 0.0) -> bool:
    if a.dtype is not b.dtype or a.shape != b.shape:
        return False
    return all(scalars_agree(x, y, rtol) for x, y in zip(a.data, b.data))


# ---------------------------------------------------------------------------
# Direct graph evaluation: the lowering/backends oracle.


def direct_graph_eval(graph, infos, bindings: Dict[int, TensorValue]) -> Dict[int, TensorValue]:
    """Evaluate every value-producing node straight off the graph.

    bindings maps variable node ids to input tensors. A call node's value is
    the value of its chosen output node (the call applies the function to the
    function's own input nodes, so the result is the same computation).
    Function nodes produce no value.
    """
    from glofuzz import graph as gm

    values: Dict[int, TensorValue] = {}
    for nid, node in enumerate(graph.nodes):
        if isinstance(node, gm.Variable):
            values[nid] = bindings[nid]
        elif isinstance(node, gm.Constant):
            values[nid] = node.value
        elif isinstance(node, gm.Operator):
            args = [values[p] for p in node.parents]
            values[nid] = opset.eval_elementwise(node.op, args)
        elif isinstance(node, gm.Call):
            values[nid] = values[node.output]
        # Function nodes: no runtime value.
    return values


def enumerate_connected_subsets(eligible: Sequence[int], edges: Set[Tuple[int, int]]) -> List[Set[int]]:
    """All nonempty subsets of eligible nodes connected via the given
    undirected edge set (edges as (parent, child) pairs)."""
    elig = list(eligible)
    n = len(elig)
    out: List[Set[int]] = []
    for mask in range(1, 1 << n):
        subset = {elig[i] for i in range(n) if mask >> i & 1}
        if _is_connected(subset, edges):
            out.append(subset)
    return out


def _is_connected(subset: Set[int], edges: Set[Tuple[int, int]]) -> bool:
    if len(subset) <= 1:
        return True
    adj: Dict[int, Set[int]] = {u: set() for u in subset}
    for a, b in edges:
        if a in subset and b in subset:
            adj[a].add(b)
            adj[b].add(a)
    seen = set()
    stack = [next(iter(subset))]
    while stack:
        u = stack.pop()
        if u in seen:
            continue
        seen.add(u)
        stack.extend(adj[u] - seen)
    return seen == subset


# ---------------------------------------------------------------------------
# Brute-force graph relations, recomputed from node fields (not via the
# library's consumer/boundary code) so structural properties have a second
# opinion.


def brute_value_edges(graph) -> Set[Tuple[int, int]]:
    """(parent, child) pairs over operator operands only."""
    from glofuzz import graph as gm

    out: Set[Tuple[int, int]] = set()
    for nid, node in enumerate(graph.nodes):
        if isinstance(node, gm.Operator):
            for p in node.parents:
                out.add((p, nid))
    return out


def brute_all_edges(graph) -> Set[Tuple[int, int]]:
    """(consumed, consumer) pairs over the full reference relation."""
    from glofuzz import graph as gm

    out = brute_value_edges(graph)
    for nid, node in enumerate(graph.nodes):
        if isinstance(node, gm.Function):
            for b in node.body:
                out.add((b, nid))
        elif isinstance(node, gm.Call):
            out.add((node.func, nid))
            for i in graph.nodes[node.func].inputs:
                out.add((i, nid))
    return out


def brute_reachable(start: int, edges: Set[Tuple[int, int]]) -> Set[int]:
    seen: Set[int] = set()
    stack = [start]
    while stack:
        u = stack.pop()
        for a, b in edges:
            if a == u and b not in seen:
                seen.add(b)
                stack.append(b)
    return seen


def brute_is_convex(subset: Set[int], graph) -> bool:
    """No outside node lies on a directed path between two subset nodes."""
    edges = brute_all_edges(graph)
    for z in range(len(graph.nodes)):
        if z in subset:
            continue
        from_subset = any(z in brute_reachable(x, edges) for x in subset)
        to_subset = bool(brute_reachable(z, edges) & subset)
        if from_subset and to_subset:
            return False
    return True


def brute_valid_bodies(graph) -> List[Set[int]]:
    """Every body extract_subgraph may legally return: nonempty connected
    convex sets of visible constant/operator nodes."""
    from glofuzz import graph as gm

    hidden: Set[int] = set()
    for node in graph.nodes:
        if isinstance(node, gm.Function):
            hidden |= node.body
    eligible = [
        nid
        for nid, node in enumerate(graph.nodes)
        if isinstance(node, (gm.Constant, gm.Operator)) and nid not in hidden
    ]
    edges = {
        (a, b) for a, b in brute_value_edges(graph) if a in eligible and b in eligible
    }
    return [
        s
        for s in enumerate_connected_subsets(eligible, edges)
        if brute_is_convex(s, graph)
    ]


def brute_boundary(graph, body: Set[int]) -> Tuple[List[int], List[int]]:
    """(inputs, outputs) of a body, recomputed directly."""
    from glofuzz import graph as gm

    ins: Set[int] = set()
    used_inside: Set[int] = set()
    for b in body:
        node = graph.nodes[b]
        if isinstance(node, gm.Operator):
            for p in node.parents:
                (used_inside if p in body else ins).add(p)
    return sorted(ins), sorted(set(body) - used_inside)


# ---------------------------------------------------------------------------
# Expression-IR checkers and comparison utilities.


def results_agree(a, b, rtol: float = 0.0) -> bool:
    """Deep comparison of backend results: nested tuples of tensors.
    NaNs compare equal; rtol loosens finite float comparisons only."""
    if isinstance(a, tuple) and isinstance(b, tuple):
        return len(a) == len(b) and all(
            results_agree(x, y, rtol) for x, y in zip(a, b)
        )
    if isinstance(a, TensorValue) and isinstance(b, TensorValue):
        return tensors_agree(a, b, rtol)
    return a == b


def iter_module_exprs(m):
    from glofuzz.mini_ir import walk

    for fn in m.funcs.values():
        yield from walk(fn.body)


def collect_binders(fn):
    """Parameter names, let binders, and closure parameters of one global,
    with multiplicity."""
    from glofuzz import mini_ir as mir

    names = [p.name for p in fn.params]
    for e in mir.walk(fn.body):
        if isinstance(e, mir.Let):
            names.append(e.name)
        elif isinstance(e, mir.Closure):
            names.extend(p.name for p in e.params)
    return names


def assert_unique_binders(m):
    """No name is bound twice within any one function (different globals
    may reuse names: scopes never mix)."""
    for fn in m.funcs.values():
        names = collect_binders(fn)
        dupes = [n for n, c in Counter(names).items() if c > 1]
        assert not dupes, f"duplicate binders in {fn.name}: {dupes}"


def _is_ir_atom(e) -> bool:
    from glofuzz import mini_ir as mir

    return isinstance(e, (mir.Var, mir.Const, mir.FuncRef))


def assert_anf(m):
    """Every operator/call/tuple/projection operand is atomic and no let
    appears in value position."""
    from glofuzz import mini_ir as mir

    for e in iter_module_exprs(m):
        if isinstance(e, mir.Let):
            assert not isinstance(e.value, mir.Let), "let in value position"
        elif isinstance(e, mir.Prim):
            assert all(_is_ir_atom(a) for a in e.args), f"compound operand in {e}"
        elif isinstance(e, mir.CallExpr):
            assert _is_ir_atom(e.callee), f"compound callee in {e}"
            assert all(_is_ir_atom(a) for a in e.args), f"compound argument in {e}"
        elif isinstance(e, mir.TupleExpr):
            assert all(_is_ir_atom(f) for f in e.fields), f"compound field in {e}"
        elif isinstance(e, mir.Proj):
            assert _is_ir_atom(e.tup), f"compound projectee in {e}"


def spine_scopes(m):
    """Yield each let-spine in the module as a list of (name, value)."""
    from glofuzz import mini_ir as mir

    def scopes(e):
        bindings = []
        while isinstance(e, mir.Let):
            bindings.append((e.name, e.value))
            e = e.body
        yield bindings
        for _, value in bindings:
            if isinstance(value, mir.Closure):
                yield from scopes(value.body)

    for fn in m.funcs.values():
        yield from scopes(fn.body)


def random_graph_inputs(g, rng):
    """Random argument tensors for a graph's variables, in id order."""
    from glofuzz import graph as gm
    from glofuzz.generator import random_value

    return [
        random_value(node.dtype, node.shape, rng)
        for node in g.nodes
        if isinstance(node, gm.Variable)
    ]


def variable_bindings(g, args):
    """Map variable node ids to the positional argument tensors."""
    from glofuzz import graph as gm

    ids = [nid for nid, node in enumerate(g.nodes) if isinstance(node, gm.Variable)]
    return dict(zip(ids, args))
