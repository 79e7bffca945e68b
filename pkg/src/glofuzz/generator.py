"""Node-by-node computational-graph growth under a constraint level.

Level 1 keeps every insertion within the integrity constraints (operand
dtypes equal, shapes broadcastable, operator admits the dtype), so the
result always validates clean. Level 0 draws operators and operands
uniformly with no checks; structure stays well-formed (references exist,
arity respected) but type-level constraints break freely.

Generation is a pure function of its config: one seeded rng drives every
draw, and each step consumes the same draws regardless of node_num, so a
longer run extends a shorter one node-for-node.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Dict, List, Tuple

from . import opset
from .dtypes import (
    ALL_DTYPES,
    DType,
    Shape,
    ShapeMismatchError,
    TensorValue,
    broadcast_shapes,
    int_range,
    to_float32,
    volume,
)
from .graph import (
    Call,
    Constant,
    Function,
    Graph,
    Operator,
    Variable,
    extract_subgraph,
)

KINDS = ("variable", "constant", "operator", "function", "call")


class Infeasible(Exception):
    pass


@dataclass(frozen=True)
class GenConfig:
    node_num: int = 20
    c_level: int = 1
    rng_seed: int = 0
    max_rank: int = 4
    max_extent: int = 8
    max_body: int = 6
    # draw weights for (variable, constant, operator, function, call),
    # renormalized over the kinds feasible at each step
    weights: Tuple[float, ...] = (25.0, 20.0, 40.0, 10.0, 5.0)

    def __post_init__(self) -> None:
        if self.node_num < 1:
            raise ValueError("node_num must be >= 1")
        if self.c_level not in (0, 1):
            raise ValueError("c_level must be 0 or 1")
        if self.max_rank < 0 or self.max_extent < 1 or self.max_body < 1:
            raise ValueError("bad shape/body bounds")
        if len(self.weights) != len(KINDS):
            raise ValueError(f"need {len(KINDS)} weights")
        if any(w < 0 for w in self.weights) or not any(self.weights):
            raise ValueError("weights must be nonnegative and not all zero")


def random_shape(rng: random.Random, max_rank: int, max_extent: int) -> Shape:
    rank = rng.randint(0, max_rank)
    return tuple(rng.randint(1, max_extent) for _ in range(rank))


def random_value(dtype: DType, shape: Shape, rng: random.Random) -> TensorValue:
    """Small-band values: ints in [-8,8] (unsigned [0,16]), floats on the
    1/16 grid in [-4,4], bools uniform."""
    n = volume(shape)
    if dtype.is_bool:
        data = tuple(rng.random() < 0.5 for _ in range(n))
    elif dtype.is_unsigned_int:
        data = tuple(rng.randint(0, 16) for _ in range(n))
    elif dtype.is_int:
        data = tuple(rng.randint(-8, 8) for _ in range(n))
    else:
        data = tuple(rng.randint(-64, 64) / 16.0 for _ in range(n))
        if dtype is DType.FLOAT32:
            data = tuple(to_float32(x) for x in data)
    return TensorValue(dtype, shape, data)


def insert_variable(g: Graph, cfg: GenConfig, rng: random.Random) -> int:
    dtype = rng.choice(ALL_DTYPES)
    return g.add(Variable(dtype, random_shape(rng, cfg.max_rank, cfg.max_extent)))


def insert_constant(g: Graph, cfg: GenConfig, rng: random.Random) -> int:
    dtype = rng.choice(ALL_DTYPES)
    shape = random_shape(rng, cfg.max_rank, cfg.max_extent)
    return g.add(Constant(random_value(dtype, shape, rng)))


def insert_operator(g: Graph, level: int, rng: random.Random) -> int:
    pool = g.visible_value_ids()
    if not pool:
        raise Infeasible("no operand candidates")
    if level == 0:
        op = rng.choice(opset.BINARY_NAMES + opset.UNARY_NAMES)
        arity = opset.get_spec(op).arity
        parents = tuple(rng.choice(pool) for _ in range(arity))
        return g.add(Operator(op, parents))

    by_dtype: Dict[DType, List[int]] = {}
    for nid in pool:
        by_dtype.setdefault(g.infos[nid].dtype, []).append(nid)
    feasible = [
        (spec.name, dt)
        for spec in opset.registry()
        for dt in ALL_DTYPES
        if dt in by_dtype and dt in spec.admissible
    ]
    # a lone value node always feeds a binary op via operand reuse, and
    # every dtype admits some unary op, so the pool being nonempty is
    # enough for feasibility
    assert feasible
    op, dt = rng.choice(feasible)
    group = by_dtype[dt]
    first = rng.choice(group)
    if opset.get_spec(op).arity == 1:
        return g.add(Operator(op, (first,)))
    shape = g.infos[first].shape
    compat = []
    for nid in group:
        try:
            broadcast_shapes(shape, g.infos[nid].shape)
        except ShapeMismatchError:
            continue
        compat.append(nid)
    distinct = [nid for nid in compat if nid != first]
    if distinct and rng.random() >= 0.15:
        second = rng.choice(distinct)
    else:
        second = rng.choice(compat)  # reuse one operand twice
    return g.add(Operator(op, (first, second)))


def insert_function(g: Graph, cfg: GenConfig, rng: random.Random) -> int:
    body, inputs, outputs = extract_subgraph(g, rng, cfg.max_body)
    return g.add(Function(body, inputs, outputs))


def insert_call(g: Graph, rng: random.Random) -> int:
    fns = [nid for nid, n in enumerate(g.nodes) if isinstance(n, Function)]
    if not fns:
        raise Infeasible("no function node to call")
    fid = rng.choice(fns)
    fn = g.nodes[fid]
    assert isinstance(fn, Function)
    return g.add(Call(fid, rng.choice(fn.outputs)))


def _feasible_kinds(g: Graph) -> List[str]:
    kinds = ["variable", "constant"]
    if g.visible_value_ids():
        kinds.append("operator")
    if any(
        isinstance(n, (Constant, Operator)) and nid not in g.hidden()
        for nid, n in enumerate(g.nodes)
    ):
        kinds.append("function")
    if any(isinstance(n, Function) for n in g.nodes):
        kinds.append("call")
    return kinds


def generate(cfg: GenConfig) -> Graph:
    rng = random.Random(cfg.rng_seed)
    g = Graph()
    for _ in range(cfg.node_num):
        kinds = _feasible_kinds(g)
        weights = [cfg.weights[KINDS.index(k)] for k in kinds]
        if not any(weights):
            weights = [1.0] * len(kinds)
        kind = rng.choices(kinds, weights=weights, k=1)[0]
        if kind == "variable":
            insert_variable(g, cfg, rng)
        elif kind == "constant":
            insert_constant(g, cfg, rng)
        elif kind == "operator":
            insert_operator(g, cfg.c_level, rng)
        elif kind == "function":
            insert_function(g, cfg, rng)
        else:
            insert_call(g, rng)
    return g
