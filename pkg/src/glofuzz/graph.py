"""Computational-graph data model.

The graph is an append-only DAG: node ids are list indices and every
reference points backwards, so any prefix of the node list is itself a
well-formed graph. Five node kinds exist. Variables and constants carry
their own dtype/shape; operator and call nodes get a derived info row on
append (strict inference when the node satisfies the integrity
constraints, a deterministic best-effort rule otherwise, so deliberately
broken graphs still carry plausible metadata). Function nodes wrap a
subset of earlier nodes (their body) and produce no runtime value.

Structural soundness (references exist, kinds line up, arity respected)
is enforced at construction and can be assumed everywhere. Integrity
constraints (dtype equality, broadcastability, operator admissibility,
function/call well-formedness) are NOT enforced at construction; they
are reported by validate_graph as violation records.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple, Union

from . import opset
from .dtypes import (
    DType,
    Shape,
    ShapeMismatchError,
    TensorValue,
    broadcast_shapes,
    dtype_from_name,
    volume,
)


@dataclass(frozen=True)
class Variable:
    dtype: DType
    shape: Shape


@dataclass(frozen=True)
class Constant:
    value: TensorValue


@dataclass(frozen=True)
class Operator:
    op: str
    parents: Tuple[int, ...]


@dataclass(frozen=True)
class Function:
    body: FrozenSet[int]
    inputs: Tuple[int, ...]
    outputs: Tuple[int, ...]


@dataclass(frozen=True)
class Call:
    func: int
    output: int


Node = Union[Variable, Constant, Operator, Function, Call]


@dataclass(frozen=True)
class NodeInfo:
    """Per-node metadata row. Function rows carry (None, None): a
    function's I/O info is read off the rows of its input/output ids."""

    dtype: Optional[DType]
    shape: Optional[Shape]


class ViolationKind(Enum):
    DTYPE_MISMATCH = "DtypeMismatch"
    SHAPE_MISMATCH = "ShapeMismatch"
    INADMISSIBLE = "OperatorDtypeInadmissible"
    MALFORMED_FUNCTION = "MalformedFunction"
    MALFORMED_CALL = "MalformedCall"


@dataclass(frozen=True)
class ConstraintViolation:
    node: int
    kind: ViolationKind
    detail: str


class InferenceError(Exception):
    """Strict info inference failed; kind mirrors the violation kinds."""

    def __init__(self, kind: ViolationKind, message: str):
        super().__init__(message)
        self.kind = kind
        self.message = message


class NoEligibleSubgraph(Exception):
    pass


def infer_info(node: Node, infos: Sequence[NodeInfo]) -> NodeInfo:
    """Strict inference: raises InferenceError when the node breaks an
    integrity constraint. Deterministic given the parent rows."""
    if isinstance(node, Variable):
        return NodeInfo(node.dtype, node.shape)
    if isinstance(node, Constant):
        return NodeInfo(node.value.dtype, node.value.shape)
    if isinstance(node, Call):
        out = infos[node.output]
        return NodeInfo(out.dtype, out.shape)
    if isinstance(node, Function):
        return NodeInfo(None, None)
    assert isinstance(node, Operator)
    dts = [infos[p].dtype for p in node.parents]
    if any(d is not dts[0] for d in dts):
        raise InferenceError(
            ViolationKind.DTYPE_MISMATCH,
            "operand dtypes differ: " + ", ".join(d.value for d in dts),
        )
    if not opset.dtype_admissible(node.op, dts[0]):
        raise InferenceError(
            ViolationKind.INADMISSIBLE,
            f"{node.op} does not admit {dts[0].value}",
        )
    shapes = [infos[p].shape for p in node.parents]
    out_shape = shapes[0]
    for s in shapes[1:]:
        try:
            out_shape = broadcast_shapes(out_shape, s)
        except ShapeMismatchError as e:
            raise InferenceError(ViolationKind.SHAPE_MISMATCH, str(e)) from e
    return NodeInfo(opset.get_spec(node.op).result_dtype(dts[0]), out_shape)


def derive_info(node: Node, infos: Sequence[NodeInfo]) -> NodeInfo:
    """Info row actually stored: strict result when the node is clean,
    otherwise dtype of the first operand and the broadcast shape when it
    exists (first operand's shape when it does not)."""
    try:
        return infer_info(node, infos)
    except InferenceError:
        assert isinstance(node, Operator)  # only operators can fail
        dt = infos[node.parents[0]].dtype
        shapes = [infos[p].shape for p in node.parents]
        out_shape = shapes[0]
        for s in shapes[1:]:
            try:
                out_shape = broadcast_shapes(out_shape, s)
            except ShapeMismatchError:
                out_shape = shapes[0]
                break
        return NodeInfo(dt, out_shape)


def _check_shape(shape: Shape) -> None:
    if not all(isinstance(d, int) and d >= 1 for d in shape):
        raise ValueError(f"extents must be positive integers, got {shape}")


class Graph:
    """Append-only node container with a derived info table in lockstep."""

    def __init__(self) -> None:
        self.nodes: List[Node] = []
        self.infos: List[NodeInfo] = []

    def __len__(self) -> int:
        return len(self.nodes)

    def add(self, node: Node) -> int:
        nid = len(self.nodes)
        self._check_structure(node, nid)
        self.nodes.append(node)
        self.infos.append(derive_info(node, self.infos))
        return nid

    def _check_structure(self, node: Node, nid: int) -> None:
        def ref(i: int, what: str) -> None:
            if not (isinstance(i, int) and 0 <= i < nid):
                raise ValueError(f"{what} {i} out of range for node {nid}")

        if isinstance(node, Variable):
            _check_shape(node.shape)
        elif isinstance(node, Constant):
            _check_shape(node.value.shape)
        elif isinstance(node, Operator):
            spec = opset.get_spec(node.op)
            if len(node.parents) != spec.arity:
                raise ValueError(
                    f"{node.op} takes {spec.arity} operands, got {len(node.parents)}"
                )
            for p in node.parents:
                ref(p, "parent")
                if isinstance(self.nodes[p], Function):
                    raise ValueError(f"parent {p} is a function node")
        elif isinstance(node, Function):
            if not node.body:
                raise ValueError("empty function body")
            for b in node.body:
                ref(b, "body node")
                if not isinstance(self.nodes[b], (Constant, Operator)):
                    raise ValueError(f"body node {b} is not a constant/operator")
            for i in node.inputs:
                ref(i, "input")
                if i in node.body:
                    raise ValueError(f"input {i} lies inside the body")
                if isinstance(self.nodes[i], Function):
                    raise ValueError(f"input {i} is a function node")
            if not node.outputs:
                raise ValueError("function needs at least one output")
            for o in node.outputs:
                if o not in node.body:
                    raise ValueError(f"output {o} outside the body")
        elif isinstance(node, Call):
            ref(node.func, "callee")
            fn = self.nodes[node.func]
            if not isinstance(fn, Function):
                raise ValueError(f"callee {node.func} is not a function node")
            if node.output not in fn.body:
                raise ValueError(f"call output {node.output} not in callee body")
        else:
            raise TypeError(f"not a node: {node!r}")

    # -- derived relations ------------------------------------------------

    def consumed_ids(self, nid: int) -> Tuple[int, ...]:
        """Ids this node references: operator -> parents, function -> its
        body, call -> the callee and the callee's inputs (the call's
        implicit arguments). Leaves consume nothing."""
        node = self.nodes[nid]
        if isinstance(node, Operator):
            return node.parents
        if isinstance(node, Function):
            return tuple(sorted(node.body))
        if isinstance(node, Call):
            fn = self.nodes[node.func]
            assert isinstance(fn, Function)
            return (node.func,) + fn.inputs
        return ()

    def consumers(self) -> List[List[int]]:
        out: List[List[int]] = [[] for _ in self.nodes]
        for nid in range(len(self.nodes)):
            for c in self.consumed_ids(nid):
                out[c].append(nid)
        return out

    def hidden(self) -> Set[int]:
        """Nodes swallowed by some function body; excluded from later
        operand/extraction pools."""
        out: Set[int] = set()
        for node in self.nodes:
            if isinstance(node, Function):
                out |= node.body
        return out

    def sinks(self) -> List[int]:
        cons = self.consumers()
        return [
            nid
            for nid, node in enumerate(self.nodes)
            if not isinstance(node, Function) and not cons[nid]
        ]

    def visible_value_ids(self) -> List[int]:
        hid = self.hidden()
        return [
            nid
            for nid, node in enumerate(self.nodes)
            if not isinstance(node, Function) and nid not in hid
        ]

    def prefix(self, n: int) -> "Graph":
        out = Graph()
        for node in self.nodes[:n]:
            out.add(node)
        return out

    def remove_nodes(self, dead: Set[int]) -> "Graph":
        """Rebuild without the dead ids. Callers must pass a consumer-closed
        set (removing a node removes its transitive consumers); a kept node
        referencing a dead one raises ValueError."""
        remap: Dict[int, int] = {}
        out = Graph()
        for nid, node in enumerate(self.nodes):
            if nid in dead:
                continue
            for c in self.consumed_ids(nid):
                if c in dead:
                    raise ValueError(f"kept node {nid} references removed node {c}")
            if isinstance(node, Operator):
                node = Operator(node.op, tuple(remap[p] for p in node.parents))
            elif isinstance(node, Function):
                node = Function(
                    frozenset(remap[b] for b in node.body),
                    tuple(remap[i] for i in node.inputs),
                    tuple(remap[o] for o in node.outputs),
                )
            elif isinstance(node, Call):
                node = Call(remap[node.func], remap[node.output])
            remap[nid] = out.add(node)
        return out


# -- validation ------------------------------------------------------------


def _reachable(start: Set[int], adj: Sequence[Sequence[int]]) -> Set[int]:
    seen: Set[int] = set()
    stack = list(start)
    while stack:
        for nxt in adj[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen


def _body_connected(g: Graph, body: FrozenSet[int]) -> bool:
    if len(body) <= 1:
        return True
    adj: Dict[int, Set[int]] = {b: set() for b in body}
    for b in body:
        node = g.nodes[b]
        if isinstance(node, Operator):
            for p in node.parents:
                if p in body:
                    adj[b].add(p)
                    adj[p].add(b)
    seen: Set[int] = set()
    stack = [next(iter(body))]
    while stack:
        b = stack.pop()
        if b in seen:
            continue
        seen.add(b)
        stack.extend(adj[b] - seen)
    return seen == body


def _body_intermediates(g: Graph, body: FrozenSet[int]) -> Set[int]:
    """Nodes outside the body sitting on a directed path between two body
    nodes. Empty iff the body is convex (ancestor-closed within itself)."""
    cons = g.consumers()
    producers = [g.consumed_ids(nid) for nid in range(len(g))]
    desc = _reachable(set(body), cons)
    anc = _reachable(set(body), producers)
    return (desc & anc) - set(body)


def boundary_inputs(g: Graph, body: FrozenSet[int]) -> Tuple[int, ...]:
    ins: Set[int] = set()
    for b in body:
        node = g.nodes[b]
        if isinstance(node, Operator):
            ins.update(p for p in node.parents if p not in body)
    return tuple(sorted(ins))


def boundary_outputs(g: Graph, body: FrozenSet[int]) -> Tuple[int, ...]:
    consumed_inside: Set[int] = set()
    for b in body:
        node = g.nodes[b]
        if isinstance(node, Operator):
            consumed_inside.update(p for p in node.parents if p in body)
    return tuple(sorted(set(body) - consumed_inside))


def _function_defect(g: Graph, fid: int, node: Function) -> Optional[str]:
    for other_id, other in enumerate(g.nodes[:fid]):
        if isinstance(other, Function) and node.body & other.body:
            return f"body overlaps function {other_id}"
    if not _body_connected(g, node.body):
        return "body is not connected"
    mid = _body_intermediates(g, node.body)
    if mid:
        return f"body is not convex: {sorted(mid)} lie between body nodes"
    if set(node.inputs) != set(boundary_inputs(g, node.body)):
        return "inputs do not match the body boundary"
    if set(node.outputs) != set(boundary_outputs(g, node.body)):
        return "outputs do not match the internally-unconsumed body nodes"
    return None


def validate_graph(g: Graph) -> List[ConstraintViolation]:
    """All integrity-constraint violations, at most one per node, ordered
    by node id. Empty iff the graph is clean (level-1 soundness)."""
    out: List[ConstraintViolation] = []
    for nid, node in enumerate(g.nodes):
        if isinstance(node, Operator):
            try:
                infer_info(node, g.infos)
            except InferenceError as e:
                out.append(ConstraintViolation(nid, e.kind, e.message))
        elif isinstance(node, Function):
            detail = _function_defect(g, nid, node)
            if detail is not None:
                out.append(
                    ConstraintViolation(nid, ViolationKind.MALFORMED_FUNCTION, detail)
                )
        elif isinstance(node, Call):
            fn = g.nodes[node.func]
            assert isinstance(fn, Function)
            if node.output not in fn.outputs:
                out.append(
                    ConstraintViolation(
                        nid,
                        ViolationKind.MALFORMED_CALL,
                        f"output {node.output} is not an output of function {node.func}",
                    )
                )
    return out


# -- subgraph extraction ----------------------------------------------------


def extract_subgraph(g: Graph, rng, max_body: int = 6):
    """Pick a random function body: a nonempty, connected, convex set of
    visible constant/operator nodes. Returns (body, inputs, outputs) with
    inputs = outside nodes feeding the body and outputs = body nodes no
    body member consumes. Raises NoEligibleSubgraph when nothing qualifies.
    """
    hid = g.hidden()
    eligible = [
        nid
        for nid, node in enumerate(g.nodes)
        if isinstance(node, (Constant, Operator)) and nid not in hid
    ]
    if not eligible:
        raise NoEligibleSubgraph("no visible constant/operator nodes")
    elig = set(eligible)
    undirected: Dict[int, Set[int]] = {e: set() for e in eligible}
    for e in eligible:
        node = g.nodes[e]
        if isinstance(node, Operator):
            for p in node.parents:
                if p in elig:
                    undirected[e].add(p)
                    undirected[p].add(e)
    cons = g.consumers()
    producers = [g.consumed_ids(nid) for nid in range(len(g))]

    target = rng.randint(1, min(max_body, len(eligible)))
    body: Set[int] = {rng.choice(eligible)}
    while len(body) < target:
        frontier = sorted({nb for b in body for nb in undirected[b]} - body)
        rng.shuffle(frontier)
        grew = False
        for cand in frontier:
            tentative = body | {cand}
            desc = _reachable(tentative, cons)
            anc = _reachable(tentative, producers)
            closed = tentative | ((desc & anc) - tentative)
            if closed <= elig and len(closed) <= max_body:
                body = closed
                grew = True
                break
        if not grew:
            break
    fro = frozenset(body)
    return fro, boundary_inputs(g, fro), boundary_outputs(g, fro)


# -- canonical text form -----------------------------------------------------


def _shape_text(shape: Shape) -> str:
    return "(" + ",".join(str(d) for d in shape) + ")"


def _parse_shape(text: str) -> Shape:
    if not (text.startswith("(") and text.endswith(")")):
        raise ValueError(f"bad shape literal: {text}")
    inner = text[1:-1]
    if not inner:
        return ()
    return tuple(int(d) for d in inner.split(","))


def _scalar_text(dt: DType, v) -> str:
    if dt.is_bool:
        return "true" if v else "false"
    return repr(v) if dt.is_float else str(v)


def _parse_scalar(dt: DType, text: str):
    if dt.is_bool:
        if text == "true":
            return True
        if text == "false":
            return False
        raise ValueError(f"bad bool literal: {text}")
    return float(text) if dt.is_float else int(text)


def _id_list_text(ids: Sequence[int]) -> str:
    return ",".join(str(i) for i in ids) if ids else "-"


def _parse_id_list(text: str) -> Tuple[int, ...]:
    if text == "-":
        return ()
    return tuple(int(i) for i in text.split(","))


def graph_text(g: Graph) -> str:
    """Byte-stable line form, one node per line; used for corpus files,
    replay, and digests."""
    lines = []
    for nid, node in enumerate(g.nodes):
        if isinstance(node, Variable):
            lines.append(f"{nid} var {node.dtype.value} {_shape_text(node.shape)}")
        elif isinstance(node, Constant):
            v = node.value
            data = " ".join(_scalar_text(v.dtype, x) for x in v.data)
            lines.append(
                f"{nid} const {v.dtype.value} {_shape_text(v.shape)} {data}"
            )
        elif isinstance(node, Operator):
            parents = " ".join(str(p) for p in node.parents)
            lines.append(f"{nid} op {node.op} {parents}")
        elif isinstance(node, Function):
            lines.append(
                f"{nid} fn body={_id_list_text(sorted(node.body))}"
                f" in={_id_list_text(node.inputs)}"
                f" out={_id_list_text(node.outputs)}"
            )
        else:
            assert isinstance(node, Call)
            lines.append(f"{nid} call {node.func} {node.output}")
    return "".join(line + "\n" for line in lines)


def parse_graph(text: str) -> Graph:
    g = Graph()
    for line in text.splitlines():
        if not line.strip():
            continue
        parts = line.split()
        nid, kind = int(parts[0]), parts[1]
        if nid != len(g):
            raise ValueError(f"node ids must be dense, got {nid} at {len(g)}")
        if kind == "var":
            g.add(Variable(dtype_from_name(parts[2]), _parse_shape(parts[3])))
        elif kind == "const":
            dt = dtype_from_name(parts[2])
            shape = _parse_shape(parts[3])
            raw = parts[4:]
            if len(raw) != volume(shape):
                raise ValueError(f"constant data length mismatch on line: {line}")
            data = tuple(_parse_scalar(dt, t) for t in raw)
            g.add(Constant(TensorValue(dt, shape, data)))
        elif kind == "op":
            g.add(Operator(parts[2], tuple(int(p) for p in parts[3:])))
        elif kind == "fn":
            fields = dict(p.split("=", 1) for p in parts[2:])
            g.add(
                Function(
                    frozenset(_parse_id_list(fields["body"])),
                    _parse_id_list(fields["in"]),
                    _parse_id_list(fields["out"]),
                )
            )
        elif kind == "call":
            g.add(Call(int(parts[2]), int(parts[3])))
        else:
            raise ValueError(f"unknown node kind: {kind}")
    return g


def graph_digest(g: Graph) -> str:
    return hashlib.sha256(graph_text(g).encode("utf-8")).hexdigest()
