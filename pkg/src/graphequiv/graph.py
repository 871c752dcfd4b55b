"""Computation-graph data model, serialized format, and the joint graph.

Graph files are UTF-8 JSON:

    {"nodes":   [{"id": int, "op": str, "attrs": {...}, "children": [int,...]}, ...],
     "inputs":  [{"id": int, "value": {"shape": [...], "dtype": "f64"|"i64",
                                       "data": [...]}}, ...],
     "outputs": [int, ...]}

Tensor data is row-major.  Parsing normalizes negative axis attributes using
inferred ranks and validates shapes end to end, so a parsed graph is always
executable.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field, replace

from . import ops
from .ops import SchemaError, op_info
from .shapes import AttrError, ConcreteSink, ShapeError, TupleShape, infer_shape, normalize_axis
from .tensors import TensorValue


class ParseError(ValueError):
    """Malformed graph text."""


class CycleError(ValueError):
    """The node graph is not a DAG."""


@dataclass(frozen=True)
class Node:
    id: int
    op: str
    attrs: dict = field(default_factory=dict)
    children: tuple = ()
    source: str = ""  # "A" or "B" once part of a joint graph


@dataclass
class ComputationGraph:
    nodes: dict  # id -> Node
    inputs: list  # ordered input ids
    input_values: dict  # id -> TensorValue
    outputs: list  # ordered output ids
    shapes: dict = field(default_factory=dict)  # id -> shape tuple / TupleShape

    def node(self, nid: int) -> Node:
        return self.nodes[nid]

    def leaf_ids(self) -> list:
        return [n.id for n in self.nodes.values() if op_info(n.op).leaf]


@dataclass
class JointGraph:
    graph_a: ComputationGraph
    graph_b: ComputationGraph  # node ids offset past graph_a's
    offset: int

    def all_nodes(self) -> list:
        out = list(self.graph_a.nodes.values())
        out.extend(self.graph_b.nodes.values())
        return out

    def side_of(self, nid: int) -> str:
        return "A" if nid < self.offset else "B"

    def original_id(self, nid: int) -> int:
        return nid if nid < self.offset else nid - self.offset


def topo_order(g: ComputationGraph) -> list:
    """Topological order of node ids, ties broken by ascending id."""
    indeg = {nid: 0 for nid in g.nodes}
    users = {nid: [] for nid in g.nodes}
    for node in g.nodes.values():
        for c in node.children:
            indeg[node.id] += 1
            users[c].append(node.id)
    ready = [nid for nid, d in sorted(indeg.items()) if d == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        nid = heapq.heappop(ready)
        order.append(nid)
        for u in users[nid]:
            indeg[u] -= 1
            if indeg[u] == 0:
                heapq.heappush(ready, u)
    if len(order) != len(g.nodes):
        raise CycleError("graph contains a cycle")
    return order


def node_depths(g: ComputationGraph) -> dict:
    """Longest path from a leaf, per node (leaves are depth 0)."""
    depths = {}
    for nid in topo_order(g):
        node = g.nodes[nid]
        depths[nid] = 1 + max((depths[c] for c in node.children), default=-1)
    return depths


def _normalize_attrs(node: Node, child_shapes: list) -> dict:
    """Resolve negative axes against inferred ranks; canonicalize tuples."""
    attrs = dict(node.attrs)
    op = node.op

    def rank_of(i=0):
        s = child_shapes[i]
        if isinstance(s, TupleShape):
            raise ShapeError(f"{op} cannot consume a tuple value")
        return len(s)

    if op == "transpose":
        axes = attrs["axes"]
        if len(axes) != 2:
            raise SchemaError("transpose takes exactly two axes")
        r = rank_of()
        a1 = normalize_axis(axes[0], r)
        a2 = normalize_axis(axes[1], r)
        if a1 == a2:
            raise SchemaError("transpose axes must differ")
        attrs["axes"] = (min(a1, a2), max(a1, a2))
    elif op == "reshape":
        attrs["shape"] = tuple(attrs["shape"])
    elif op == "concat":
        attrs["axis"] = normalize_axis(attrs["axis"], rank_of())
    elif op == "split":
        attrs["axis"] = normalize_axis(attrs["axis"], rank_of())
        if attrs["size"] < 1:
            raise SchemaError("split size must be positive")
    elif op == "chunk":
        attrs["dim"] = normalize_axis(attrs["dim"], rank_of(), "dim")
        if attrs["chunks"] < 1:
            raise SchemaError("chunk count must be positive")
    elif op == "softmax":
        attrs["dim"] = normalize_axis(attrs["dim"], rank_of(), "dim")
    elif op == "get_item":
        if attrs["index"] < 0:
            s = child_shapes[0]
            if not isinstance(s, TupleShape):
                raise ShapeError("get_item expects a tuple value")
            attrs["index"] = attrs["index"] % len(s)
    return attrs


def validate_graph(g: ComputationGraph) -> ComputationGraph:
    """Check structure, normalize attributes, and infer shapes in place."""
    for node in g.nodes.values():
        info = op_info(node.op)
        ops.check_arity(node.op, len(node.children))
        for c in node.children:
            if c not in g.nodes:
                raise SchemaError(f"node {node.id} references missing child {c}")
        if not info.leaf and not node.children and node.op != "input":
            raise SchemaError(f"node {node.id} ({node.op}) has no children")

    if not g.outputs:
        raise SchemaError("outputs must be non-empty")
    for out in g.outputs:
        if out not in g.nodes:
            raise SchemaError(f"output {out} does not exist")

    for nid in g.inputs:
        if nid not in g.nodes or g.nodes[nid].op != "input":
            raise SchemaError(f"bound input {nid} is not an input node")
    for node in g.nodes.values():
        if node.op == "input" and node.id not in g.input_values:
            raise SchemaError(f"input node {node.id} has no bound value")

    order = topo_order(g)  # raises CycleError

    sink = ConcreteSink()
    shapes = {}
    normalized = {}
    for nid in order:
        node = g.nodes[nid]
        if node.op == "input":
            shapes[nid] = g.input_values[nid].shape
            normalized[nid] = node
            continue
        if node.op == "constant":
            value = node.attrs.get("value")
            if not isinstance(value, TensorValue):
                raise SchemaError(f"constant {nid} missing tensor value")
            shapes[nid] = value.shape
            normalized[nid] = node
            continue
        child_shapes = [shapes[c] for c in node.children]
        try:
            attrs = _normalize_attrs(node, child_shapes)
            ops.check_attrs(node.op, {k: v for k, v in attrs.items() if k != "value"})
            shapes[nid] = infer_shape(node.op, attrs, child_shapes, sink)
        except (ShapeError, AttrError) as e:
            raise type(e)(f"node {nid} ({node.op}): {e}") from None
        normalized[nid] = replace(node, attrs=attrs)
    g.nodes = {nid: normalized[nid] for nid in sorted(normalized)}
    g.shapes = shapes
    return g


def graph_from_dict(obj: dict) -> ComputationGraph:
    if not isinstance(obj, dict):
        raise ParseError("top level must be an object")
    for key in ("nodes", "inputs", "outputs"):
        if key not in obj:
            raise ParseError(f"missing top-level key {key!r}")

    nodes = {}
    for entry in obj["nodes"]:
        if not isinstance(entry, dict) or "id" not in entry or "op" not in entry:
            raise ParseError("node entries need at least id and op")
        nid = entry["id"]
        if not isinstance(nid, int):
            raise ParseError("node ids must be ints")
        if nid in nodes:
            raise ParseError(f"duplicate node id {nid}")
        attrs = dict(entry.get("attrs", {}))
        if entry["op"] == "constant" and "value" in attrs:
            attrs["value"] = TensorValue.from_json(attrs["value"])
        if "axes" in attrs:
            attrs["axes"] = tuple(attrs["axes"])
        if "shape" in attrs:
            attrs["shape"] = tuple(attrs["shape"])
        children = entry.get("children", [])
        if not isinstance(children, list):
            raise ParseError("children must be a list")
        nodes[nid] = Node(id=nid, op=entry["op"], attrs=attrs, children=tuple(children))

    inputs = []
    input_values = {}
    for entry in obj["inputs"]:
        if not isinstance(entry, dict) or "id" not in entry or "value" not in entry:
            raise ParseError("input entries need id and value")
        inputs.append(entry["id"])
        input_values[entry["id"]] = TensorValue.from_json(entry["value"])

    outputs = list(obj["outputs"])
    g = ComputationGraph(nodes=nodes, inputs=inputs, input_values=input_values, outputs=outputs)
    return validate_graph(g)


def parse_graph(text: str) -> ComputationGraph:
    """Parse and validate a serialized graph."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e}") from None
    return graph_from_dict(obj)


def graph_to_dict(g: ComputationGraph) -> dict:
    node_entries = []
    for nid in sorted(g.nodes):
        node = g.nodes[nid]
        attrs = {}
        for k, v in node.attrs.items():
            if isinstance(v, TensorValue):
                attrs[k] = v.to_json()
            elif isinstance(v, tuple):
                attrs[k] = list(v)
            else:
                attrs[k] = v
        node_entries.append(
            {"id": node.id, "op": node.op, "attrs": attrs, "children": list(node.children)}
        )
    return {
        "nodes": node_entries,
        "inputs": [{"id": nid, "value": g.input_values[nid].to_json()} for nid in g.inputs],
        "outputs": list(g.outputs),
    }


def serialize_graph(g: ComputationGraph) -> str:
    return json.dumps(graph_to_dict(g), indent=1)


def _retag(g: ComputationGraph, offset: int, source: str) -> ComputationGraph:
    nodes = {}
    for nid, node in g.nodes.items():
        nodes[nid + offset] = replace(
            node,
            id=nid + offset,
            children=tuple(c + offset for c in node.children),
            source=source,
        )
    return ComputationGraph(
        nodes=nodes,
        inputs=[i + offset for i in g.inputs],
        input_values={i + offset: v for i, v in g.input_values.items()},
        outputs=[o + offset for o in g.outputs],
        shapes={i + offset: s for i, s in g.shapes.items()},
    )


def join_graphs(a: ComputationGraph, b: ComputationGraph) -> JointGraph:
    """Disjoint union; graph_b's ids are shifted past graph_a's maximum."""
    offset = max(a.nodes) + 1 if a.nodes else 0
    return JointGraph(graph_a=_retag(a, 0, "A"), graph_b=_retag(b, offset, "B"), offset=offset)
