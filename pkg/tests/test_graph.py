import json

import numpy as np
import pytest

from graphequiv.graph import (
    CycleError,
    ComputationGraph,
    Node,
    ParseError,
    graph_to_dict,
    join_graphs,
    parse_graph,
    serialize_graph,
    topo_order,
    validate_graph,
)
from graphequiv.ops import SchemaError
from graphequiv.tensors import TensorValue

from helpers import GraphBuilder, fig2_pair, mm_graph


def graph_text(nodes, inputs, outputs):
    return json.dumps({"nodes": nodes, "inputs": inputs, "outputs": outputs})


def tensor_json(data, shape, dtype="f64"):
    return {"shape": shape, "dtype": dtype, "data": data}


MINIMAL = graph_text(
    nodes=[
        {"id": 0, "op": "input", "attrs": {}, "children": []},
        {"id": 1, "op": "input", "attrs": {}, "children": []},
        {"id": 2, "op": "mm", "attrs": {}, "children": [0, 1]},
    ],
    inputs=[
        {"id": 0, "value": tensor_json([1.0, 2.0], [1, 2])},
        {"id": 1, "value": tensor_json([1.0, 1.0], [2, 1])},
    ],
    outputs=[2],
)


def test_parse_minimal_graph():
    g = parse_graph(MINIMAL)
    assert len(g.nodes) == 3
    assert len(g.inputs) == 2
    assert g.outputs == [2]
    assert g.shapes[2] == (1, 2)[:1] + (1,)


def test_parse_normalizes_negative_chunk_dim():
    text = graph_text(
        nodes=[
            {"id": 0, "op": "input", "attrs": {}, "children": []},
            {"id": 1, "op": "chunk", "attrs": {"chunks": 3, "dim": -1}, "children": [0]},
        ],
        inputs=[{"id": 0, "value": tensor_json([0.0] * 24, [2, 2, 6])}],
        outputs=[1],
    )
    g = parse_graph(text)
    assert g.nodes[1].attrs["dim"] == 2


def test_parse_rejects_missing_child():
    text = graph_text(
        nodes=[{"id": 0, "op": "gelu", "attrs": {}, "children": [7]}],
        inputs=[],
        outputs=[0],
    )
    with pytest.raises(SchemaError):
        parse_graph(text)


def test_parse_rejects_unknown_op():
    text = graph_text(
        nodes=[{"id": 0, "op": "conv2d", "attrs": {}, "children": []}],
        inputs=[],
        outputs=[0],
    )
    with pytest.raises(SchemaError):
        parse_graph(text)


def test_parse_rejects_bad_arity():
    text = graph_text(
        nodes=[
            {"id": 0, "op": "input", "attrs": {}, "children": []},
            {"id": 1, "op": "add", "attrs": {}, "children": [0]},
        ],
        inputs=[{"id": 0, "value": tensor_json([1.0], [1])}],
        outputs=[1],
    )
    with pytest.raises(SchemaError):
        parse_graph(text)


def test_parse_rejects_unbound_input():
    text = graph_text(
        nodes=[{"id": 0, "op": "input", "attrs": {}, "children": []}],
        inputs=[],
        outputs=[0],
    )
    with pytest.raises(SchemaError):
        parse_graph(text)


def test_parse_rejects_cycle():
    g = ComputationGraph(
        nodes={
            0: Node(0, "gelu", {}, (1,)),
            1: Node(1, "gelu", {}, (0,)),
        },
        inputs=[],
        input_values={},
        outputs=[0],
    )
    with pytest.raises(CycleError):
        validate_graph(g)


def test_parse_rejects_malformed_json():
    with pytest.raises(ParseError):
        parse_graph("{nodes: oops")


def test_parse_serialize_roundtrip_bit_exact():
    g = parse_graph(MINIMAL)
    text = serialize_graph(g)
    g2 = parse_graph(text)
    assert graph_to_dict(g) == graph_to_dict(g2)
    assert serialize_graph(g2) == text
    for nid in g.input_values:
        assert g.input_values[nid] == g2.input_values[nid]


def test_roundtrip_preserves_normalized_attrs():
    b = GraphBuilder()
    x = b.input(np.zeros((2, 3, 4)))
    t = b.op("transpose", x, axes=(-1, 1))
    g = b.build([t])
    assert g.nodes[t].attrs["axes"] == (1, 2)
    g2 = parse_graph(serialize_graph(g))
    assert g2.nodes[t].attrs["axes"] == (1, 2)


def test_topo_order_minimal():
    g, x, w, y = mm_graph()
    assert topo_order(g) == [x, w, y]


def test_topo_order_single_input():
    b = GraphBuilder()
    x = b.input([1.0])
    g = b.build([x])
    assert topo_order(g) == [x]


def test_topo_order_diamond():
    b = GraphBuilder()
    a = b.input([[1.0, 2.0], [3.0, 4.0]])
    left = b.op("gelu", a)
    right = b.op("layernorm", a)
    d = b.op("add", left, right)
    g = b.build([d])
    order = topo_order(g)
    assert order.index(a) < order.index(left)
    assert order.index(a) < order.index(right)
    assert order[-1] == d


def test_topo_order_is_valid_everywhere():
    ga, gb = fig2_pair()
    for g in (ga, gb):
        pos = {nid: i for i, nid in enumerate(topo_order(g))}
        for node in g.nodes.values():
            for c in node.children:
                assert pos[c] < pos[node.id]


def test_join_graphs_disjoint_union():
    g, *_ = mm_graph()
    jg = join_graphs(g, g)
    assert len(jg.graph_a.nodes) + len(jg.graph_b.nodes) == 2 * len(g.nodes)
    a_ids = set(jg.graph_a.nodes)
    b_ids = set(jg.graph_b.nodes)
    assert not (a_ids & b_ids)
    for node in jg.graph_b.nodes.values():
        assert all(c in b_ids for c in node.children)


def test_join_graphs_sides_tagged():
    ga, gb = fig2_pair()
    jg = join_graphs(ga, gb)
    assert all(n.source == "A" for n in jg.graph_a.nodes.values())
    assert all(n.source == "B" for n in jg.graph_b.nodes.values())
    assert len(jg.all_nodes()) == len(ga.nodes) + len(gb.nodes)


def test_join_fig2_pair_node_count():
    # 5 nodes on the decomposed side, 4 on the fused side
    ga, gb = fig2_pair()
    jg = join_graphs(ga, gb)
    assert len(jg.all_nodes()) == 9
    assert jg.graph_b.outputs[0] == gb.outputs[0] + jg.offset


def test_constant_leaf_allowed():
    b = GraphBuilder()
    x = b.input([[1.0, 2.0]])
    c = b.constant([[1.0], [2.0]])
    y = b.op("mm", x, c)
    g = b.build([y])
    assert g.nodes[c].attrs["value"] == TensorValue(np.array([[1.0], [2.0]]))
    g2 = parse_graph(serialize_graph(g))
    assert g2.nodes[c].attrs["value"] == g.nodes[c].attrs["value"]
