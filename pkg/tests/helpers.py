"""Shared builders for tests: compact graph construction without JSON."""

import numpy as np

from graphequiv.graph import ComputationGraph, Node, validate_graph
from graphequiv.tensors import TensorValue


class GraphBuilder:
    """Incrementally build a ComputationGraph with integer ids."""

    def __init__(self):
        self.nodes = {}
        self.inputs = []
        self.input_values = {}
        self._next = 0

    def _add(self, op, attrs=None, children=()):
        nid = self._next
        self._next += 1
        self.nodes[nid] = Node(id=nid, op=op, attrs=dict(attrs or {}), children=tuple(children))
        return nid

    def input(self, value):
        if not isinstance(value, TensorValue):
            value = TensorValue(np.asarray(value))
        nid = self._add("input")
        self.inputs.append(nid)
        self.input_values[nid] = value
        return nid

    def constant(self, value):
        if not isinstance(value, TensorValue):
            value = TensorValue(np.asarray(value))
        return self._add("constant", {"value": value})

    def op(self, name, *children, **attrs):
        return self._add(name, attrs, children)

    def build(self, outputs):
        g = ComputationGraph(
            nodes=self.nodes,
            inputs=self.inputs,
            input_values=self.input_values,
            outputs=list(outputs),
        )
        return validate_graph(g)


def mm_graph():
    """{input x; input w; mm(x, w)} with hand-checkable values."""
    b = GraphBuilder()
    x = b.input([[1.0, 2.0]])
    w = b.input([[1.0], [1.0]])
    y = b.op("mm", x, w)
    return b.build([y]), x, w, y


def fig2_pair(seed=0, tokens=3, hidden=4, out=5):
    """The decomposed add(mm(i, w), b) graph and its fused linear twin.

    Side B stores the weight transposed, mirroring how two frameworks lay
    out the same logical matrix.
    """
    rng = np.random.default_rng(seed)
    i_val = rng.normal(size=(tokens, hidden))
    w_val = rng.normal(size=(hidden, out))
    b_val = rng.normal(size=(out,))

    a = GraphBuilder()
    i1 = a.input(i_val)
    w1 = a.input(w_val)
    b1 = a.input(b_val)
    mm = a.op("mm", i1, w1)
    add = a.op("add", mm, b1)
    ga = a.build([add])

    bb = GraphBuilder()
    i2 = bb.input(i_val)
    w2 = bb.input(np.ascontiguousarray(w_val.T))
    b2 = bb.input(b_val)
    lin = bb.op("linear", i2, w2, b2)
    gb = bb.build([lin])
    return ga, gb
