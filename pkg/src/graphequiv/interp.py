"""Reference interpreter for the operator vocabulary.

These semantics are the ground truth for the whole engine: execution data
attached to e-classes, value refresh during rebuilds, randomized rule
validation, and the post-hoc soundness audits all call into here.  All float
arithmetic is 64-bit with a fixed summation order, so repeated evaluation is
bit-stable.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erf

from . import ops
from .graph import ComputationGraph, topo_order
from .shapes import AttrError, ConcreteSink, ShapeError, infer_shape
from .tensors import TensorValue, TupleValue


class DomainError(ValueError):
    """Input values outside an operator's domain (e.g. embedding index)."""


class EvalError(RuntimeError):
    """eval_op failure annotated with the offending node."""

    def __init__(self, node_id, op, cause):
        super().__init__(f"node {node_id} ({op}): {cause}")
        self.node_id = node_id
        self.op = op
        self.cause = cause


def _require_f64(op, values):
    for v in values:
        if isinstance(v, TensorValue) and v.dtype != "f64":
            raise ShapeError(f"{op} requires f64 inputs")


def _shape_of(v):
    if isinstance(v, TupleValue):
        from .shapes import TupleShape

        return TupleShape([item.shape for item in v])
    return v.shape


def gelu_exact(x: np.ndarray) -> np.ndarray:
    # 0.5 * x * (1 + erf(x / sqrt(2)))
    return 0.5 * x * (1.0 + erf(x / math.sqrt(2.0)))


def gelu_tanh(x: np.ndarray) -> np.ndarray:
    # standard tanh approximation
    c = math.sqrt(2.0 / math.pi)
    return 0.5 * x * (1.0 + np.tanh(c * (x + 0.044715 * x**3)))


def _softmax(x: np.ndarray, axis: int) -> np.ndarray:
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def _sdpa(q, k, v, scale):
    # layout [..., seq, dim]; non-causal
    if scale is None:
        scale = 1.0 / math.sqrt(q.shape[-1])
    scores = np.matmul(q, np.swapaxes(k, -1, -2)) * scale
    return np.matmul(_softmax(scores, -1), v)


def _fused_attention(q, k, v, scale):
    """Attention over layout [batch, seq, heads, dim], one head at a time.

    Deliberately computed without the transpose-to-[batch, heads, seq, dim]
    route so it can serve as an independent check of the decomposed path.
    The kernel applies no default scaling: when `scale` is absent the raw
    dot products are used as-is.
    """
    if scale is None:
        scale = 1.0
    b, s, h, d = q.shape
    out = np.empty_like(q)
    for bi in range(b):
        for hi in range(h):
            qs = q[bi, :, hi, :]
            ks = k[bi, :, hi, :]
            vs = v[bi, :, hi, :]
            scores = np.einsum("ld,md->lm", qs, ks) * scale
            out[bi, :, hi, :] = _softmax(scores, -1) @ vs
    return out


def _split_arrays(arr, sizes, axis):
    offsets = np.cumsum(sizes)[:-1]
    return np.split(arr, offsets, axis=axis)


def eval_op(op: str, attrs: dict, inputs: list):
    """Evaluate one operator application on concrete values."""
    arrs = [v.array if isinstance(v, TensorValue) else v for v in inputs]

    # validate shapes through the shared rules before touching data
    out_shape = infer_shape(op, attrs, [_shape_of(v) for v in inputs], ConcreteSink())

    if op in ("add", "mul", "matmul", "mm", "addmm", "linear", "layernorm",
              "gelu", "softmax", "scaled_dot_product_attention",
              "fused_attention", "reduce_add"):
        _require_f64(op, inputs)

    if op == "add":
        return TensorValue(arrs[0] + arrs[1])
    if op == "mul":
        return TensorValue(arrs[0] * arrs[1])
    if op == "matmul":
        return TensorValue(np.matmul(arrs[0], arrs[1]))
    if op == "mm":
        return TensorValue(arrs[0] @ arrs[1])
    if op == "addmm":
        bias, a, c = arrs
        return TensorValue(bias + a @ c)
    if op == "linear":
        x, w = arrs[0], arrs[1]
        y = x @ w.T
        if len(arrs) == 3:
            y = y + arrs[2]
        return TensorValue(y)
    if op == "transpose":
        ax1, ax2 = attrs["axes"]
        return TensorValue(np.swapaxes(arrs[0], ax1, ax2))
    if op == "reshape":
        return TensorValue(arrs[0].reshape(attrs["shape"]))
    if op == "concat":
        return TensorValue(np.concatenate(arrs, axis=attrs["axis"]))
    if op == "split":
        sizes = [s[attrs["axis"]] for s in out_shape.shapes]
        parts = _split_arrays(arrs[0], sizes, attrs["axis"])
        return TupleValue(TensorValue(p) for p in parts)
    if op == "chunk":
        dim = attrs["dim"]
        sizes = [s[dim] for s in out_shape.shapes]
        parts = _split_arrays(arrs[0], sizes, dim)
        return TupleValue(TensorValue(p) for p in parts)
    if op == "get_item":
        return inputs[0][attrs["index"]]
    if op == "embedding":
        idx, w = inputs
        if idx.dtype != "i64":
            raise ShapeError("embedding index tensor must be i64")
        if w.dtype != "f64":
            raise ShapeError("embedding weight tensor must be f64")
        rows = w.shape[0]
        if idx.array.size and (idx.array.min() < 0 or idx.array.max() >= rows):
            raise DomainError(f"embedding index out of range [0, {rows})")
        return TensorValue(w.array[idx.array])
    if op == "layernorm":
        eps = attrs.get("eps", ops.DEFAULT_LAYERNORM_EPS)
        x = arrs[0]
        mean = x.mean(axis=-1, keepdims=True)
        var = ((x - mean) ** 2).mean(axis=-1, keepdims=True)
        return TensorValue((x - mean) / np.sqrt(var + eps))
    if op == "gelu":
        kind = attrs.get("approximate", ops.DEFAULT_GELU_APPROXIMATE)
        fn = gelu_exact if kind == "exact" else gelu_tanh
        return TensorValue(fn(arrs[0]))
    if op == "softmax":
        return TensorValue(_softmax(arrs[0], attrs["dim"]))
    if op == "scaled_dot_product_attention":
        return TensorValue(_sdpa(arrs[0], arrs[1], arrs[2], attrs.get("scale")))
    if op == "fused_attention":
        return TensorValue(_fused_attention(arrs[0], arrs[1], arrs[2], attrs.get("scale")))
    if op == "reduce_add":
        acc = arrs[0]
        for a in arrs[1:]:
            acc = acc + a
        return TensorValue(acc)
    raise ShapeError(f"no evaluation rule for {op}")  # pragma: no cover


def run_graph(g: ComputationGraph, bindings: dict = None) -> dict:
    """Evaluate every node in topological order; returns id -> value.

    `bindings` overrides or supplies input values; by default the values
    bound in the graph are used.
    """
    values = {}
    bound = dict(g.input_values)
    if bindings:
        bound.update(bindings)
    for nid in topo_order(g):
        node = g.nodes[nid]
        if node.op == "input":
            if nid not in bound:
                raise EvalError(nid, "input", "unbound input")
            values[nid] = bound[nid]
            continue
        if node.op == "constant":
            values[nid] = node.attrs["value"]
            continue
        try:
            values[nid] = eval_op(node.op, node.attrs, [values[c] for c in node.children])
        except (ShapeError, AttrError, DomainError) as e:
            raise EvalError(nid, node.op, e) from None
    return values
