"""Shape inference for the operator vocabulary.

One rule set serves two modes: concrete checking during graph parsing and
execution (all dims are ints, violations raise ShapeError) and symbolic
constraint collection during rule validation (dims may be Sym placeholders,
violations become equations for the shape solver).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .ops import op_info


class ShapeError(ValueError):
    """Input shapes incompatible with an operator."""


class AttrError(ValueError):
    """Attribute value invalid for the given input shapes."""


class Sym:
    """Symbolic dimension placeholder."""

    __slots__ = ("uid",)
    _counter = 0

    def __init__(self):
        Sym._counter += 1
        self.uid = Sym._counter

    def __repr__(self):
        return f"d{self.uid}"


Dim = object  # int | Sym


@dataclass(frozen=True)
class EqDim:
    a: Dim
    b: Dim


@dataclass(frozen=True)
class ConstDim:
    d: Dim
    value: int


@dataclass(frozen=True)
class Divisible:
    d: Dim
    by: int


@dataclass(frozen=True)
class ProdEq:
    dims: tuple
    value: int


@dataclass(frozen=True)
class SumEq:
    target: Dim
    parts: tuple


@dataclass(frozen=True)
class MulEq:
    # product == factor * k
    product: Dim
    factor: Dim
    k: int


@dataclass(frozen=True)
class MinDim:
    d: Dim
    at_least: int


class TupleShape:
    """Shapes of a multi-output value, or a deferred split/chunk result."""

    def __init__(self, shapes=None, deferred=None):
        self.shapes = list(shapes) if shapes is not None else None
        self.deferred = deferred  # (kind, input_shape, params) when symbolic

    def __len__(self):
        if self.shapes is None:
            raise ShapeError("tuple length not statically known")
        return len(self.shapes)

    def __getitem__(self, i):
        return self.shapes[i]

    def __repr__(self):
        return f"TupleShape({self.shapes!r})"


class ConcreteSink:
    """Equation sink that demands concrete satisfaction immediately."""

    def emit(self, eq):
        if isinstance(eq, EqDim):
            if eq.a != eq.b:
                raise ShapeError(f"dimension mismatch: {eq.a} != {eq.b}")
        elif isinstance(eq, ConstDim):
            if eq.d != eq.value:
                raise ShapeError(f"dimension {eq.d} != required {eq.value}")
        elif isinstance(eq, Divisible):
            if eq.d % eq.by != 0:
                raise ShapeError(f"dimension {eq.d} not divisible by {eq.by}")
        elif isinstance(eq, ProdEq):
            p = math.prod(eq.dims)
            if p != eq.value:
                raise ShapeError(f"element count {p} != {eq.value}")
        elif isinstance(eq, SumEq):
            if eq.target != sum(eq.parts):
                raise ShapeError("concat size mismatch")
        elif isinstance(eq, MulEq):
            if eq.product != eq.factor * eq.k:
                raise ShapeError("product dimension mismatch")
        elif isinstance(eq, MinDim):
            if eq.d < eq.at_least:
                raise ShapeError(f"dimension {eq.d} below minimum {eq.at_least}")
        else:  # pragma: no cover
            raise AssertionError(eq)


class RecordingSink:
    """Equation sink used by the symbolic path; checks what it can."""

    def __init__(self):
        self.equations = []
        self.concrete = ConcreteSink()

    def emit(self, eq):
        if all(isinstance(d, int) for d in _dims_of(eq)):
            self.concrete.emit(eq)
        else:
            self.equations.append(eq)


def _dims_of(eq):
    if isinstance(eq, EqDim):
        return (eq.a, eq.b)
    if isinstance(eq, (ConstDim, Divisible, MinDim)):
        return (eq.d,)
    if isinstance(eq, ProdEq):
        return tuple(eq.dims)
    if isinstance(eq, SumEq):
        return (eq.target,) + tuple(eq.parts)
    if isinstance(eq, MulEq):
        return (eq.product, eq.factor)
    raise AssertionError(eq)  # pragma: no cover


def normalize_axis(axis: int, rank: int, what: str = "axis") -> int:
    if not -rank <= axis < rank:
        raise AttrError(f"{what} {axis} out of range for rank {rank}")
    return axis % rank


def _require_rank(shape, n: int, op: str):
    if len(shape) != n:
        raise ShapeError(f"{op} requires rank {n}, got rank {len(shape)}")


def _require_rank_at_least(shape, n: int, op: str):
    if len(shape) < n:
        raise ShapeError(f"{op} requires rank >= {n}, got rank {len(shape)}")


def _elementwise(sa, sb, sink, op):
    # Right-aligned; a concrete 1 broadcasts, symbolic dims are equated.
    if len(sa) < len(sb):
        sa, sb = sb, sa
    out = list(sa)
    offset = len(sa) - len(sb)
    for i, db in enumerate(sb):
        da = sa[offset + i]
        if da == 1 and isinstance(da, int):
            out[offset + i] = db
        elif db == 1 and isinstance(db, int):
            pass
        else:
            sink.emit(EqDim(da, db))
    return tuple(out)


def infer_shape(op: str, attrs: dict, inputs: list, sink) -> object:
    """Return the output shape (tuple of dims, or TupleShape) of `op`.

    `inputs` holds shapes (dim tuples) or TupleShape for tuple-valued
    arguments.  Structural violations raise ShapeError/AttrError; dim-level
    requirements go through `sink`.
    """
    info = op_info(op)
    if info.leaf:
        raise ShapeError(f"{op} is a leaf and has no inferred shape")
    for s in inputs:
        if isinstance(s, TupleShape) and op != "get_item":
            raise ShapeError(f"{op} cannot consume a tuple value")

    if op in ("add", "mul"):
        return _elementwise(inputs[0], inputs[1], sink, op)

    if op == "reduce_add":
        out = inputs[0]
        for s in inputs[1:]:
            out = _elementwise(out, s, sink, op)
        return out

    if op == "matmul":
        a, b = inputs
        _require_rank_at_least(a, 2, op)
        _require_rank_at_least(b, 2, op)
        sink.emit(EqDim(a[-1], b[-2]))
        batch = _elementwise(a[:-2], b[:-2], sink, op)
        return batch + (a[-2], b[-1])

    if op == "mm":
        a, b = inputs
        _require_rank(a, 2, op)
        _require_rank(b, 2, op)
        sink.emit(EqDim(a[-1], b[0]))
        return (a[0], b[1])

    if op == "addmm":
        bias, a, c = inputs
        _require_rank(a, 2, op)
        _require_rank(c, 2, op)
        sink.emit(EqDim(a[1], c[0]))
        out = (a[0], c[1])
        if len(bias) > 2:
            raise ShapeError("addmm bias must have rank <= 2")
        _elementwise(out, bias, sink, op)
        return out

    if op == "linear":
        x, w = inputs[0], inputs[1]
        _require_rank_at_least(x, 1, op)
        _require_rank(w, 2, op)
        sink.emit(EqDim(x[-1], w[1]))
        if len(inputs) == 3:
            b = inputs[2]
            _require_rank(b, 1, op)
            sink.emit(EqDim(b[0], w[0]))
        return x[:-1] + (w[0],)

    if op == "transpose":
        (x,) = inputs
        ax1, ax2 = attrs["axes"]
        if not (0 <= ax1 < len(x) and 0 <= ax2 < len(x)):
            raise AttrError(f"transpose axes {ax1, ax2} out of range for rank {len(x)}")
        out = list(x)
        out[ax1], out[ax2] = out[ax2], out[ax1]
        return tuple(out)

    if op == "reshape":
        (x,) = inputs
        target = tuple(attrs["shape"])
        if not all(isinstance(d, int) and d >= 1 for d in target):
            raise AttrError("reshape target shape must be positive ints")
        sink.emit(ProdEq(tuple(x), math.prod(target)))
        return target

    if op == "concat":
        axis = attrs["axis"]
        rank = len(inputs[0])
        for s in inputs[1:]:
            if len(s) != rank:
                raise ShapeError("concat inputs must share rank")
        axis = normalize_axis(axis, rank)
        for s in inputs[1:]:
            for i in range(rank):
                if i != axis:
                    sink.emit(EqDim(inputs[0][i], s[i]))
        parts = tuple(s[axis] for s in inputs)
        if all(isinstance(d, int) for d in parts):
            total = sum(parts)
        else:
            total = Sym()
            sink.emit(SumEq(total, parts))
        out = list(inputs[0])
        out[axis] = total
        return tuple(out)

    if op == "split":
        (x,) = inputs
        size, axis = attrs["size"], attrs["axis"]
        if size < 1:
            raise AttrError("split size must be >= 1")
        axis = normalize_axis(axis, len(x))
        d = x[axis]
        if isinstance(d, int):
            sink.emit(MinDim(d, 1))
            sizes = [size] * (d // size)
            if d % size:
                sizes.append(d % size)
            shapes = []
            for s in sizes:
                piece = list(x)
                piece[axis] = s
                shapes.append(tuple(piece))
            return TupleShape(shapes)
        return TupleShape(deferred=("split", tuple(x), (size, axis)))

    if op == "chunk":
        (x,) = inputs
        chunks, dim = attrs["chunks"], attrs["dim"]
        if chunks < 1:
            raise AttrError("chunk count must be >= 1")
        dim = normalize_axis(dim, len(x), "dim")
        d = x[dim]
        if isinstance(d, int):
            sink.emit(MinDim(d, 1))
            size = -(-d // chunks)  # ceil; last chunk smaller
            sizes = [size] * (d // size)
            if d % size:
                sizes.append(d % size)
            shapes = []
            for s in sizes:
                piece = list(x)
                piece[dim] = s
                shapes.append(tuple(piece))
            return TupleShape(shapes)
        return TupleShape(deferred=("chunk", tuple(x), (chunks, dim)))

    if op == "get_item":
        (t,) = inputs
        if not isinstance(t, TupleShape):
            raise ShapeError("get_item expects a tuple value")
        index = attrs["index"]
        if t.shapes is not None:
            if not 0 <= index < len(t.shapes):
                raise AttrError(f"get_item index {index} out of range for {len(t.shapes)} pieces")
            return t.shapes[index]
        kind, xshape, params = t.deferred
        piece = list(xshape)
        if kind == "split":
            size, axis = params
            sink.emit(MinDim(xshape[axis], size * index + 1))
            piece[axis] = size
        else:
            chunks, dim = params
            if not 0 <= index < chunks:
                raise AttrError(f"get_item index {index} out of range for {chunks} chunks")
            part = Sym()
            sink.emit(MulEq(xshape[dim], part, chunks))
            piece[dim] = part
        return tuple(piece)

    if op == "embedding":
        idx, w = inputs
        _require_rank_at_least(idx, 1, op)
        _require_rank(w, 2, op)
        sink.emit(MinDim(w[0], 1))
        return tuple(idx) + (w[1],)

    if op in ("layernorm", "gelu"):
        (x,) = inputs
        _require_rank_at_least(x, 1, op)
        return tuple(x)

    if op == "softmax":
        (x,) = inputs
        _require_rank_at_least(x, 1, op)
        normalize_axis(attrs["dim"], len(x), "dim")
        return tuple(x)

    if op == "scaled_dot_product_attention":
        q, k, v = inputs
        rank = len(q)
        _require_rank_at_least(q, 2, op)
        if len(k) != rank or len(v) != rank:
            raise ShapeError("attention inputs must share rank")
        for i in range(rank - 2):
            sink.emit(EqDim(q[i], k[i]))
            sink.emit(EqDim(q[i], v[i]))
        sink.emit(EqDim(q[-1], k[-1]))
        sink.emit(EqDim(k[-2], v[-2]))
        return tuple(q[:-1]) + (v[-1],)

    if op == "fused_attention":
        q, k, v = inputs
        for s in (q, k, v):
            _require_rank(s, 4, op)
        for i in range(4):
            sink.emit(EqDim(q[i], k[i]))
            sink.emit(EqDim(q[i], v[i]))
        return tuple(q)

    raise ShapeError(f"no shape rule for {op}")  # pragma: no cover
