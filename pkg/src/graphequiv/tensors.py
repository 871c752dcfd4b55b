"""Tensor values, numerical tolerance, and coarse value fingerprints."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

DTYPES = {"f64": np.float64, "i64": np.int64}


@dataclass(frozen=True)
class Tolerance:
    atol: float = 1e-2
    rtol: float = 1e-2

    def __post_init__(self):
        if self.atol < 0 or self.rtol < 0:
            raise ValueError("tolerances must be non-negative")


class TensorValue:
    """Dense multidimensional array (f64 or i64) in row-major order.

    Wraps an immutable numpy array; `TupleValue` covers multi-output ops.
    """

    __slots__ = ("array",)

    def __init__(self, array: np.ndarray):
        arr = np.asarray(array)
        if arr.dtype == np.float64 or arr.dtype == np.int64:
            pass
        elif np.issubdtype(arr.dtype, np.integer):
            arr = arr.astype(np.int64)
        else:
            arr = arr.astype(np.float64)
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "array", arr)

    def __setattr__(self, name, value):  # immutable after construction
        raise AttributeError("TensorValue is immutable")

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.array.shape)

    @property
    def dtype(self) -> str:
        return "i64" if self.array.dtype == np.int64 else "f64"

    @property
    def data(self) -> np.ndarray:
        return self.array.reshape(-1)

    def __repr__(self):
        return f"TensorValue(shape={list(self.shape)}, dtype={self.dtype})"

    def __eq__(self, other):
        if not isinstance(other, TensorValue):
            return NotImplemented
        return (
            self.dtype == other.dtype
            and self.shape == other.shape
            and np.array_equal(self.array, other.array)
        )

    def __hash__(self):
        return hash((self.shape, self.dtype, self.array.tobytes()))

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.dtype.encode())
        h.update(repr(self.shape).encode())
        h.update(self.array.tobytes())
        return h.hexdigest()

    def to_json(self) -> dict:
        data = self.data
        if self.dtype == "i64":
            items = [int(v) for v in data]
        else:
            items = [float(v) for v in data]
        return {"shape": list(self.shape), "dtype": self.dtype, "data": items}

    @staticmethod
    def from_json(obj: dict) -> "TensorValue":
        from .graph import ParseError  # cycle-free: graph imports tensors lazily

        if not isinstance(obj, dict) or set(obj) != {"shape", "dtype", "data"}:
            raise ParseError("tensor must have exactly shape/dtype/data")
        if obj["dtype"] not in DTYPES:
            raise ParseError(f"unsupported dtype {obj['dtype']!r}")
        shape = tuple(obj["shape"])
        if not all(isinstance(d, int) and d >= 0 for d in shape):
            raise ParseError("tensor shape must be non-negative ints")
        n = 1
        for d in shape:
            n *= d
        if len(obj["data"]) != n:
            raise ParseError(f"tensor data length {len(obj['data'])} != product(shape) {n}")
        arr = np.array(obj["data"], dtype=DTYPES[obj["dtype"]]).reshape(shape)
        return TensorValue(arr)


class TupleValue:
    """Ordered tuple of TensorValues, produced by split/chunk."""

    __slots__ = ("items",)

    def __init__(self, items):
        object.__setattr__(self, "items", tuple(items))

    def __setattr__(self, name, value):
        raise AttributeError("TupleValue is immutable")

    def __len__(self):
        return len(self.items)

    def __getitem__(self, i):
        return self.items[i]

    def __iter__(self):
        return iter(self.items)

    def __repr__(self):
        return f"TupleValue({list(self.items)!r})"

    def __eq__(self, other):
        if not isinstance(other, TupleValue):
            return NotImplemented
        return self.items == other.items

    def __hash__(self):
        return hash(self.items)

    def digest(self) -> str:
        h = hashlib.sha256()
        for item in self.items:
            h.update(item.digest().encode())
        return h.hexdigest()


Value = TensorValue  # alias for annotations where tuples are excluded


def values_match(a, b, tol: Tolerance) -> bool:
    """Per-element comparison: |a_i - b_i| <= atol + rtol*|b_i|.

    Shape or dtype mismatch yields False rather than an error; tuples are
    compared pointwise.
    """
    if isinstance(a, TupleValue) or isinstance(b, TupleValue):
        if not (isinstance(a, TupleValue) and isinstance(b, TupleValue)):
            return False
        if len(a) != len(b):
            return False
        return all(values_match(x, y, tol) for x, y in zip(a, b))
    if a.shape != b.shape or a.dtype != b.dtype:
        return False
    if a.dtype == "i64":
        return bool(np.array_equal(a.array, b.array))
    diff = np.abs(a.array - b.array)
    bound = tol.atol + tol.rtol * np.abs(b.array)
    return bool(np.all(diff <= bound))


def _bucket(x: float, width: float) -> int:
    return int(np.floor(x / width))


def value_signature(a, tol: Tolerance):
    """Coarse hashable fingerprint: shape, dtype, and quantized statistics.

    Used only to prune candidate comparisons; two values that match within
    tolerance land in identical or adjacent buckets (see
    `signatures_compatible`), and acceptance always re-checks values_match.
    """
    if isinstance(a, TupleValue):
        return ("tuple",) + tuple(value_signature(x, tol) for x in a)
    width = max(tol.atol, 1e-12) * 4.0
    if a.dtype == "i64":
        stats = (int(a.array.min(initial=0)), int(a.array.max(initial=0)), int(a.array.sum()))
        return (a.shape, "i64", stats)
    if a.array.size == 0:
        return (a.shape, "f64", (0, 0))
    mean = float(a.array.mean())
    amax = float(np.abs(a.array).max())
    return (a.shape, "f64", (_bucket(mean, width), _bucket(amax, width)))


def signatures_compatible(sa, sb) -> bool:
    """Blocking-scheme comparison: exact on shape/dtype, +-1 on stat buckets."""
    if sa == sb:
        return True
    if sa[0] == "tuple" or sb[0] == "tuple":
        if sa[0] != "tuple" or sb[0] != "tuple" or len(sa) != len(sb):
            return False
        return all(signatures_compatible(x, y) for x, y in zip(sa[1:], sb[1:]))
    if sa[0] != sb[0] or sa[1] != sb[1]:
        return False
    if sa[1] == "i64":
        return sa[2] == sb[2]
    return all(abs(x - y) <= 1 for x, y in zip(sa[2], sb[2]))
