"""Closed operator vocabulary: arities, attribute schemas, shape rules.

Every operator the engine understands is registered here.  The table is
deliberately closed: the interpreter, the validators, and the symbolic
lowerings are total over it.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class SchemaError(ValueError):
    """Unknown operator, bad arity, or attribute outside the schema."""


# attribute schema entry: name -> (type tag, required)
#   "int", "float", "ints" (tuple of ints), "str:<choices>", "tensor"
@dataclass(frozen=True)
class OpInfo:
    name: str
    min_arity: int
    max_arity: int  # -1 for unbounded
    attrs: dict = field(default_factory=dict)
    leaf: bool = False
    opaque: bool = False  # excluded from symbolic reasoning
    multi_output: bool = False


_OPS: dict[str, OpInfo] = {}


def _register(info: OpInfo) -> None:
    _OPS[info.name] = info


_register(OpInfo("input", 0, 0, leaf=True))
_register(OpInfo("constant", 0, 0, attrs={"value": ("tensor", True)}, leaf=True))
_register(OpInfo("add", 2, 2))
_register(OpInfo("mul", 2, 2))
_register(OpInfo("matmul", 2, 2))
_register(OpInfo("mm", 2, 2))
_register(OpInfo("addmm", 3, 3))
_register(OpInfo("linear", 2, 3))
_register(OpInfo("transpose", 1, 1, attrs={"axes": ("ints", True)}))
_register(OpInfo("reshape", 1, 1, attrs={"shape": ("ints", True)}))
_register(OpInfo("concat", 2, -1, attrs={"axis": ("int", True)}))
_register(OpInfo("split", 1, 1, attrs={"size": ("int", True), "axis": ("int", True)}, multi_output=True))
_register(OpInfo("chunk", 1, 1, attrs={"chunks": ("int", True), "dim": ("int", True)}, multi_output=True))
_register(OpInfo("get_item", 1, 1, attrs={"index": ("int", True)}))
_register(OpInfo("embedding", 2, 2))
_register(OpInfo("layernorm", 1, 1, attrs={"eps": ("float", False)}))
_register(OpInfo("gelu", 1, 1, attrs={"approximate": ("str:exact,tanh", False)}))
_register(OpInfo("softmax", 1, 1, attrs={"dim": ("int", True)}))
_register(OpInfo("scaled_dot_product_attention", 3, 3, attrs={"scale": ("float", False)}))
_register(OpInfo("fused_attention", 3, 3, attrs={"scale": ("float", False)}, opaque=True))
_register(OpInfo("reduce_add", 2, -1))

# Ops that only move elements around; used by the rearrangement prover and
# treated as semantically transparent by fault localization defaults.
REARRANGEMENT_OPS = frozenset({"transpose", "reshape", "concat", "split", "chunk", "get_item"})

# Fused kernels, black-box operators, and numerically heavy tensor ops.
OPAQUE_HEAVY_OPS = frozenset({
    "fused_attention", "scaled_dot_product_attention", "embedding",
    "softmax", "linear", "layernorm", "gelu", "addmm", "mm", "matmul",
})

# Default set skipped by fault localization when walking backwards.
TRANSPARENT_OPS = frozenset({"reshape", "transpose", "get_item"})

# Index of the primary data-carrying input per op (first tensor argument by
# convention; attention ops follow the query).  Used by localization.
PRIMARY_INPUT = {name: 0 for name in _OPS}

DEFAULT_LAYERNORM_EPS = 1e-5
DEFAULT_GELU_APPROXIMATE = "exact"


def op_info(name: str) -> OpInfo:
    try:
        return _OPS[name]
    except KeyError:
        raise SchemaError(f"unknown operator {name!r}") from None


def all_ops() -> tuple[str, ...]:
    return tuple(_OPS)


def is_leaf_op(name: str) -> bool:
    return op_info(name).leaf


def check_arity(name: str, n: int) -> None:
    info = op_info(name)
    if n < info.min_arity or (info.max_arity != -1 and n > info.max_arity):
        hi = "*" if info.max_arity == -1 else str(info.max_arity)
        raise SchemaError(f"{name} takes {info.min_arity}..{hi} inputs, got {n}")


def _check_attr_value(op: str, key: str, tag: str, value) -> None:
    if tag == "int":
        if not isinstance(value, int) or isinstance(value, bool):
            raise SchemaError(f"{op}.{key} must be an int")
    elif tag == "float":
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise SchemaError(f"{op}.{key} must be a number")
    elif tag == "ints":
        if not isinstance(value, (list, tuple)) or not all(
            isinstance(v, int) and not isinstance(v, bool) for v in value
        ):
            raise SchemaError(f"{op}.{key} must be a list of ints")
    elif tag.startswith("str:"):
        choices = tag[4:].split(",")
        if value not in choices:
            raise SchemaError(f"{op}.{key} must be one of {choices}, got {value!r}")
    elif tag == "tensor":
        pass  # validated by the tensor decoder
    else:  # pragma: no cover - registry bug
        raise AssertionError(tag)


def check_attrs(op: str, attrs: dict) -> None:
    """Reject attributes outside the operator's schema."""
    info = op_info(op)
    for key, value in attrs.items():
        if key not in info.attrs:
            raise SchemaError(f"{op} has no attribute {key!r}")
        _check_attr_value(op, key, info.attrs[key][0], value)
    for key, (_, required) in info.attrs.items():
        if required and key not in attrs:
            raise SchemaError(f"{op} requires attribute {key!r}")
