"""Equivalence verification for tensor computation graphs.

Builds a joint e-graph over two computation graphs with execution values
attached to e-classes, infers candidate relations from those values,
synthesizes and validates rewrite rules on the fly, and localizes the first
unexplained divergence when equivalence cannot be established.
"""

from .graph import (
    ComputationGraph,
    CycleError,
    JointGraph,
    Node,
    ParseError,
    join_graphs,
    parse_graph,
    serialize_graph,
    topo_order,
)
from .ops import SchemaError
from .shapes import AttrError, ShapeError
from .tensors import TensorValue, Tolerance, TupleValue, value_signature, values_match
from .interp import DomainError, EvalError, eval_op, run_graph

__all__ = [
    "AttrError",
    "ComputationGraph",
    "CycleError",
    "DomainError",
    "EvalError",
    "JointGraph",
    "Node",
    "ParseError",
    "SchemaError",
    "ShapeError",
    "TensorValue",
    "Tolerance",
    "TupleValue",
    "eval_op",
    "join_graphs",
    "parse_graph",
    "run_graph",
    "serialize_graph",
    "topo_order",
    "value_signature",
    "values_match",
]

__version__ = "0.1.0"
