"""Joint e-graph: union-find over e-classes, hash-consed node table,
worklist-driven congruence rebuilding, and per-class attached execution data.

Rebuilding after a merge proceeds in three steps until fixpoint: parent
references are canonicalized, newly congruent parents are merged and
re-enqueued, and the values of parents whose input classes changed are
refreshed by re-executing the operator on the representative inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import JointGraph, topo_order
from .interp import eval_op
from .ops import op_info
from .tensors import TensorValue, TupleValue


class UsageError(ValueError):
    """API misuse such as an unknown e-class id."""


class EngineError(RuntimeError):
    """Internal failure, e.g. value refresh raised during rebuild."""


def freeze_attrs(attrs: dict) -> tuple:
    out = []
    for k in sorted(attrs):
        v = attrs[k]
        if isinstance(v, list):
            v = tuple(v)
        out.append((k, v))
    return tuple(out)


def thaw_attrs(frozen: tuple) -> dict:
    return dict(frozen)


@dataclass(frozen=True)
class ENode:
    op: str
    attrs: tuple  # frozen attribute items
    children: tuple  # EClassId tuple

    def attr_dict(self) -> dict:
        return thaw_attrs(self.attrs)

    def __repr__(self):
        bits = ",".join(f"{k}={v}" for k, v in self.attrs if k != "__uid")
        head = f"{self.op}[{bits}]" if bits else self.op
        if not self.children:
            return head
        return f"{head}({','.join(map(str, self.children))})"


@dataclass
class EClass:
    nodes: dict = field(default_factory=dict)  # ENode -> insertion seq
    parents: list = field(default_factory=list)  # (ENode, EClassId)
    tags: set = field(default_factory=set)  # subset of {"A","B","aux"}
    span: set = field(default_factory=set)  # original sides reachable below
    node_ids: list = field(default_factory=list)  # joint-graph ids in this class


class EGraph:
    def __init__(self):
        self._parent: list = []  # union-find
        self.classes: dict = {}  # canonical id -> EClass
        self.memo: dict = {}  # canonical ENode -> EClassId
        self.values: dict = {}  # canonical id -> TensorValue/TupleValue
        self.worklist: list = []
        self.node_class: dict = {}  # joint node id -> EClassId
        self.merge_log: list = []  # (handle_a, handle_b, reason)
        self.epoch: int = 0  # bumped on every merge; caches key off this
        self._seq: int = 0

    # ------------------------------------------------------------------ find

    def find(self, cid: int) -> int:
        if not 0 <= cid < len(self._parent):
            raise UsageError(f"unknown e-class {cid}")
        root = cid
        while self._parent[root] != root:
            root = self._parent[root]
        while self._parent[cid] != root:  # path compression
            self._parent[cid], cid = root, self._parent[cid]
        return root

    def canonical_classes(self) -> list:
        return sorted({self.find(i) for i in range(len(self._parent))})

    def canonicalize(self, enode: ENode) -> ENode:
        return ENode(enode.op, enode.attrs, tuple(self.find(c) for c in enode.children))

    def members(self, cid: int) -> list:
        """Member e-nodes, canonicalized, deduped, in insertion order."""
        cls = self.classes[self.find(cid)]
        seen = {}
        for enode, seq in sorted(cls.nodes.items(), key=lambda kv: kv[1]):
            canon = self.canonicalize(enode)
            if canon not in seen:
                seen[canon] = seq
        return list(seen)

    def is_leaf_class(self, cid: int) -> bool:
        return any(op_info(n.op).leaf for n in self.classes[self.find(cid)].nodes)

    def value(self, cid: int):
        return self.values.get(self.find(cid))

    # ------------------------------------------------------------- add_node

    def _new_class(self) -> int:
        cid = len(self._parent)
        self._parent.append(cid)
        self.classes[cid] = EClass()
        return cid

    def add_node(self, op: str, attrs: dict, children: list, tag: str = "aux",
                 node_id: int = None, value=None) -> int:
        """Insert an e-node; returns the memoized class or a fresh one.

        The value is computed eagerly from child representative values when
        possible; evaluation failures leave the value unattached.
        """
        canon_children = tuple(self.find(c) for c in children)
        enode = ENode(op, freeze_attrs(attrs), canon_children)
        existing = self.memo.get(enode)
        if existing is not None:
            cid = self.find(existing)
            if node_id is not None:
                self.classes[cid].node_ids.append(node_id)
                self.node_class[node_id] = cid
            return cid

        cid = self._new_class()
        cls = self.classes[cid]
        cls.nodes[enode] = self._seq
        self._seq += 1
        cls.tags.add(tag)
        if tag in ("A", "B"):
            cls.span.add(tag)
        else:
            for c in canon_children:
                cls.span |= self.classes[c].span
        if node_id is not None:
            cls.node_ids.append(node_id)
            self.node_class[node_id] = cid
        self.memo[enode] = cid
        for c in dict.fromkeys(canon_children):
            self.classes[c].parents.append((enode, cid))

        if value is not None:
            self.values[cid] = value
        elif children and all(self.find(c) in self.values for c in children):
            try:
                self.values[cid] = eval_op(
                    op, attrs, [self.values[self.find(c)] for c in children]
                )
            except Exception:
                pass  # no value attached; candidates simply skip this class
        return cid

    # ---------------------------------------------------------------- merge

    def handle_of(self, cid: int, _stack=None):
        """Evaluable description of a class: original node id or aux term."""
        cid = self.find(cid)
        cls = self.classes[cid]
        if cls.node_ids:
            return ("node", min(cls.node_ids))
        _stack = _stack or set()
        if cid in _stack:
            return ("class", cid)
        _stack = _stack | {cid}
        enode = min(cls.nodes, key=cls.nodes.get)
        return ("op", enode.op, enode.attrs,
                tuple(self.handle_of(c, _stack) for c in enode.children))

    def merge(self, a: int, b: int, reason: str = "") -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.merge_log.append((self.handle_of(ra), self.handle_of(rb), reason))
        root, other = (ra, rb) if ra < rb else (rb, ra)
        self._parent[other] = root
        rc, oc = self.classes[root], self.classes.pop(other)
        rc.nodes.update(oc.nodes)
        rc.parents.extend(oc.parents)
        rc.tags |= oc.tags
        rc.span |= oc.span
        rc.node_ids.extend(oc.node_ids)
        for nid in oc.node_ids:
            self.node_class[nid] = root
        # the class with the smaller canonical id keeps its attached value
        if root not in self.values and other in self.values:
            self.values[root] = self.values[other]
        self.values.pop(other, None)
        self.worklist.append(root)
        self.epoch += 1
        return True

    # -------------------------------------------------------------- rebuild

    def _representative_enode(self, cid: int):
        cls = self.classes[cid]
        best = None
        for enode in self.members(cid):
            if op_info(enode.op).leaf:
                continue
            if all(self.find(c) in self.values for c in enode.children):
                best = enode
                break
        return best

    def _refresh_value(self, cid: int) -> bool:
        """Re-execute the representative operator; True if the value moved."""
        cid = self.find(cid)
        enode = self._representative_enode(cid)
        if enode is None:
            return False
        try:
            new = eval_op(
                enode.op,
                enode.attr_dict(),
                [self.values[self.find(c)] for c in enode.children],
            )
        except Exception as e:
            raise EngineError(f"value refresh failed for class {cid} via {enode}: {e}") from e
        old = self.values.get(cid)
        self.values[cid] = new
        if old is None:
            return True
        return not _values_close(old, new)

    def rebuild(self) -> int:
        """Restore congruence; returns the number of congruence merges."""
        merges = 0
        refresh_budget = {}
        while self.worklist:
            todo = sorted({self.find(c) for c in self.worklist})
            self.worklist.clear()
            for cid in todo:
                cid = self.find(cid)
                merges += self._repair(cid, refresh_budget)
        return merges

    def _repair(self, cid: int, refresh_budget: dict) -> int:
        merges = 0
        cls = self.classes[cid]
        old_parents = cls.parents
        cls.parents = []
        new_parents = {}
        for penode, pcid in old_parents:
            pcid = self.find(pcid)
            canon = self.canonicalize(penode)
            if penode != canon:
                stale = self.memo.get(penode)
                if stale is not None and self.find(stale) == pcid:
                    del self.memo[penode]
            existing = self.memo.get(canon)
            if existing is not None and self.find(existing) != pcid:
                if self.merge(existing, pcid, reason="congruence"):
                    merges += 1
                pcid = self.find(pcid)
            self.memo[canon] = pcid
            if canon not in new_parents:
                new_parents[canon] = pcid
        cid = self.find(cid)
        self.classes[cid].parents.extend(new_parents.items())

        # step 3: refresh execution data of parents whose inputs changed
        for pcid in sorted({self.find(p) for p in new_parents.values()}):
            budget = refresh_budget.get(pcid, 0)
            if budget >= 3:
                continue
            refresh_budget[pcid] = budget + 1
            if self._refresh_value(pcid):
                self.worklist.append(pcid)
        return merges

    # ----------------------------------------------------------------- dump

    def dump(self) -> str:
        """Deterministic textual listing for golden tests."""
        lines = []
        for cid in self.canonical_classes():
            cls = self.classes[cid]
            tags = "".join(sorted(cls.tags))
            value = self.values.get(cid)
            if isinstance(value, TupleValue):
                shape = "tuple(" + ",".join(str(list(v.shape)) for v in value) + ")"
            elif isinstance(value, TensorValue):
                shape = str(list(value.shape))
            else:
                shape = "-"
            members = " ".join(repr(n) for n in self.members(cid))
            lines.append(f"class {cid} tags={tags} value={shape}: {members}")
        return "\n".join(lines) + "\n"


def _values_close(a, b, eps: float = 1e-12) -> bool:
    if isinstance(a, TupleValue) or isinstance(b, TupleValue):
        if not (isinstance(a, TupleValue) and isinstance(b, TupleValue)) or len(a) != len(b):
            return False
        return all(_values_close(x, y, eps) for x, y in zip(a, b))
    if a.shape != b.shape or a.dtype != b.dtype:
        return False
    if a.dtype == "i64":
        return bool(np.array_equal(a.array, b.array))
    return bool(np.all(np.abs(a.array - b.array) <= eps))


def init_egraph(jg: JointGraph, values_a: dict, values_b: dict) -> EGraph:
    """One e-class per joint-graph node, with execution data attached.

    Hash-consing may pre-merge bit-identical operator structures within one
    side; cross-side equivalence is always established explicitly later, so
    leaves carry a uniquifying marker.
    """
    g = EGraph()
    for side, graph, values in (("A", jg.graph_a, values_a), ("B", jg.graph_b, values_b)):
        for nid in topo_order(graph):
            node = graph.nodes[nid]
            if op_info(node.op).leaf:
                attrs = dict(node.attrs)
                attrs["__uid"] = nid
                g.add_node(node.op, attrs, [], tag=side, node_id=nid,
                           value=values[nid])
            else:
                children = [g.node_class[c] for c in node.children]
                cid = g.add_node(node.op, dict(node.attrs), children, tag=side,
                                 node_id=nid, value=values[nid])
                g.classes[cid].tags.add(side)
                g.classes[cid].span.add(side)
    return g
