"""Equivalence graph over mixed real/float terms, with e-matching and
bounded equality saturation.

E-node heads are tagged tuples: ('real', symbol), ('op', name),
('var', name), ('lit', Fraction). Literal nodes are untyped; a literal is
usable at any float width that represents its value exactly, which is
decided at extraction time. If/Cmp nodes never enter the graph.

The congruence rebuild runs to a fixpoint after each saturation iteration
(matches are collected before any unions, so iterations are batches).
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

from .ir import Cmp, Expr, FloatOp, If, Lit, RealOp, Var, is_pattern_var

if os.environ.get("FPLOWER_PURE_PY"):
    from ._ufpy import UnionFind
else:
    try:
        from ._ufkern import UnionFind  # type: ignore[no-redef]
    except ImportError:
        from ._ufpy import UnionFind  # type: ignore[no-redef]

KERNEL = UnionFind.__module__.rsplit(".", 1)[-1].lstrip("_")


class ENode(NamedTuple):
    head: tuple
    children: tuple[int, ...]


class NodeLimitExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class SaturationReport:
    stopped_by: str  # 'saturated' | 'node_limit' | 'iter_limit'
    iterations: int
    node_count: int


class ConstantFold:
    """Rule-like marker: fold +,-,*,/,neg over exact literal children."""

    name = "const-fold"
    kind = "fold"

    _FOLDABLE = ("+", "-", "*", "/", "neg")

    def __repr__(self):
        return "<const-fold>"


def head_of(e: Expr) -> tuple:
    if isinstance(e, RealOp):
        return ("real", e.symbol)
    if isinstance(e, FloatOp):
        return ("op", e.op)
    if isinstance(e, Var):
        return ("var", e.name)
    if isinstance(e, Lit):
        return ("lit", e.value)
    raise TypeError(f"no e-graph head for {e!r}")


class EGraph:
    def __init__(self, uf_factory=UnionFind, node_limit: int | None = None):
        self._uf = uf_factory()
        self._hashcons: dict[ENode, int] = {}
        self._class_nodes: dict[int, list[ENode]] = {}
        self._head_index: dict[tuple, list[tuple[int, ENode]]] = {}
        self._dirty = False
        self.node_limit = node_limit

    # -- basic structure ----------------------------------------------------

    def find(self, cid: int) -> int:
        return self._uf.find(cid)

    def node_count(self) -> int:
        return len(self._hashcons)

    def class_ids(self) -> list[int]:
        return sorted({self._uf.find(c) for c in self._hashcons.values()})

    def class_nodes(self, cid: int) -> list[ENode]:
        return self._class_nodes.get(self._uf.find(cid), [])

    def _add_node(self, head: tuple, children: tuple[int, ...]) -> int:
        node = ENode(head, self._uf.canon(children))
        cid = self._hashcons.get(node)
        if cid is not None:
            return self._uf.find(cid)
        if self.node_limit is not None and len(self._hashcons) >= self.node_limit:
            raise NodeLimitExceeded(f"e-graph node limit {self.node_limit} exceeded")
        cid = self._uf.make()
        self._hashcons[node] = cid
        self._class_nodes[cid] = [node]
        self._head_index.setdefault(head, []).append((cid, node))
        return cid

    def add(self, e: Expr) -> int:
        """Insert an expression; structurally equal subterms share classes."""
        if isinstance(e, (If, Cmp)):
            raise ValueError("if/comparison nodes cannot enter the e-graph")
        if is_pattern_var(e):
            raise ValueError(f"pattern variable {e.name} cannot enter the e-graph")
        kids = tuple(self.add(c) for c in _expr_children(e))
        return self._add_node(head_of(e), kids)

    def union(self, a: int, b: int) -> int:
        ra, rb = self._uf.find(a), self._uf.find(b)
        if ra == rb:
            return ra
        root = self._uf.union(ra, rb)
        self._dirty = True
        return root

    def rebuild(self):
        """Restore congruence: identical canonical e-nodes share one class."""
        if not self._dirty:
            return
        uf = self._uf
        changed = True
        while changed:
            changed = False
            new_hc: dict[ENode, int] = {}
            for node, cid in self._hashcons.items():
                cnode = ENode(node.head, uf.canon(node.children))
                ccid = uf.find(cid)
                other = new_hc.get(cnode)
                if other is None:
                    new_hc[cnode] = ccid
                elif uf.find(other) != ccid:
                    new_hc[cnode] = uf.union(uf.find(other), ccid)
                    changed = True
            self._hashcons = new_hc
        self._class_nodes = {}
        self._head_index = {}
        for node, cid in self._hashcons.items():
            root = uf.find(cid)
            self._hashcons[node] = root
            self._class_nodes.setdefault(root, []).append(node)
            self._head_index.setdefault(node.head, []).append((root, node))
        self._dirty = False

    # -- e-matching ----------------------------------------------------------

    def ematch(self, pattern: Expr) -> list[tuple[int, dict[str, int]]]:
        """All (class, substitution) pairs where the pattern is represented.

        The graph must be rebuilt (congruent); substitutions map pattern
        variable names to canonical class ids.
        """
        assert not self._dirty, "ematch requires a rebuilt graph"
        out = []
        if is_pattern_var(pattern):
            for cid in self.class_ids():
                out.append((cid, {pattern.name: cid}))
            return out
        head = head_of(pattern)
        for cid, node in self._head_index.get(head, []):
            for subst in self._match_args(_pattern_children(pattern), node.children, {}):
                out.append((self._uf.find(cid), subst))
        return out

    def _match_in_class(self, pattern: Expr, cid: int, subst: dict):
        if is_pattern_var(pattern):
            bound = subst.get(pattern.name)
            if bound is None:
                s2 = dict(subst)
                s2[pattern.name] = cid
                yield s2
            elif bound == cid:
                yield subst
            return
        head = head_of(pattern)
        pkids = _pattern_children(pattern)
        for node in self.class_nodes(cid):
            if node.head == head and len(node.children) == len(pkids):
                yield from self._match_args(pkids, node.children, subst)

    def _match_args(self, pats, cids, subst):
        if not pats:
            yield subst
            return
        for s2 in self._match_in_class(pats[0], self._uf.find(cids[0]), subst):
            yield from self._match_args(pats[1:], cids[1:], s2)

    def add_instance(self, pattern: Expr, subst: dict[str, int]) -> int:
        """Insert the pattern with its variables bound to classes."""
        if is_pattern_var(pattern):
            return self._uf.find(subst[pattern.name])
        kids = tuple(self.add_instance(c, subst) for c in _pattern_children(pattern))
        return self._add_node(head_of(pattern), kids)

    # -- saturation ----------------------------------------------------------

    def saturate(self, rules, node_limit: int = 8000, iter_limit: int = 8) -> SaturationReport:
        """Apply rules until nothing new is learned or a limit is reached.

        Non-destructive: represented terms only grow. Deterministic for a
        fixed rule order.
        """
        self.rebuild()
        iterations = 0
        while True:
            if len(self._hashcons) >= node_limit:
                return SaturationReport("node_limit", iterations, len(self._hashcons))
            if iterations >= iter_limit:
                return SaturationReport("iter_limit", iterations, len(self._hashcons))

            matches = []
            for rule in rules:
                if isinstance(rule, ConstantFold):
                    matches.extend(("fold", cid, value) for cid, value in self._fold_matches(rule))
                else:
                    matches.extend((rule, cid, subst) for cid, subst in self.ematch(rule.lhs))

            before = len(self._hashcons)
            changed = False
            hit_limit = False
            for rule, cid, payload in matches:
                # Conservative head-room check keeps node_count <= node_limit.
                need = 1 if rule == "fold" else _pattern_size(rule.rhs)
                if len(self._hashcons) + need > node_limit:
                    hit_limit = True
                    break
                if rule == "fold":
                    new = self._add_node(("lit", payload), ())
                else:
                    new = self.add_instance(rule.rhs, payload)
                if self._uf.find(new) != self._uf.find(cid):
                    self.union(new, cid)
                    changed = True
            self.rebuild()
            iterations += 1
            if hit_limit:
                return SaturationReport("node_limit", iterations, len(self._hashcons))
            if not changed and len(self._hashcons) == before:
                return SaturationReport("saturated", iterations, len(self._hashcons))

    def _fold_matches(self, rule: ConstantFold):
        for cid in self.class_ids():
            have = {n.head[1] for n in self.class_nodes(cid) if n.head[0] == "lit"}
            for node in self.class_nodes(cid):
                if node.head[0] != "real" or node.head[1] not in rule._FOLDABLE:
                    continue
                vals = []
                for child in node.children:
                    lit = next((n.head[1] for n in self.class_nodes(child) if n.head[0] == "lit"), None)
                    if lit is None:
                        break
                    vals.append(lit)
                else:
                    value = _fold(node.head[1], vals)
                    if value is not None and value not in have:
                        yield cid, value

    # -- debugging -----------------------------------------------------------

    def dump(self) -> str:
        """One line per class: `cN := node | node | ...`."""
        self.rebuild()
        lines = []
        for cid in self.class_ids():
            rendered = sorted(_render_node(n) for n in self.class_nodes(cid))
            lines.append(f"c{cid} := " + " | ".join(rendered))
        return "\n".join(lines)


def _expr_children(e: Expr) -> tuple[Expr, ...]:
    if isinstance(e, (RealOp, FloatOp)):
        return e.args
    return ()


def _pattern_children(p: Expr) -> tuple[Expr, ...]:
    if isinstance(p, (RealOp, FloatOp)):
        return p.args
    return ()


def _pattern_size(p: Expr) -> int:
    return 1 + sum(_pattern_size(c) for c in _pattern_children(p))


def _fold(sym: str, vals: list[Fraction]) -> Fraction | None:
    if sym == "+":
        return vals[0] + vals[1]
    if sym == "-":
        return vals[0] - vals[1]
    if sym == "*":
        return vals[0] * vals[1]
    if sym == "/":
        return vals[0] / vals[1] if vals[1] != 0 else None
    return -vals[0]


def _render_node(n: ENode) -> str:
    kind, payload = n.head
    if kind == "lit":
        label = str(payload)
    else:
        label = payload
    if not n.children:
        return label
    return f"({label} " + " ".join(f"c{c}" for c in n.children) + ")"
