"""Typed extraction: per (e-class, float type) lowest-cost programs, and
per-e-node multi-extraction for candidate generation.

Real-headed e-nodes never receive table entries; a variable is usable
only at its declared type; an untyped literal is usable at any float type
that represents its value exactly. Costs are tree costs: shared subterms
are billed once per occurrence.
"""

from __future__ import annotations

from dataclasses import dataclass

from .costing import CostModel, program_cost
from .egraph import EGraph, ENode
from .fpnum import is_representable
from .ir import FLOAT_TYPES, Expr, FloatOp, Lit, TypeTag, Var, to_sexp


class NoWellTypedProgram(LookupError):
    def __init__(self, cid: int, ty: TypeTag):
        super().__init__(f"class c{cid} has no {ty.value} program")
        self.cid = cid
        self.ty = ty


@dataclass(frozen=True)
class Entry:
    cost: float
    size: int
    node: ENode


def _node_key(node: ENode):
    return (str(node.head[1]), node.children)


def _better(a: Entry, b: Entry) -> bool:
    # Ties break toward smaller trees, then lexicographic head, for
    # deterministic extraction.
    return (a.cost, a.size, _node_key(a.node)) < (b.cost, b.size, _node_key(b.node))


def build_table(
    g: EGraph, cm: CostModel, env: dict[str, TypeTag]
) -> dict[tuple[int, TypeTag], Entry]:
    """Fixed point of lowest-cost-per-type over all e-nodes.

    An operator e-node only qualifies once every argument class has an
    entry at the operator's argument type; otherwise it is skipped.
    """
    g.rebuild()
    target = cm.target
    table: dict[tuple[int, TypeTag], Entry] = {}
    class_ids = g.class_ids()

    changed = True
    while changed:
        changed = False
        for cid in class_ids:
            for node in g.class_nodes(cid):
                kind = node.head[0]
                candidates: list[tuple[TypeTag, Entry]] = []
                if kind == "var":
                    ty = env.get(node.head[1])
                    if ty is not None and ty.is_float:
                        candidates.append((ty, Entry(cm.var_cost, 1, node)))
                elif kind == "lit":
                    for ty in FLOAT_TYPES:
                        if is_representable(node.head[1], ty.fmt):
                            candidates.append((ty, Entry(cm.literal_cost(ty), 1, node)))
                elif kind == "op":
                    op = target.operators.get(node.head[1])
                    if op is None or len(node.children) != op.arity or not op.ret_type.is_float:
                        continue
                    cost, size = op.cost, 1
                    for child, aty in zip(node.children, op.arg_types):
                        sub = table.get((g.find(child), aty))
                        if sub is None:
                            break
                        cost += sub.cost
                        size += sub.size
                    else:
                        candidates.append((op.ret_type, Entry(cost, size, node)))
                for ty, entry in candidates:
                    key = (cid, ty)
                    cur = table.get(key)
                    if cur is None or _better(entry, cur):
                        table[key] = entry
                        changed = True
    return table


def typed_extract(
    g: EGraph,
    cm: CostModel,
    root: int,
    ty: TypeTag,
    env: dict[str, TypeTag],
    table: dict | None = None,
) -> Expr:
    """The lowest-cost all-float program of the given type in the class."""
    if table is None:
        table = build_table(g, cm, env)

    def recon(cid: int, want: TypeTag) -> Expr:
        entry = table.get((g.find(cid), want))
        if entry is None:
            raise NoWellTypedProgram(g.find(cid), want)
        kind, payload = entry.node.head
        if kind == "var":
            return Var(payload)
        if kind == "lit":
            return Lit(payload, want)
        op = cm.target.operators[payload]
        return FloatOp(
            payload,
            tuple(recon(c, aty) for c, aty in zip(entry.node.children, op.arg_types)),
        )

    return recon(root, ty)


def multi_extract(
    g: EGraph,
    cm: CostModel,
    cls: int,
    ty: TypeTag,
    cap: int,
    env: dict[str, TypeTag],
    table: dict | None = None,
) -> list[Expr]:
    """One candidate per float-operator e-node of the class whose output
    type matches; children take their per-type best. Deduplicated, sorted
    by cost, truncated to `cap`."""
    if table is None:
        table = build_table(g, cm, env)
    cls = g.find(cls)
    seen: dict[Expr, None] = {}
    for node in g.class_nodes(cls):
        if node.head[0] != "op":
            continue
        op = cm.target.operators.get(node.head[1])
        if op is None or op.ret_type is not ty or len(node.children) != op.arity:
            continue
        try:
            args = tuple(
                typed_extract(g, cm, c, aty, env, table=table)
                for c, aty in zip(node.children, op.arg_types)
            )
        except NoWellTypedProgram:
            continue
        seen.setdefault(FloatOp(op.name, args))
    ranked = sorted(seen, key=lambda e: (program_cost(e, cm), to_sexp(e)))
    return ranked[:cap]
