"""Program cost under a target's model, and the cost-opportunity analysis
that scores how much cheaper each node could get by local simplification.
"""

from __future__ import annotations

from dataclasses import dataclass

from .egraph import EGraph
from .ir import (
    Cmp,
    Expr,
    FloatOp,
    If,
    Lit,
    Path,
    RealOp,
    TypeTag,
    Var,
    children,
    iter_subexprs,
    typecheck,
    with_children,
)
from .target import TargetDesc, derive_rules


class UnresolvedExpressionError(ValueError):
    pass


@dataclass(frozen=True)
class CostModel:
    target: TargetDesc

    def op_cost(self, name: str) -> float:
        return self.target.operators[name].cost

    def literal_cost(self, ty: TypeTag) -> float:
        return self.target.literal_cost_of(ty)

    @property
    def var_cost(self) -> float:
        return self.target.var_cost

    @property
    def if_mode(self) -> str:
        return self.target.if_mode

    @property
    def if_overhead(self) -> float:
        return self.target.if_overhead

    def cmp_cost(self, relation: str) -> float:
        return self.target.cmp_cost(relation)


def program_cost(e: Expr, cm: CostModel) -> float:
    """Tree cost: operator costs plus per-variable and per-literal charges.

    Conditionals cost the predicate plus the dearer branch (scalar mode)
    or both branches (vector mode), plus a fixed overhead.
    """
    if isinstance(e, Var):
        return cm.var_cost
    if isinstance(e, Lit):
        if not e.type.is_float:
            raise UnresolvedExpressionError("cost of an unresolved (real) literal")
        return cm.literal_cost(e.type)
    if isinstance(e, FloatOp):
        return cm.op_cost(e.op) + sum(program_cost(a, cm) for a in e.args)
    if isinstance(e, Cmp):
        return cm.cmp_cost(e.relation) + program_cost(e.lhs, cm) + program_cost(e.rhs, cm)
    if isinstance(e, If):
        branches = (program_cost(e.then, cm), program_cost(e.orelse, cm))
        combine = max(branches) if cm.if_mode == "scalar" else sum(branches)
        return cm.if_overhead + program_cost(e.cond, cm) + combine
    if isinstance(e, RealOp):
        raise UnresolvedExpressionError(f"cost of unresolved operator '{e.symbol}'")
    raise UnresolvedExpressionError(f"cannot cost {e!r}")


# Saturation budget for the analysis pass; it is meant to be much lighter
# than the real rewrite pass.
OPPORTUNITY_NODE_LIMIT = 2000
OPPORTUNITY_ITER_LIMIT = 4


def cost_opportunity(
    e: Expr, target: TargetDesc, cm: CostModel, env: dict[str, TypeTag]
) -> dict[Path, float]:
    """Per-node cost opportunity: the cost drop available by simplifying
    the node, minus the drop already attributable to its children.

    Returned values are raw (possibly negative); callers clamp for
    ranking. If/Cmp nodes are opaque boundaries: the analysis runs on the
    maximal operator-only segments around them, and boundary nodes score
    zero. Within one segment the values telescope exactly: their sum is
    the segment root's cost delta.
    """
    from .rules import simplifying_rules  # local import avoids a cycle

    out: dict[Path, float] = {path: 0.0 for path, _ in iter_subexprs(e)}
    rules = simplifying_rules() + derive_rules(target)
    for seg_path, seg, seg_env in _segments(e, env, target):
        deltas = _segment_deltas(seg, target, cm, seg_env, rules)
        for rel, node in iter_subexprs(seg):
            opp = deltas[rel] - sum(
                deltas[rel + (i,)] for i in range(len(children(node)))
            )
            out[seg_path + rel] = opp
    return out


def _segments(e: Expr, env: dict[str, TypeTag], target, path: Path = ()):
    """Maximal If/Cmp-free subtrees, with boundary children abstracted to
    fresh typed variables."""
    if isinstance(e, If):
        yield from _segments(e.cond, env, target, path + (0,))
        yield from _segments(e.then, env, target, path + (1,))
        yield from _segments(e.orelse, env, target, path + (2,))
        return
    if isinstance(e, Cmp):
        yield from _segments(e.lhs, env, target, path + (0,))
        yield from _segments(e.rhs, env, target, path + (1,))
        return
    extra: dict[str, TypeTag] = {}
    boundaries: list[tuple[Path, Expr]] = []

    def abstract(node: Expr, rel: Path) -> Expr:
        if isinstance(node, (If, Cmp)):
            name = "$b" + ".".join(map(str, path + rel))
            extra[name] = typecheck(node, env, target)
            boundaries.append((path + rel, node))
            return Var(name)
        kids = children(node)
        if not kids:
            return node
        return with_children(node, tuple(abstract(c, rel + (i,)) for i, c in enumerate(kids)))

    seg = abstract(e, ())
    yield path, seg, {**env, **extra}
    for bpath, bnode in boundaries:
        yield from _segments(bnode, env, target, bpath)


def _segment_deltas(seg, target, cm, env, rules) -> dict[Path, float]:
    from .extraction import build_table, typed_extract

    graph = EGraph()
    ids = {rel: graph.add(sub) for rel, sub in iter_subexprs(seg)}
    graph.saturate(rules, node_limit=OPPORTUNITY_NODE_LIMIT, iter_limit=OPPORTUNITY_ITER_LIMIT)
    table = build_table(graph, cm, env)
    deltas: dict[Path, float] = {}
    for rel, sub in iter_subexprs(seg):
        ty = typecheck(sub, env, target)
        simplified = typed_extract(graph, cm, ids[rel], ty, env, table=table)
        deltas[rel] = program_cost(sub, cm) - program_cost(simplified, cm)
    return deltas
