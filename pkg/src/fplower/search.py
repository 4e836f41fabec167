"""Iterative improvement: pick suspect subexpressions, rewrite them
through the e-graph, evaluate the variants, and keep the Pareto frontier
of cost versus accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .costing import CostModel, cost_opportunity, program_cost
from .egraph import EGraph
from .extraction import build_table, multi_extract
from .ir import (
    Cmp,
    Expr,
    FloatOp,
    If,
    Path,
    Program,
    children,
    format_fpcore,
    iter_subexprs,
    replace_at,
    resolve,
    subexpr_at,
    typecheck,
)
from .oracle import EvalContext, accuracy, local_error, sample, train_test_split
from .rules import math_rules
from .target import TargetDesc, derive_rules

LOCAL_ERROR_THRESHOLD = 0.5  # bits; quieter nodes are left alone


@dataclass(frozen=True)
class SearchConfig:
    iterations: int = 4
    node_limit: int = 8000
    candidates_per_site: int = 40
    sites_per_iteration: int = 3
    points: int = 512
    seed: int = 0
    saturate_iters: int = 8  # per-site e-graph iteration bound

    def __post_init__(self):
        for name in ("iterations", "node_limit", "candidates_per_site",
                     "sites_per_iteration", "points", "saturate_iters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class Candidate:
    program: Program
    cost: float
    mean_error_bits: float  # on training points
    id: int
    iteration: int
    parent: int | None

    @property
    def key(self) -> str:
        return format_fpcore(self.program)


@dataclass(frozen=True)
class FrontierEntry:
    program: Program
    cost: float
    train_error_bits: float
    test_error_bits: float
    accuracy: float  # output precision minus test error


@dataclass
class ImproveResult:
    frontier: list[FrontierEntry]  # cost-ascending, non-dominated on test error
    original: FrontierEntry
    trace: list[dict]
    train_points: list = field(default_factory=list)
    test_points: list = field(default_factory=list)


def pareto_filter(cands: list[Candidate]) -> list[Candidate]:
    """Exact non-dominated subset over (cost, error), cost-ascending.

    Structural duplicates collapse; among equal (cost, error) pairs the
    lexicographically smallest formatted program survives.
    """
    uniq: dict[str, Candidate] = {}
    for c in cands:
        uniq.setdefault(c.key, c)
    ranked = sorted(uniq.values(), key=lambda c: (c.cost, c.mean_error_bits, c.key))
    front: list[Candidate] = []
    best_err = float("inf")
    for c in ranked:
        if c.mean_error_bits < best_err:
            front.append(c)
            best_err = c.mean_error_bits
    return front


def _allowed_sites(e: Expr) -> set[Path]:
    """Paths of operator nodes eligible for rewriting: not inside an If
    condition and not inside a comparison."""
    allowed: set[Path] = set()

    def walk(node: Expr, path: Path, ok: bool):
        if isinstance(node, If):
            walk(node.cond, path + (0,), False)
            walk(node.then, path + (1,), ok)
            walk(node.orelse, path + (2,), ok)
            return
        if isinstance(node, Cmp):
            walk(node.lhs, path + (0,), False)
            walk(node.rhs, path + (1,), False)
            return
        if ok and isinstance(node, FloatOp):
            allowed.add(path)
        for i, c in enumerate(children(node)):
            walk(c, path + (i,), ok)

    walk(e, (), True)
    return allowed


def pick_sites(
    cand: Candidate,
    target: TargetDesc,
    points,
    k: int,
    cm: CostModel,
    ctx: EvalContext,
) -> list[tuple[Path, Expr]]:
    """Union of the top-k high-local-error nodes and the top-k positive
    cost-opportunity nodes, in rank order."""
    body = cand.program.body
    allowed = _allowed_sites(body)
    if not allowed:
        return []
    lerr = local_error(cand.program, points, target, ctx)
    opp = cost_opportunity(body, target, cm, cand.program.env)

    by_error = sorted(
        (p for p in allowed if lerr.get(p, 0.0) > LOCAL_ERROR_THRESHOLD),
        key=lambda p: (-lerr[p], p),
    )[:k]
    by_opportunity = sorted(
        (p for p in allowed if max(opp.get(p, 0.0), 0.0) > 0),
        key=lambda p: (-max(opp[p], 0.0), p),
    )[:k]

    chosen: list[Path] = []
    for p in by_error + by_opportunity:
        if p not in chosen:
            chosen.append(p)
    return [(p, subexpr_at(body, p)) for p in chosen]


def rewrite_site(
    cand: Candidate,
    site: Path,
    target: TargetDesc,
    cfg: SearchConfig,
    cm: CostModel,
) -> tuple[list[Program], dict]:
    """Saturate the site subexpression against the identity library plus
    the target's rules, then substitute every variant back in."""
    program = cand.program
    node = subexpr_at(program.body, site)
    assert isinstance(node, FloatOp), "rewrite sites must be operator nodes"
    env = program.env
    ty = typecheck(node, env, target)

    graph = EGraph()
    root = graph.add(node)
    report = graph.saturate(
        math_rules() + derive_rules(target),
        node_limit=cfg.node_limit,
        iter_limit=cfg.saturate_iters,
    )
    table = build_table(graph, cm, env)
    variants = multi_extract(
        graph, cm, root, ty, cfg.candidates_per_site, env, table=table
    )
    programs = [
        Program(program.params, replace_at(program.body, site, v), program.out_type)
        for v in variants
    ]
    stats = {
        "site": "." + ".".join(map(str, site)) if site else ".",
        "egraph_nodes": report.node_count,
        "stopped_by": report.stopped_by,
        "variants": len(programs),
    }
    return programs, stats


def improve(program: Program, target: TargetDesc, cfg: SearchConfig) -> ImproveResult:
    """The full loop: sample, iterate rewrite/evaluate/filter, then score
    the surviving frontier on held-out test points."""
    resolved = resolve(program, target)
    cm = CostModel(target)
    ctx = EvalContext()
    points = sample(resolved, target, cfg.points, cfg.seed, ctx)
    train, test = train_test_split(points)
    if not test:
        test = train

    counter = 0

    def evaluate(prog: Program, iteration: int, parent: int | None) -> Candidate:
        nonlocal counter
        counter += 1
        return Candidate(
            program=prog,
            cost=program_cost(prog.body, cm),
            mean_error_bits=accuracy(prog, train, target, ctx).mean_bits,
            id=counter,
            iteration=iteration,
            parent=parent,
        )

    original = evaluate(resolved, 0, None)
    evaluated: dict[str, Candidate] = {original.key: original}
    frontier = pareto_filter([original])
    trace: list[dict] = []

    for iteration in range(1, cfg.iterations + 1):
        fresh: list[Candidate] = []
        site_stats: list[dict] = []
        for member in frontier:
            sites = pick_sites(member, target, train, cfg.sites_per_iteration, cm, ctx)
            for path, _ in sites:
                programs, stats = rewrite_site(member, path, target, cfg, cm)
                site_stats.append(stats)
                for prog in programs:
                    key = format_fpcore(prog)
                    if key in evaluated:
                        continue
                    cand = evaluate(prog, iteration, member.id)
                    evaluated[key] = cand
                    fresh.append(cand)
        frontier = pareto_filter(frontier + fresh)
        trace.append(
            {
                "iteration": iteration,
                "new_candidates": len(fresh),
                "sites": site_stats,
                "frontier_size": len(frontier),
            }
        )

    def finalize(c: Candidate) -> FrontierEntry:
        test_bits = accuracy(c.program, test, target, ctx).mean_bits
        return FrontierEntry(
            program=c.program,
            cost=c.cost,
            train_error_bits=c.mean_error_bits,
            test_error_bits=test_bits,
            accuracy=c.program.out_type.precision - test_bits,
        )

    entries = [finalize(c) for c in frontier]
    # Re-filter on test error, reusing the Candidate machinery.
    refiltered = pareto_filter(
        [
            Candidate(e.program, e.cost, e.test_error_bits, i, cfg.iterations, None)
            for i, e in enumerate(entries)
        ]
    )
    surviving = {c.key for c in refiltered}
    final = [e for e in entries if format_fpcore(e.program) in surviving]
    final.sort(key=lambda e: (e.cost, e.test_error_bits, format_fpcore(e.program)))

    return ImproveResult(
        frontier=final,
        original=finalize(original),
        trace=trace,
        train_points=train,
        test_points=test,
    )
