import random
from fractions import Fraction

import pytest

from fplower.costing import CostModel, program_cost
from fplower.egraph import EGraph
from fplower.extraction import NoWellTypedProgram, build_table, multi_extract, typed_extract
from fplower.ir import FloatOp, Lit, RealOp, TypeTag, Var, iter_subexprs, typecheck
from fplower.rules import math_rules
from fplower.target import derive_rules, load_target_source

from _refs import oracle_best_costs

TOY = """
(define-operator (add64 [x binary64] [y binary64]) binary64 #:approx (+ x y) #:surface + #:cost 2)
(define-operator (mul64 [x binary64] [y binary64]) binary64 #:approx (* x y) #:surface * #:cost 3)
(define-operator (div64 [x binary64] [y binary64]) binary64 #:approx (/ x y) #:surface / #:cost 9)
(define-operator (sqrt64 [x binary64]) binary64 #:approx (sqrt x) #:surface sqrt #:cost 5)
(define-operator (add32 [x binary32] [y binary32]) binary32 #:approx (+ x y) #:surface + #:cost 1)
(define-operator (mul32 [x binary32] [y binary32]) binary32 #:approx (* x y) #:surface * #:cost 1)
(define-operator (div32 [x binary32] [y binary32]) binary32 #:approx (/ x y) #:surface / #:cost 4)
(define-operator (rcp32 [x binary32]) binary32 #:approx (/ 1 x) #:cost 2)
(define-operator (neg32 [x binary32]) binary32 #:approx (neg x) #:surface neg #:cost 1)
(define-operator (widen [x binary32]) binary64 #:approx x #:cost 1)
(define-operator (narrow [x binary64]) binary32 #:approx x #:cost 1)
(define-target toy
  #:literals ([binary64 1] [binary32 1])
  #:var-cost 1
  #:operators (add64 mul64 div64 sqrt64 add32 mul32 div32 rcp32 neg32 widen narrow))
"""


def _toy():
    t = load_target_source(TOY)
    return t, CostModel(t)


def _worked_example_graph(t):
    """One class holding a real division, both float divisions, and a
    reciprocal; children are independent leaves."""
    g = EGraph()
    real = g.add(RealOp("/", (Var("p"), Var("q"))))
    d64 = g.add(FloatOp("div64", (Var("a"), Var("b"))))
    d32 = g.add(FloatOp("div32", (Var("u"), Var("v"))))
    rcp = g.add(FloatOp("rcp32", (Var("v"),)))
    for other in (d64, d32, rcp):
        g.union(real, other)
    g.rebuild()
    env = {
        "p": TypeTag.REAL, "q": TypeTag.REAL,
        "a": TypeTag.B64, "b": TypeTag.B64,
        "u": TypeTag.B32, "v": TypeTag.B32,
    }
    return g, g.find(real), env


def test_worked_example_grouped_by_type():
    t, cm = _toy()
    g, cls, env = _worked_example_graph(t)
    table = build_table(g, cm, env)
    e64 = typed_extract(g, cm, cls, TypeTag.B64, env, table=table)
    assert e64 == FloatOp("div64", (Var("a"), Var("b")))  # real node ignored
    e32 = typed_extract(g, cm, cls, TypeTag.B32, env, table=table)
    assert e32 == FloatOp("rcp32", (Var("v"),))  # 2+1 beats 4+1+1


def test_worked_example_flipped_costs():
    flipped = TOY.replace("#:approx (/ 1 x) #:cost 2", "#:approx (/ 1 x) #:cost 9")
    t = load_target_source(flipped)
    cm = CostModel(t)
    g, cls, env = _worked_example_graph(t)
    e32 = typed_extract(g, cm, cls, TypeTag.B32, env)
    assert e32 == FloatOp("div32", (Var("u"), Var("v")))


def test_single_variable_graph():
    t, cm = _toy()
    g = EGraph()
    cid = g.add(Var("x"))
    env = {"x": TypeTag.B64}
    table = build_table(g, cm, env)
    assert set(table) == {(g.find(cid), TypeTag.B64)}
    assert typed_extract(g, cm, cid, TypeTag.B64, env, table=table) == Var("x")
    with pytest.raises(NoWellTypedProgram):
        typed_extract(g, cm, cid, TypeTag.B32, env, table=table)


def test_literal_usable_at_every_exact_width():
    t, cm = _toy()
    g = EGraph()
    cid = g.add(Lit(Fraction(3, 2), TypeTag.B64))
    table = build_table(g, cm, {})
    assert (g.find(cid), TypeTag.B64) in table
    assert (g.find(cid), TypeTag.B32) in table
    g2 = EGraph()
    c2 = g2.add(Lit(Fraction(1, 10).limit_denominator(1 << 40), TypeTag.REAL))
    # an arbitrary rational that is exact in neither width gets no entry
    g3 = EGraph()
    c3 = g3.add(Lit(Fraction(1, 3), TypeTag.REAL))
    assert not build_table(g3, cm, {})


def _random_typed_graph(seed: int, target, size: int):
    rng = random.Random(seed)
    env = {"a": TypeTag.B64, "b": TypeTag.B64, "u": TypeTag.B32, "v": TypeTag.B32}
    g = EGraph()
    ids = [g.add(Var(n)) for n in env]
    ids.append(g.add(Lit(Fraction(1), TypeTag.REAL)))
    ids.append(g.add(Lit(Fraction(1, 3), TypeTag.REAL)))
    opnames = list(target.operators)
    real_ops = ["+", "*", "/", "sqrt", "neg"]
    while g.node_count() < size:
        if rng.random() < 0.55:
            name = rng.choice(opnames)
            op = target.operators[name]
            kids = tuple(rng.choice(ids) for _ in op.arg_types)
            ids.append(g._add_node(("op", name), g._uf.canon(kids)))
        else:
            sym = rng.choice(real_ops)
            arity = 1 if sym in ("sqrt", "neg") else 2
            kids = tuple(rng.choice(ids) for _ in range(arity))
            ids.append(g._add_node(("real", sym), g._uf.canon(kids)))
        if rng.random() < 0.3:
            g.union(rng.choice(ids), rng.choice(ids))
    g.rebuild()
    return g, env


@pytest.mark.parametrize("seed", range(12))
def test_table_costs_match_bruteforce_minimum(seed):
    t, cm = _toy()
    g, env = _random_typed_graph(seed, t, 30)
    table = build_table(g, cm, env)
    rounds = 2 * len(g.class_ids()) + 4
    want = oracle_best_costs(g, t, env, rounds)
    got = {key: entry.cost for key, entry in table.items()}
    assert got == want
    # extracted programs are float-only, well typed, and cost what the
    # table says
    for (cid, ty), entry in table.items():
        e = typed_extract(g, cm, cid, ty, env, table=table)
        assert not any(isinstance(n, RealOp) for _, n in iter_subexprs(e))
        assert typecheck(e, env, t) is ty
        assert program_cost(e, cm) == pytest.approx(entry.cost)


def test_monotone_adding_nodes_never_raises_costs():
    t, cm = _toy()
    g, env = _random_typed_graph(3, t, 20)
    before = {k: e.cost for k, e in build_table(g, cm, env).items()}
    # graft a cheap alternative into some class
    some = g.class_ids()[0]
    g.union(some, g.add(Var("a")))
    g.rebuild()
    after = {k: e.cost for k, e in build_table(g, cm, env).items()}
    for key, cost in before.items():
        ncost = after.get((g.find(key[0]), key[1]))
        assert ncost is not None and ncost <= cost + 1e-12


def _fig4_graph(t):
    g = EGraph()
    x, y = g.add(Var("x")), g.add(Var("y"))
    one = g.add(Lit(Fraction(1), TypeTag.REAL))
    recip_real = g._add_node(("real", "/"), (one, y))
    rcp = g._add_node(("op", "rcp32"), (y,))
    g.union(recip_real, rcp)
    div_real = g._add_node(("real", "/"), (x, y))
    div32 = g._add_node(("op", "div32"), (x, y))
    mul32 = g._add_node(("op", "mul32"), (x, g.find(recip_real)))
    g.union(div_real, div32)
    g.union(div_real, mul32)
    g.rebuild()
    return g, g.find(div_real)


def test_multi_extract_fig4_two_candidates():
    t, cm = _toy()
    g, cls = _fig4_graph(t)
    env = {"x": TypeTag.B32, "y": TypeTag.B32}
    cands = multi_extract(g, cm, cls, TypeTag.B32, cap=40, env=env)
    assert cands == [
        FloatOp("mul32", (Var("x"), FloatOp("rcp32", (Var("y"),)))),
        FloatOp("div32", (Var("x"), Var("y"))),
    ]
    assert multi_extract(g, cm, cls, TypeTag.B64, cap=40, env=env) == []


def test_multi_extract_no_float_nodes_empty():
    t, cm = _toy()
    g = EGraph()
    cid = g.add(RealOp("+", (Var("p"), Var("p"))))
    assert multi_extract(g, cm, cid, TypeTag.B64, cap=10, env={"p": TypeTag.REAL}) == []


def test_multi_extract_cap_and_bound():
    t, cm = _toy()
    rng = random.Random(0)
    for seed in range(6):
        g, env = _random_typed_graph(seed, t, 25)
        for cid in g.class_ids():
            nodes = [n for n in g.class_nodes(cid) if n.head[0] == "op"]
            cands = multi_extract(g, cm, cid, TypeTag.B32, cap=3, env=env)
            assert len(cands) <= 3
            full = multi_extract(g, cm, cid, TypeTag.B32, cap=10**9, env=env)
            assert len(full) <= len(nodes)
            costs = [program_cost(c, cm) for c in full]
            assert costs == sorted(costs)


def test_extraction_from_saturated_reciprocal():
    t, cm = _toy()
    g = EGraph()
    root = g.add(FloatOp("div32", (Var("u"), Var("v"))))
    env = {"u": TypeTag.B32, "v": TypeTag.B32}
    g.saturate(math_rules() + derive_rules(t), node_limit=1000, iter_limit=6)
    best = typed_extract(g, cm, root, TypeTag.B32, env)
    assert best == FloatOp("mul32", (Var("u"), FloatOp("rcp32", (Var("v"),))))
    # desugaring preservation: the extraction's real meaning is in the
    # same class as the original's
    from fplower.ir import desugar

    d = g.add(desugar(best, t))
    assert g.find(d) == g.find(root)
