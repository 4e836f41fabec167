from fractions import Fraction

import pytest

from fplower.ir import (
    Cmp,
    FloatOp,
    If,
    Lit,
    NoSuchOperatorError,
    ParseError,
    RealOp,
    TypeCheckError,
    TypeTag,
    Var,
    desugar,
    format_fpcore,
    iter_subexprs,
    parse_program,
    replace_at,
    resolve,
    subexpr_at,
    typecheck,
)
from fplower.target import load_target_source, shipped_target

FIG3ISH = """
(define-operator (rcp.f32 [x binary32]) binary32
  #:approx (/ 1 x)
  #:cost 4.0)
(define-operator (div.f32 [x binary32] [y binary32]) binary32
  #:approx (/ x y)
  #:surface /
  #:cost 10.0)
(define-target mini #:operators (rcp.f32 div.f32))
"""


def test_parse_simple_division():
    p = parse_program("(FPCore (x) :precision binary64 (/ 1 x))")
    assert p.params == (("x", TypeTag.B64),)
    assert p.out_type is TypeTag.B64
    assert p.body == RealOp("/", (Lit(Fraction(1), TypeTag.B64), Var("x")))


def test_parse_identity():
    p = parse_program("(FPCore (x) :precision binary64 x)")
    assert p.body == Var("x")


def test_parse_rounds_literals_to_precision():
    p = parse_program("(FPCore (x) :precision binary32 0.1)")
    assert p.body == Lit(Fraction(13421773, 134217728), TypeTag.B32)
    q = parse_program("(FPCore (x) :precision binary64 1/3)")
    assert q.body.value == Fraction(float(Fraction(1, 3)))


def test_parse_errors():
    with pytest.raises(ParseError):
        parse_program("(FPCore (x) :precision binary64 (sqrt x")  # unclosed
    with pytest.raises(ParseError):
        parse_program("(FPCore (x) :precision binary64 y)")  # unbound
    with pytest.raises(ParseError):
        parse_program("(FPCore (x) :precision binary64 (sqrt x x))")  # arity
    with pytest.raises(ParseError):
        parse_program("(FPCore (x) :precision binary16 x)")  # unknown precision
    with pytest.raises(ParseError):
        parse_program("(FPCore (x x) :precision binary64 x)")  # dup param
    with pytest.raises(ParseError):
        parse_program("(FPCore (x) :precision binary64 1e999)")  # literal overflow


def test_parse_if_cmp_and_unary_minus():
    p = parse_program("(FPCore (a) :precision binary64 (if (< a 0) (- a) a))")
    assert isinstance(p.body, If)
    assert isinstance(p.body.cond, Cmp)
    assert p.body.then == RealOp("neg", (Var("a"),))


def test_resolve_picks_surface_at_precision():
    t = load_target_source(FIG3ISH)
    p = parse_program("(FPCore (x y) :precision binary32 (/ x y))")
    r = resolve(p, t)
    assert r.body == FloatOp("div.f32", (Var("x"), Var("y")))
    assert typecheck(r.body, r.env, t) is TypeTag.B32


def test_resolve_trivial_and_missing():
    t = load_target_source(FIG3ISH)
    r = resolve(parse_program("(FPCore (x) :precision binary32 x)"), t)
    assert r.body == Var("x")
    with pytest.raises(NoSuchOperatorError):
        resolve(parse_program("(FPCore (x) :precision binary32 (fma x x x))"), t)
    with pytest.raises(NoSuchOperatorError):
        # right surface, wrong precision
        resolve(parse_program("(FPCore (x y) :precision binary64 (/ x y))"), t)


def test_resolve_by_operator_name():
    t = load_target_source(FIG3ISH)
    r = resolve(parse_program("(FPCore (y) :precision binary32 (rcp.f32 y))"), t)
    assert r.body == FloatOp("rcp.f32", (Var("y"),))


def test_desugar():
    t = load_target_source(FIG3ISH)
    r = resolve(parse_program("(FPCore (y) :precision binary32 (rcp.f32 y))"), t)
    assert desugar(r.body, t) == RealOp("/", (Lit(Fraction(1), TypeTag.REAL), Var("y")))
    assert desugar(Var("x"), t) == Var("x")


def test_desugar_log1pmd():
    t = shipped_target("fdlibm-like")
    r = resolve(parse_program("(FPCore (x) :precision binary64 (log1pmd x))"), t)
    d = desugar(r.body, t)
    one = Lit(Fraction(1), TypeTag.REAL)
    assert d == RealOp(
        "-",
        (
            RealOp("log", (RealOp("+", (one, Var("x"))),)),
            RealOp("log", (RealOp("-", (one, Var("x"))),)),
        ),
    )


def test_desugar_idempotent_on_real():
    t = shipped_target("fdlibm-like")
    r = resolve(parse_program("(FPCore (x) :precision binary64 (log1pmd (* x 0.5)))"), t)
    d = desugar(r.body, t)
    assert desugar(d, t) == d


def test_operator_approx_types_real():
    for name in ("arith", "arith-fma", "avx-like", "c-libm-like", "fdlibm-like", "vdt-like"):
        t = shipped_target(name)
        for op in t.operators.values():
            env = {f: TypeTag.REAL for f in op.formals}
            assert typecheck(op.approx, env) is TypeTag.REAL


def test_typecheck_signature_mismatch():
    t = shipped_target("avx-like")
    bad = FloatOp("div.f64", (Var("x"), Var("x")))
    with pytest.raises(TypeCheckError):
        typecheck(bad, {"x": TypeTag.B32}, t)
    assert typecheck(FloatOp("rcp.f32", (Var("x"),)), {"x": TypeTag.B32}, t) is TypeTag.B32
    assert typecheck(Lit(Fraction(1), TypeTag.REAL), {}) is TypeTag.REAL


def test_format_round_trip_fixed_point():
    texts = [
        "(FPCore (x) :precision binary64 x)",
        "(FPCore (x y) :precision binary32 (/ x y))",
        "(FPCore (x) :precision binary64 (* 0.5 (log (/ (+ 1 x) (- 1 x)))))",
        "(FPCore (a b) :precision binary64 (if (< a b) (sqrt a) (- b)))",
    ]
    for text in texts:
        p1 = parse_program(text)
        out = format_fpcore(p1)
        p2 = parse_program(out)
        assert p1 == p2
        assert format_fpcore(p2) == out


def test_format_resolved_round_trips_through_resolve():
    t = shipped_target("fdlibm-like")
    p = parse_program("(FPCore (x) :precision binary64 (* (log1pmd x) 0.5))")
    r = resolve(p, t)
    out = format_fpcore(r, t)
    assert "log1pmd" in out
    r2 = resolve(parse_program(out), t)
    assert r2 == r


def test_format_marks_target_only_ops():
    t = shipped_target("avx-like")
    r = resolve(parse_program("(FPCore (y) :precision binary32 (rcp.f32 y))"), t)
    out = format_fpcore(r, t)
    assert out.splitlines()[0].startswith("; !")
    assert parse_program(out)  # comments are skipped


def test_float_literals_reproduce_exactly():
    p = parse_program("(FPCore (x) :precision binary32 (* x 0.1))")
    lit = p.body.args[1]
    text = format_fpcore(p)
    p2 = parse_program(text)
    assert p2.body.args[1] == lit


def test_paths():
    p = parse_program("(FPCore (x y) :precision binary64 (+ (* x y) (sqrt y)))")
    nodes = dict(iter_subexprs(p.body))
    assert nodes[()] == p.body
    assert nodes[(0,)] == RealOp("*", (Var("x"), Var("y")))
    assert nodes[(1, 0)] == Var("y")
    assert subexpr_at(p.body, (1,)) == RealOp("sqrt", (Var("y"),))
    swapped = replace_at(p.body, (0,), Var("y"))
    assert swapped == RealOp("+", (Var("y"), RealOp("sqrt", (Var("y"),))))
