"""Curated real-number identities for rewriting, and the non-growing
subset used by the fast simplification pass.

Every identity here is machine-checked (see the test suite) by comparing
both sides at many random rational points under the high-precision
evaluator. Rules are one-directional; both directions are listed when
useful. Side conditions (like nonzero denominators) are not enforced:
rewriting is followed by accuracy measurement, which penalizes bad
regions statistically.
"""

from __future__ import annotations

from fractions import Fraction

from . import sexp
from .egraph import ConstantFold
from .ir import Expr, Lit, RealOp, TypeTag, Var, is_pattern_var, parse_real_expr
from .target import RewriteRule

_A, _B, _C, _D = Var("?a"), Var("?b"), Var("?c"), Var("?d")


def _n(value, den=1) -> Lit:
    return Lit(Fraction(value, den), TypeTag.REAL)


def _op(sym):
    def build(*args):
        return RealOp(sym, tuple(args))

    return build


add, sub, mul, div = _op("+"), _op("-"), _op("*"), _op("/")
neg, sqrt, fabs = _op("neg"), _op("sqrt"), _op("fabs")
exp, expm1, log, log1p = _op("exp"), _op("expm1"), _op("log"), _op("log1p")
pow_, sin, cos, tan = _op("pow"), _op("sin"), _op("cos"), _op("tan")
fma, hypot = _op("fma"), _op("hypot")
PI = RealOp("pi", ())

_RULES: list[tuple[str, Expr, Expr]] = [
    # commutativity / associativity
    ("add-commute", add(_A, _B), add(_B, _A)),
    ("mul-commute", mul(_A, _B), mul(_B, _A)),
    ("add-assoc-left", add(add(_A, _B), _C), add(_A, add(_B, _C))),
    ("add-assoc-right", add(_A, add(_B, _C)), add(add(_A, _B), _C)),
    ("mul-assoc-left", mul(mul(_A, _B), _C), mul(_A, mul(_B, _C))),
    ("mul-assoc-right", mul(_A, mul(_B, _C)), mul(mul(_A, _B), _C)),
    ("sub-assoc", sub(add(_A, _B), _C), add(_A, sub(_B, _C))),
    ("sub-assoc-rev", add(_A, sub(_B, _C)), sub(add(_A, _B), _C)),
    # distribution
    ("distribute", mul(_A, add(_B, _C)), add(mul(_A, _B), mul(_A, _C))),
    ("factor", add(mul(_A, _B), mul(_A, _C)), mul(_A, add(_B, _C))),
    ("distribute-sub", mul(_A, sub(_B, _C)), sub(mul(_A, _B), mul(_A, _C))),
    ("factor-sub", sub(mul(_A, _B), mul(_A, _C)), mul(_A, sub(_B, _C))),
    # identities and annihilators
    ("add-zero", add(_A, _n(0)), _A),
    ("zero-add", add(_n(0), _A), _A),
    ("sub-zero", sub(_A, _n(0)), _A),
    ("zero-sub", sub(_n(0), _A), neg(_A)),
    ("mul-one", mul(_A, _n(1)), _A),
    ("one-mul", mul(_n(1), _A), _A),
    ("mul-zero", mul(_A, _n(0)), _n(0)),
    ("div-one", div(_A, _n(1)), _A),
    ("sub-self", sub(_A, _A), _n(0)),
    ("div-self", div(_A, _A), _n(1)),
    # negation
    ("neg-to-mul", neg(_A), mul(_n(-1), _A)),
    ("mul-to-neg", mul(_n(-1), _A), neg(_A)),
    ("neg-neg", neg(neg(_A)), _A),
    ("sub-to-add", sub(_A, _B), add(_A, neg(_B))),
    ("add-to-sub", add(_A, neg(_B)), sub(_A, _B)),
    ("neg-sub", neg(sub(_A, _B)), sub(_B, _A)),
    ("neg-mul", neg(mul(_A, _B)), mul(neg(_A), _B)),
    ("mul-neg", mul(neg(_A), _B), neg(mul(_A, _B))),
    # fractions
    ("div-to-recip", div(_A, _B), mul(_A, div(_n(1), _B))),
    ("recip-to-div", mul(_A, div(_n(1), _B)), div(_A, _B)),
    ("div-div", div(div(_A, _B), _C), div(_A, mul(_B, _C))),
    ("div-div-rev", div(_A, mul(_B, _C)), div(div(_A, _B), _C)),
    ("mul-frac", mul(div(_A, _B), div(_C, _D)), div(mul(_A, _C), mul(_B, _D))),
    ("recip-recip", div(_n(1), div(_n(1), _A)), _A),
    ("mul-div-assoc", div(mul(_A, _B), _C), mul(_A, div(_B, _C))),
    ("mul-div-assoc-rev", mul(_A, div(_B, _C)), div(mul(_A, _B), _C)),
    # squares
    ("flip-sub", sub(_A, _B), div(sub(mul(_A, _A), mul(_B, _B)), add(_A, _B))),
    ("difference-of-squares", sub(mul(_A, _A), mul(_B, _B)), mul(add(_A, _B), sub(_A, _B))),
    ("squares-of-difference", mul(add(_A, _B), sub(_A, _B)), sub(mul(_A, _A), mul(_B, _B))),
    # square roots and powers
    ("sqrt-times-self", mul(sqrt(_A), sqrt(_A)), _A),
    ("sqrt-of-square", sqrt(mul(_A, _A)), fabs(_A)),
    ("sqrt-prod", sqrt(mul(_A, _B)), mul(sqrt(_A), sqrt(_B))),
    ("sqrt-prod-rev", mul(sqrt(_A), sqrt(_B)), sqrt(mul(_A, _B))),
    ("sqrt-div", sqrt(div(_A, _B)), div(sqrt(_A), sqrt(_B))),
    ("pow-to-square", pow_(_A, _n(2)), mul(_A, _A)),
    ("square-to-pow", mul(_A, _A), pow_(_A, _n(2))),
    ("pow-half", pow_(_A, _n(1, 2)), sqrt(_A)),
    ("pow-recip", pow_(_A, _n(-1)), div(_n(1), _A)),
    ("log-pow", log(pow_(_A, _B)), mul(_B, log(_A))),
    # exponentials and logarithms
    ("log-prod", log(mul(_A, _B)), add(log(_A), log(_B))),
    ("log-prod-rev", add(log(_A), log(_B)), log(mul(_A, _B))),
    ("log-div", log(div(_A, _B)), sub(log(_A), log(_B))),
    ("log-div-rev", sub(log(_A), log(_B)), log(div(_A, _B))),
    ("exp-sum", exp(add(_A, _B)), mul(exp(_A), exp(_B))),
    ("exp-sum-rev", mul(exp(_A), exp(_B)), exp(add(_A, _B))),
    ("log-exp", log(exp(_A)), _A),
    ("exp-log", exp(log(_A)), _A),
    ("log1p-form", log(add(_n(1), _A)), log1p(_A)),
    ("log1p-unform", log1p(_A), log(add(_n(1), _A))),
    ("expm1-form", sub(exp(_A), _n(1)), expm1(_A)),
    ("expm1-unform", expm1(_A), sub(exp(_A), _n(1))),
    # fused multiply-add
    ("fma-form", add(mul(_A, _B), _C), fma(_A, _B, _C)),
    ("fma-unform", fma(_A, _B, _C), add(mul(_A, _B), _C)),
    ("fma-sub-form", sub(mul(_A, _B), _C), fma(_A, _B, neg(_C))),
    # hypotenuse
    ("hypot-form", sqrt(add(mul(_A, _A), mul(_B, _B))), hypot(_A, _B)),
    ("hypot-unform", hypot(_A, _B), sqrt(add(mul(_A, _A), mul(_B, _B)))),
    # trigonometry
    ("sin-sq-cos-sq", add(mul(sin(_A), sin(_A)), mul(cos(_A), cos(_A))), _n(1)),
    ("tan-to-quotient", tan(_A), div(sin(_A), cos(_A))),
    ("quotient-to-tan", div(sin(_A), cos(_A)), tan(_A)),
    ("sin-neg", sin(neg(_A)), neg(sin(_A))),
    ("cos-neg", cos(neg(_A)), cos(_A)),
    ("angle-scale", sin(div(mul(PI, _A), _n(180))), sin(mul(PI, div(_A, _n(180))))),
]


def math_rules() -> list[RewriteRule]:
    """The full identity library."""
    return [RewriteRule(name, lhs, rhs, kind="identity") for name, lhs, rhs in _RULES]


def pattern_weight(p: Expr) -> int:
    """Rewrite-growth metric: the number of pattern-variable occurrences.

    Duplicating a subterm is what makes saturation blow up, so a rule
    counts as growing exactly when its right side mentions variables more
    often than its left side.
    """
    if is_pattern_var(p):
        return 1
    if isinstance(p, RealOp):
        return sum(pattern_weight(a) for a in p.args)
    return 0


def simplifying_rules() -> list[RewriteRule]:
    """The non-growing directions of the library, plus constant folding."""
    out: list = []
    for rule in math_rules():
        if pattern_weight(rule.rhs) <= pattern_weight(rule.lhs):
            out.append(rule)
    for rule in out:
        assert pattern_weight(rule.rhs) <= pattern_weight(rule.lhs), rule.name
    out.append(ConstantFold())
    return out


# ---------------------------------------------------------------------------
# Rule files: (rule NAME LHS RHS), patterns in the same syntax as operator
# definitions with ?var metavariables.

def load_rules_text(text: str) -> list[RewriteRule]:
    try:
        forms = sexp.parse_all(text)
    except sexp.SexpError as e:
        raise ValueError(str(e)) from None
    rules = []
    for form in forms:
        if (
            not isinstance(form, list)
            or len(form) != 4
            or not isinstance(form[0], sexp.Sym)
            or form[0].text != "rule"
        ):
            raise ValueError("expected (rule NAME LHS RHS)")
        name = form[1].text
        lhs = parse_real_expr(form[2], pattern=True)
        rhs = parse_real_expr(form[3], pattern=True)
        rules.append(RewriteRule(name, lhs, rhs, kind="identity"))
    return rules


def load_rules(path) -> list[RewriteRule]:
    with open(path) as f:
        return load_rules_text(f.read())
