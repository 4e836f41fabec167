import random
from fractions import Fraction

import pytest

from fplower.egraph import ConstantFold
from fplower.ir import Lit, TypeTag, Var, is_pattern_var, iter_subexprs, substitute
from fplower.oracle import NONREP, EMPTY_POINT, EvalContext, eval_real_to_bits
from fplower.rules import load_rules_text, math_rules, pattern_weight, simplifying_rules

COMPARE_BITS = 256


def _random_value(rng: random.Random) -> Fraction:
    kind = rng.random()
    if kind < 0.5:
        return Fraction(rng.randint(-2**16, 2**16), rng.randint(1, 2**12))
    if kind < 0.8:
        # dyadic values like real float data
        return Fraction(rng.randint(-2**20, 2**20), 2 ** rng.randint(0, 24))
    if kind < 0.9:
        return Fraction(rng.randint(-8, 8))
    return Fraction(rng.randint(-2**60, 2**60), rng.randint(1, 2**40))


def _pattern_vars(rule):
    return sorted(
        {n.name for _, n in iter_subexprs(rule.lhs) if is_pattern_var(n)}
    )


@pytest.mark.parametrize("rule", math_rules(), ids=lambda r: r.name)
def test_identity_holds_at_random_rationals(rule):
    # both sides agree when correctly rounded at 256 bits, over 200
    # substitutions that avoid singular/out-of-domain points
    rng = random.Random(hash(rule.name) & 0xFFFFFFFF)
    ctx = EvalContext()
    names = _pattern_vars(rule)
    valid = 0
    attempts = 0
    while valid < 200:
        attempts += 1
        assert attempts < 20000, f"{rule.name}: domain too thin for the identity test"
        subst = {n: Lit(_random_value(rng), TypeTag.REAL) for n in names}
        lhs = substitute(rule.lhs, subst)
        rhs = substitute(rule.rhs, subst)
        a = eval_real_to_bits(lhs, EMPTY_POINT, COMPARE_BITS, ctx)
        b = eval_real_to_bits(rhs, EMPTY_POINT, COMPARE_BITS, ctx)
        if a is NONREP or b is NONREP:
            continue
        assert a == b, f"{rule.name} differs at {subst}"
        valid += 1


def test_expected_rules_present():
    names = {r.name for r in math_rules()}
    assert "flip-sub" in names  # a-b to (a^2-b^2)/(a+b)
    assert "div-to-recip" in names  # a/b to a*(1/b)
    assert "add-commute" in names
    assert "fma-form" in names


def test_rule_count_moderate():
    n = len(math_rules())
    assert 55 <= n <= 85


def test_simplifying_subset_membership():
    simp = {r.name for r in simplifying_rules() if not isinstance(r, ConstantFold)}
    assert "mul-one" in simp
    assert "div-to-recip" in simp  # same weight both sides
    assert "flip-sub" not in simp  # duplicates variables
    assert "distribute" not in simp
    assert "factor" in simp


def test_simplifying_subset_is_subset_and_nongrowing():
    math_names = {r.name for r in math_rules()}
    for rule in simplifying_rules():
        if isinstance(rule, ConstantFold):
            continue
        assert rule.name in math_names
        assert pattern_weight(rule.rhs) <= pattern_weight(rule.lhs)


def test_simplifying_includes_constant_folding():
    assert any(isinstance(r, ConstantFold) for r in simplifying_rules())


def test_pattern_weight_counts_variable_occurrences():
    a, b = Var("?a"), Var("?b")
    from fplower.rules import add, div, mul, sub

    assert pattern_weight(div(a, b)) == 2
    assert pattern_weight(mul(a, div(Lit(Fraction(1), TypeTag.REAL), b))) == 2
    assert pattern_weight(div(sub(mul(a, a), mul(b, b)), add(a, b))) == 6


def test_load_rules_text_round_trip():
    rules = load_rules_text("(rule k (+ ?a 0) ?a)")
    assert rules[0].name == "k"
    assert is_pattern_var(rules[0].rhs)
    with pytest.raises(ValueError):
        load_rules_text("(rule broken (+ ?a 0))")
