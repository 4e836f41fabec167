"""Independent reference implementations used only to check the package:
a fixed-precision mpmath evaluator, a from-scratch float rounding routine,
brute-force e-graph enumeration, and a quadratic Pareto audit.

Nothing here may import the package's oracle/extraction internals beyond
plain data types; the point is an independent route to the same answers.
"""

from __future__ import annotations

from fractions import Fraction

import mpmath

from fplower.egraph import EGraph
from fplower.ir import Cmp, Expr, FloatOp, If, Lit, RealOp, TypeTag, Var

MP_PRECISION = 4096


class Undefined(Exception):
    pass


def mp_eval(e: Expr, point) -> mpmath.mpf:
    """Evaluate a real expression at fixed 4096-bit precision.

    Raises Undefined for out-of-domain points (or non-real results).
    """
    with mpmath.workprec(MP_PRECISION):
        return _mp_eval(e, point)


def _real(x):
    if isinstance(x, mpmath.mpc):
        if x.imag != 0:
            raise Undefined("complex result")
        x = x.real
    if mpmath.isnan(x):
        raise Undefined("nan result")
    return x


def _mp_eval(e, point):
    if isinstance(e, Var):
        return mpmath.mpf(point[e.name])
    if isinstance(e, Lit):
        return mpmath.mpf(e.value.numerator) / e.value.denominator
    if isinstance(e, If):
        return _mp_eval(e.then, point) if _mp_cond(e.cond, point) else _mp_eval(e.orelse, point)
    if isinstance(e, Cmp):
        raise TypeError("bare comparison")
    if isinstance(e, FloatOp):
        raise TypeError("float op in real reference evaluation")
    sym = e.symbol
    if sym == "pi":
        return +mpmath.pi
    args = [_mp_eval(a, point) for a in e.args]
    if sym == "+":
        return args[0] + args[1]
    if sym == "-":
        return args[0] - args[1]
    if sym == "*":
        return args[0] * args[1]
    if sym == "/":
        if args[1] == 0:
            raise Undefined("division by zero")
        return args[0] / args[1]
    if sym == "neg":
        return -args[0]
    if sym == "fabs":
        return abs(args[0])
    if sym == "sqrt":
        if args[0] < 0:
            raise Undefined("sqrt of negative")
        return mpmath.sqrt(args[0])
    if sym == "exp":
        return _real(mpmath.exp(args[0]))
    if sym == "expm1":
        return _real(mpmath.expm1(args[0]))
    if sym == "log":
        if args[0] <= 0:
            raise Undefined("log of nonpositive")
        return _real(mpmath.log(args[0]))
    if sym == "log1p":
        if args[0] <= -1:
            raise Undefined("log1p at or below -1")
        return _real(mpmath.log(1 + args[0]))
    if sym == "pow":
        x, y = args
        if x == 0:
            if y > 0:
                return mpmath.mpf(0)
            raise Undefined("zero base, nonpositive power")
        if x < 0:
            if y != mpmath.floor(y):
                raise Undefined("negative base, fractional power")
            return _real(mpmath.power(x, int(y)))
        return _real(mpmath.power(x, y))
    if sym == "sin":
        return _real(mpmath.sin(args[0]))
    if sym == "cos":
        return _real(mpmath.cos(args[0]))
    if sym == "tan":
        return _real(mpmath.tan(args[0]))
    if sym == "fma":
        return args[0] * args[1] + args[2]
    if sym == "hypot":
        return mpmath.sqrt(args[0] * args[0] + args[1] * args[1])
    raise TypeError(f"unknown symbol {sym}")


def _mp_cond(c, point) -> bool:
    a = _mp_eval(c.lhs, point)
    b = _mp_eval(c.rhs, point)
    return {
        "<": a < b, "<=": a <= b, ">": a > b,
        ">=": a >= b, "==": a == b, "!=": a != b,
    }[c.relation]


def mpf_to_fraction(x) -> Fraction:
    sign, man, exp, _ = x._mpf_
    if man == 0 and exp != 0:
        raise Undefined("non-finite")
    v = Fraction(man) * Fraction(2) ** exp
    return -v if sign else v


def round_fraction(v: Fraction, precision: int, emin: int, emax: int):
    """From-scratch nearest-even rounding of an exact rational.

    Written independently of the package: walks the exponent by repeated
    comparison only. Returns a Fraction on the representable grid, None
    for overflow.
    """
    if v == 0:
        return Fraction(0)
    sign = 1 if v > 0 else -1
    mag = abs(v)
    # find e with 2^e <= mag < 2^(e+1) by doubling/halving
    e = 0
    two = Fraction(2)
    while mag >= two ** (e + 1):
        e += 1
    while mag < two**e:
        e -= 1
    grid = max(e - precision + 1, emin - precision + 1)
    steps = mag / two**grid  # exact rational number of grid steps
    n, d = steps.numerator, steps.denominator
    q, r = divmod(n, d)
    if 2 * r > d or (2 * r == d and q % 2):
        q += 1
    result = sign * q * two**grid
    if abs(result) >= two ** (emax + 1):
        return None
    return result


def mp_eval_and_round(e: Expr, point, ty: TypeTag):
    """The reference oracle: fixed 4096-bit evaluation, then one rounding.

    Returns a float, or None when undefined/overflowing (mirroring the
    package's NonRepresentable)."""
    fmt = ty.fmt
    try:
        value = mp_eval(e, point)
    except Undefined:
        return None
    if not mpmath.isfinite(value):
        return None
    if value == 0:
        return 0.0
    # Magnitude guards keep the exact-Fraction step tractable: far outside
    # the format's range the rounding is a foregone conclusion.
    magnitude = mpmath.mag(value)  # ceil(log2|x|), cheap
    if magnitude > fmt.emax + 2:
        return None  # rounds past the largest finite value
    if magnitude < fmt.emin - fmt.precision - 2:
        return 0.0  # rounds to zero
    exact = mpf_to_fraction(value)
    rounded = round_fraction(exact, fmt.precision, fmt.emin, fmt.emax)
    if rounded is None:
        return None
    return float(rounded)  # CPython rounds Fraction->float correctly; on-grid here


# ---------------------------------------------------------------------------
# Brute-force e-graph helpers

def represented_terms(g: EGraph, cid: int, depth: int) -> set:
    """All terms of bounded height represented by a class, as nested
    (head, children...) tuples."""
    g.rebuild()

    def terms(c: int, d: int) -> set:
        out = set()
        if d <= 0:
            return out
        for node in g.class_nodes(c):
            if not node.children:
                out.add((node.head,))
                continue
            child_sets = [terms(ch, d - 1) for ch in node.children]
            if any(not s for s in child_sets):
                continue
            combos = [()]
            for s in child_sets:
                combos = [c0 + (t,) for c0 in combos for t in sorted(s)]
            for combo in combos:
                out.add((node.head,) + combo)
        return out

    return terms(g.find(cid), depth)


def brute_match(pattern: Expr, term: tuple, subst: dict) -> list[dict]:
    """Structurally match a pattern against an enumerated term."""
    from fplower.egraph import head_of
    from fplower.ir import is_pattern_var

    if is_pattern_var(pattern):
        bound = subst.get(pattern.name)
        if bound is None:
            s = dict(subst)
            s[pattern.name] = term
            return [s]
        return [subst] if bound == term else []
    args = pattern.args if isinstance(pattern, (RealOp, FloatOp)) else ()
    if term[0] != head_of(pattern) or len(term) - 1 != len(args):
        return []
    results = [subst]
    for p, t in zip(args, term[1:]):
        results = [s2 for s in results for s2 in brute_match(p, t, s)]
    return results


def oracle_best_costs(g: EGraph, target, env, rounds: int) -> dict:
    """Height-bounded dynamic program for minimal typed tree costs.

    cost_k(class, type) = cheapest well-typed all-float derivation of
    height <= k; iterating enough rounds reaches the true minimum.
    """
    from fplower.fpnum import is_representable
    from fplower.ir import FLOAT_TYPES

    g.rebuild()
    best: dict = {}
    for _ in range(rounds):
        new = dict(best)
        for cid in g.class_ids():
            for node in g.class_nodes(cid):
                kind, payload = node.head
                if kind == "var":
                    ty = env.get(payload)
                    if ty is not None:
                        _improve(new, (cid, ty), target.var_cost)
                elif kind == "lit":
                    for ty in FLOAT_TYPES:
                        if is_representable(payload, ty.fmt):
                            _improve(new, (cid, ty), target.literal_cost_of(ty))
                elif kind == "op":
                    op = target.operators.get(payload)
                    if op is None:
                        continue
                    total = op.cost
                    for ch, aty in zip(node.children, op.arg_types):
                        sub = best.get((g.find(ch), aty))
                        if sub is None:
                            total = None
                            break
                        total += sub
                    if total is not None:
                        _improve(new, (cid, op.ret_type), total)
        best = new
    return best


def _improve(table, key, cost):
    if key not in table or cost < table[key]:
        table[key] = cost


def brute_pareto(pairs: list[tuple[float, float]]) -> set[tuple[float, float]]:
    """O(n^2) non-dominated audit over (cost, error) pairs."""
    out = set()
    for c in pairs:
        dominated = any(
            o[0] <= c[0] and o[1] <= c[1] and (o[0] < c[0] or o[1] < c[1])
            for o in pairs
        )
        if not dominated:
            out.add(c)
    return out
