"""Correctly-rounded real evaluation, float program emulation, input
sampling, and error metrics.

Real values are evaluated with outward-rounded MPFR interval arithmetic at
precisions 80, 160, 320, ... up to 10240 bits, stopping as soon as both
interval endpoints round to the same output float. Values whose true
result is out of domain, an exact pole, or still ambiguous at the top of
the ladder are NonRepresentable. True values that would round to infinity
are treated as NonRepresentable as well, so sampling only ever accepts
points with finite oracle values; float evaluation maps NonRepresentable
to NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import gmpy2 as g
import numpy as np

from .fpnum import from_ordinal, max_ordinal, ordinal
from .ir import (
    Cmp,
    Expr,
    FloatOp,
    If,
    Lit,
    RealOp,
    TypeTag,
    Var,
    desugar,
    iter_subexprs,
    substitute,
)

PRECISION_LADDER = (80, 160, 320, 640, 1280, 2560, 5120, 10240)

RNG_ALGORITHM = "philox4x64"  # counter-based; pinned for reproducibility


class _NonRepresentable:
    __slots__ = ()

    def __repr__(self):
        return "NonRepresentable"


NONREP = _NonRepresentable()


class SamplingExhausted(RuntimeError):
    pass


class _Indeterminate(Exception):
    """The interval is too wide to decide at this precision."""


class _Undefined(Exception):
    """The true value is certainly out of domain."""


@dataclass(frozen=True)
class SamplePoint:
    items: tuple[tuple[str, float], ...]

    @classmethod
    def of(cls, **values) -> "SamplePoint":
        return cls(tuple(sorted(values.items())))

    def __getitem__(self, name: str) -> float:
        for k, v in self.items:
            if k == name:
                return v
        raise KeyError(name)

    @property
    def key(self):
        return self.items


EMPTY_POINT = SamplePoint(())


@dataclass(frozen=True)
class ErrorReport:
    bits: tuple[float, ...]
    mean_bits: float
    accuracy: float  # output precision minus mean bits


# ---------------------------------------------------------------------------
# Interval engines

_EXTREME = dict(emin=g.get_emin_min(), emax=g.get_emax_max(), subnormalize=False)

_FMT_CTX = {
    TypeTag.B64: g.context(precision=53, emin=-1073, emax=1024, subnormalize=True,
                           round=g.RoundToNearest),
    TypeTag.B32: g.context(precision=24, emin=-148, emax=128, subnormalize=True,
                           round=g.RoundToNearest),
}


class _Engine:
    """Outward-rounded interval arithmetic at a fixed working precision."""

    def __init__(self, q: int):
        self.q = q
        self.dn = g.context(precision=q, round=g.RoundDown, **_EXTREME)
        self.up = g.context(precision=q, round=g.RoundUp, **_EXTREME)
        self.pi = (self.dn.const_pi(), self.up.const_pi())
        self.two_pi = (self.dn.mul(self.pi[0], 2), self.up.mul(self.pi[1], 2))
        self.half_pi = (self.dn.div(self.pi[0], 2), self.up.div(self.pi[1], 2))

    # intervals are (lo, hi) mpfr pairs containing the true value

    def _chk(self, lo, hi):
        if g.is_nan(lo) or g.is_nan(hi):
            raise _Indeterminate
        return (lo, hi)

    def lit(self, value: Fraction):
        # The mpfr(0) operand forces a rounded mpfr result; context
        # arithmetic on bare mpq values would stay exact-rational.
        gq = g.mpq(value.numerator, value.denominator)
        zero = g.mpfr(0)
        return (self.dn.add(gq, zero), self.up.add(gq, zero))

    def const(self, x):
        v = g.mpfr(x, 53)
        return (v, v)

    def add(self, a, b):
        return self._chk(self.dn.add(a[0], b[0]), self.up.add(a[1], b[1]))

    def sub(self, a, b):
        return self._chk(self.dn.sub(a[0], b[1]), self.up.sub(a[1], b[0]))

    def neg(self, a):
        # context negation: bare -mpfr would round at the thread default
        return (self.dn.minus(a[1]), self.dn.minus(a[0]))

    def mul(self, a, b):
        lo = min(self.dn.mul(x, y) for x in a for y in b)
        hi = max(self.up.mul(x, y) for x in a for y in b)
        return self._chk(lo, hi)

    def div(self, a, b):
        if b[0] <= 0 <= b[1]:
            if b[0] == 0 == b[1]:
                raise _Undefined("division by zero")
            raise _Indeterminate
        lo = min(self.dn.div(x, y) for x in a for y in b)
        hi = max(self.up.div(x, y) for x in a for y in b)
        return self._chk(lo, hi)

    def fma(self, a, b, c):
        lo = min(self.dn.fma(x, y, c[0]) for x in a for y in b)
        hi = max(self.up.fma(x, y, c[1]) for x in a for y in b)
        return self._chk(lo, hi)

    def fabs(self, a):
        if a[0] >= 0:
            return a
        if a[1] <= 0:
            return (self.dn.minus(a[1]), self.dn.minus(a[0]))
        return (g.mpfr(0), max(self.dn.minus(a[0]), a[1]))

    def sqrt(self, a):
        if a[1] < 0:
            raise _Undefined("sqrt of a negative")
        if a[0] < 0:
            raise _Indeterminate
        return self._chk(self.dn.sqrt(a[0]), self.up.sqrt(a[1]))

    def exp(self, a):
        return self._chk(self.dn.exp(a[0]), self.up.exp(a[1]))

    def expm1(self, a):
        return self._chk(self.dn.expm1(a[0]), self.up.expm1(a[1]))

    def log(self, a):
        if a[1] <= 0:
            raise _Undefined("log of a nonpositive")
        if a[0] <= 0:
            raise _Indeterminate
        return self._chk(self.dn.log(a[0]), self.up.log(a[1]))

    def log1p(self, a):
        if a[1] <= -1:
            raise _Undefined("log1p at or below -1")
        if a[0] <= -1:
            raise _Indeterminate
        return self._chk(self.dn.log1p(a[0]), self.up.log1p(a[1]))

    def hypot(self, a, b):
        amag, bmag = self.fabs(a), self.fabs(b)
        return self._chk(self.dn.hypot(amag[0], bmag[0]), self.up.hypot(amag[1], bmag[1]))

    def pow(self, a, b):
        if a[0] > 0:
            return self.exp(self.mul(b, self.log(a)))
        if a[1] < 0:
            # Negative base needs a certainly-integer exponent.
            if b[0] == b[1] and g.is_integer(b[0]):
                mag = self.exp(self.mul(b, self.log(self.neg(a))))
                if int(b[0]) % 2 == 0:
                    return mag
                return self.neg(mag)
            if b[0] == b[1]:
                raise _Undefined("negative base to a non-integer power")
            raise _Indeterminate
        if a[0] == 0 == a[1]:
            if b[0] > 0:
                return (g.mpfr(0), g.mpfr(0))
            if b[1] < 0:
                raise _Undefined("zero to a negative power")
            if b[0] == 0 == b[1]:
                raise _Undefined("zero to the zero power")
        raise _Indeterminate

    def _contains_grid_point(self, a, offset, period) -> bool:
        """Conservatively: does [a] contain offset + k*period for integer k?"""
        t0, t1 = self.div(self.sub(a, offset), period)
        if g.is_nan(t0) or g.is_nan(t1) or g.is_infinite(t0) or g.is_infinite(t1):
            return True
        # floor/ceil at the working precision are exact for these values
        return self.dn.ceil(t0) <= self.up.floor(t1)

    def sin(self, a):
        if g.is_infinite(a[0]) or g.is_infinite(a[1]):
            raise _Indeterminate
        neg_half_pi = self.neg(self.half_pi)
        lo = (
            g.mpfr(-1)
            if self._contains_grid_point(a, neg_half_pi, self.two_pi)
            else min(self.dn.sin(a[0]), self.dn.sin(a[1]))
        )
        hi = (
            g.mpfr(1)
            if self._contains_grid_point(a, self.half_pi, self.two_pi)
            else max(self.up.sin(a[0]), self.up.sin(a[1]))
        )
        return self._chk(lo, hi)

    def cos(self, a):
        if g.is_infinite(a[0]) or g.is_infinite(a[1]):
            raise _Indeterminate
        zero = (g.mpfr(0), g.mpfr(0))
        lo = (
            g.mpfr(-1)
            if self._contains_grid_point(a, self.pi, self.two_pi)
            else min(self.dn.cos(a[0]), self.dn.cos(a[1]))
        )
        hi = (
            g.mpfr(1)
            if self._contains_grid_point(a, zero, self.two_pi)
            else max(self.up.cos(a[0]), self.up.cos(a[1]))
        )
        return self._chk(lo, hi)

    def tan(self, a):
        if g.is_infinite(a[0]) or g.is_infinite(a[1]):
            raise _Indeterminate
        if self._contains_grid_point(a, self.half_pi, self.pi):
            raise _Indeterminate  # may straddle a pole
        return self._chk(self.dn.tan(a[0]), self.up.tan(a[1]))

    def compare(self, relation: str, a, b) -> bool:
        if a[1] < b[0]:
            order = -1
        elif b[1] < a[0]:
            order = 1
        elif a[0] == a[1] == b[0] == b[1]:
            order = 0
        else:
            raise _Indeterminate
        return {
            "<": order < 0, "<=": order <= 0, ">": order > 0,
            ">=": order >= 0, "==": order == 0, "!=": order != 0,
        }[relation]


_ENGINES: dict[int, _Engine] = {}


def _engine(q: int) -> _Engine:
    if q not in _ENGINES:
        _ENGINES[q] = _Engine(q)
    return _ENGINES[q]


_UNARY = {"neg": "neg", "sqrt": "sqrt", "fabs": "fabs", "exp": "exp", "expm1": "expm1",
          "log": "log", "log1p": "log1p", "sin": "sin", "cos": "cos", "tan": "tan"}
_BINARY = {"+": "add", "-": "sub", "*": "mul", "/": "div", "pow": "pow", "hypot": "hypot"}


def _eval_interval(e: Expr, point: SamplePoint, eng: _Engine, cache: dict | None):
    if cache is not None:
        key = (e, point.key, eng.q)
        hit = cache.get(key)
        if hit is not None:
            if hit[0] == "ok":
                return hit[1]
            raise _Indeterminate() if hit[0] == "ind" else _Undefined(hit[1])
        try:
            result = _eval_interval_raw(e, point, eng, cache)
        except _Indeterminate:
            cache[key] = ("ind",)
            raise
        except _Undefined as exc:
            cache[key] = ("undef", str(exc))
            raise
        cache[key] = ("ok", result)
        return result
    return _eval_interval_raw(e, point, eng, cache)


def _eval_interval_raw(e: Expr, point: SamplePoint, eng: _Engine, cache: dict | None):
    if isinstance(e, Var):
        return eng.const(point[e.name])
    if isinstance(e, Lit):
        return eng.lit(e.value)
    if isinstance(e, RealOp):
        if e.symbol == "pi":
            return eng.pi
        args = [_eval_interval(a, point, eng, cache) for a in e.args]
        if e.symbol in _UNARY:
            return getattr(eng, _UNARY[e.symbol])(*args)
        if e.symbol in _BINARY:
            return getattr(eng, _BINARY[e.symbol])(*args)
        if e.symbol == "fma":
            return eng.fma(*args)
        raise _Undefined(f"no real semantics for '{e.symbol}'")
    if isinstance(e, If):
        cond = _eval_cond(e.cond, point, eng, cache)
        branch = e.then if cond else e.orelse
        return _eval_interval(branch, point, eng, cache)
    if isinstance(e, FloatOp):
        raise TypeError(f"float operator {e.op} in real evaluation")
    raise TypeError(f"cannot evaluate {e!r}")


def _eval_cond(c: Expr, point: SamplePoint, eng: _Engine, cache: dict | None) -> bool:
    if not isinstance(c, Cmp):
        raise TypeError(f"condition must be a comparison, got {c!r}")
    a = _eval_interval(c.lhs, point, eng, cache)
    b = _eval_interval(c.rhs, point, eng, cache)
    return eng.compare(c.relation, a, b)


class EvalContext:
    """Shared memo tables; one per search run keeps evaluation incremental."""

    def __init__(self):
        self.intervals: dict = {}   # (expr, point key, precision) -> outcome
        self.reals: dict = {}       # (expr, point key, type) -> float | NONREP
        self.ops: dict = {}         # (operator, arg floats) -> float

    def apply_op(self, op, args: tuple[float, ...]) -> float:
        """One operator application on exact float inputs (NaN-free)."""
        key = (op, args)
        hit = self.ops.get(key)
        if hit is not None:
            return hit
        mapping = {f: Lit(Fraction(a), TypeTag.REAL) for f, a in zip(op.formals, args)}
        expr = substitute(op.approx, mapping)
        if op.rounded_at is None:
            value = eval_real(expr, EMPTY_POINT, op.ret_type, self)
            result = float("nan") if value is NONREP else value
        else:
            stage1 = eval_real_to_bits(expr, EMPTY_POINT, op.rounded_at, self)
            if stage1 is NONREP:
                result = float("nan")
            else:
                rounded = _FMT_CTX[op.ret_type].add(stage1, 0)
                result = float("nan") if g.is_infinite(rounded) else _normzero(float(rounded))
        self.ops[key] = result
        return result


def _normzero(x: float) -> float:
    return x + 0.0 if x == 0 else x


def eval_real(e: Expr, point: SamplePoint, out: TypeTag, ctx: EvalContext | None = None):
    """Correctly rounded value of a real expression at a point, or NONREP.

    Refines through the precision ladder until both interval endpoints
    round to the same `out`-type float.
    """
    ctx = ctx if ctx is not None else EvalContext()
    key = (e, point.key, out)
    hit = ctx.reals.get(key)
    if hit is not None:
        return hit
    fmt_ctx = _FMT_CTX[out]
    result = NONREP
    for q in PRECISION_LADDER:
        try:
            lo, hi = _eval_interval(e, point, _engine(q), ctx.intervals)
        except _Undefined:
            break
        except _Indeterminate:
            continue
        rlo = fmt_ctx.add(lo, 0)
        rhi = fmt_ctx.add(hi, 0)
        if rlo == rhi:
            if g.is_infinite(rlo):
                break  # true value rounds past the largest finite float
            result = _normzero(float(rlo))
            break
    ctx.reals[key] = result
    return result


def eval_real_to_bits(e: Expr, point: SamplePoint, bits: int, ctx: EvalContext | None = None):
    """Round the true value to a `bits`-bit significand (unbounded exponent).

    Returns an exact mpfr, or NONREP. This is both the first stage of
    reduced-precision operator emulation and the comparison precision used
    when checking rewrite-rule identities.
    """
    ctx = ctx if ctx is not None else EvalContext()
    tctx = g.context(precision=bits, round=g.RoundToNearest, **_EXTREME)
    for q in PRECISION_LADDER:
        try:
            lo, hi = _eval_interval(e, point, _engine(q), ctx.intervals)
        except _Undefined:
            return NONREP
        except _Indeterminate:
            continue
        rlo = tctx.add(lo, 0)
        rhi = tctx.add(hi, 0)
        if rlo == rhi:
            if g.is_infinite(rlo):
                return NONREP
            return rlo
    return NONREP


def eval_float(e: Expr, point: SamplePoint, target, ctx: EvalContext | None = None) -> float:
    """Evaluate a resolved program body on float inputs; NaN marks errors.

    Correctly-rounded operators produce the nearest float of their real
    definition applied to the exact argument values; reduced operators
    round that value to q bits first, then to the output type.
    """
    ctx = ctx if ctx is not None else EvalContext()

    def go(node: Expr) -> float:
        if isinstance(node, Var):
            return point[node.name]
        if isinstance(node, Lit):
            return float(node.value)
        if isinstance(node, If):
            return go(node.then) if cond(node.cond) else go(node.orelse)
        if isinstance(node, FloatOp):
            args = tuple(go(a) for a in node.args)
            if any(math.isnan(a) for a in args):
                return float("nan")
            return ctx.apply_op(target.operators[node.op], args)
        raise TypeError(f"cannot evaluate unresolved node {node!r}")

    def cond(c: Expr) -> bool:
        assert isinstance(c, Cmp)
        x, y = go(c.lhs), go(c.rhs)
        return {
            "<": x < y, "<=": x <= y, ">": x > y,
            ">=": x >= y, "==": x == y, "!=": x != y,
        }[c.relation]

    return go(e)


# ---------------------------------------------------------------------------
# Sampling

# Give up when fewer than one draw per thousand is accepted at this many draws.
EXHAUSTION_DRAWS = 10**6
EXHAUSTION_RATE = 0.001


def sample(
    program, target, n: int, seed: int, ctx: EvalContext | None = None
) -> list[SamplePoint]:
    """Draw n inputs uniformly over float ordinals, keeping only points
    where the program's real value is representable. Deterministic for a
    fixed seed (Philox counter-based generator)."""
    if n < 1:
        raise ValueError("need at least one sample point")
    ctx = ctx if ctx is not None else EvalContext()
    body = desugar(program.body, target)
    rng = np.random.Generator(np.random.Philox(seed))
    bounds = [(name, ty.fmt, max_ordinal(ty.fmt)) for name, ty in program.params]

    points: list[SamplePoint] = []
    draws = 0
    while len(points) < n:
        draws += 1
        if draws >= EXHAUSTION_DRAWS and len(points) < draws * EXHAUSTION_RATE:
            raise SamplingExhausted(
                f"acceptance rate {len(points)}/{draws} below {EXHAUSTION_RATE:.1%}; "
                "domain too thin"
            )
        values = tuple(
            (name, from_ordinal(int(rng.integers(-mo, mo + 1)), fmt))
            for name, fmt, mo in bounds
        )
        pt = SamplePoint(values)
        if eval_real(body, pt, program.out_type, ctx) is not NONREP:
            points.append(pt)
    return points


def train_test_split(points: list[SamplePoint]) -> tuple[list[SamplePoint], list[SamplePoint]]:
    cut = (len(points) + 1) // 2
    return points[:cut], points[cut:]


# ---------------------------------------------------------------------------
# Error metrics

def bits_of_error(got: float, want: float, ty: TypeTag) -> float:
    """log2(1 + ulp distance), clamped to [0, p]; NaN against a number
    costs the full p bits. Infinities count as NaN."""
    p = ty.precision
    got_bad = math.isnan(got) or math.isinf(got)
    want_bad = math.isnan(want) or math.isinf(want)
    if got_bad and want_bad:
        return 0.0
    if got_bad or want_bad:
        return float(p)
    dist = abs(ordinal(got, ty.fmt) - ordinal(want, ty.fmt))
    return min(float(p), math.log2(1 + dist))


def accuracy(program, points, target, ctx: EvalContext | None = None) -> ErrorReport:
    """Mean bits of error of the resolved program against its own real
    meaning, over the given points."""
    if not points:
        raise ValueError("accuracy needs at least one point")
    ctx = ctx if ctx is not None else EvalContext()
    real_body = desugar(program.body, target)
    out = program.out_type
    bits = []
    for pt in points:
        want = eval_real(real_body, pt, out, ctx)
        want_f = float("nan") if want is NONREP else want
        got = eval_float(program.body, pt, target, ctx)
        bits.append(bits_of_error(got, want_f, out))
    mean = sum(bits) / len(bits)
    return ErrorReport(tuple(bits), mean, out.precision - mean)


def local_error(program, points, target, ctx: EvalContext | None = None) -> dict[tuple, float]:
    """Mean bits of error each operator introduces on its own, keyed by
    node path. The operator is fed the rounded true values of its
    arguments, so children are never blamed for upstream error."""
    ctx = ctx if ctx is not None else EvalContext()
    env = program.env
    out: dict[tuple, float] = {}
    for path, node in iter_subexprs(program.body):
        if not isinstance(node, FloatOp):
            out[path] = 0.0
            continue
        op = target.operators[node.op]
        want_expr = desugar(node, target)
        arg_exprs = [desugar(a, target) for a in node.args]
        total = 0.0
        for pt in points:
            vals = []
            for ae, ty in zip(arg_exprs, op.arg_types):
                v = eval_real(ae, pt, ty, ctx)
                vals.append(float("nan") if v is NONREP else v)
            if any(math.isnan(v) for v in vals):
                got = float("nan")
            else:
                got = ctx.apply_op(op, tuple(vals))
            want = eval_real(want_expr, pt, op.ret_type, ctx)
            want_f = float("nan") if want is NONREP else want
            total += bits_of_error(got, want_f, op.ret_type)
        out[path] = total / len(points)
    return out
