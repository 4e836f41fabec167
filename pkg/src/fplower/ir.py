"""Mixed real/float expression IR: parsing, typing, desugaring, printing.

Programs arrive in an FPCore-style surface syntax, are resolved against a
target's operator set, and desugar back to pure real-number expressions.
Pattern variables (used by rewrite rules) are plain `Var` nodes whose name
starts with '?'.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from fractions import Fraction

from . import sexp
from .fpnum import BINARY32, BINARY64, is_representable, round_to_format


class TypeTag(Enum):
    REAL = "real"
    B64 = "binary64"
    B32 = "binary32"
    BOOL = "bool"

    @property
    def is_float(self) -> bool:
        return self in (TypeTag.B64, TypeTag.B32)

    @property
    def precision(self) -> int:
        if self is TypeTag.B64:
            return 53
        if self is TypeTag.B32:
            return 24
        raise ValueError(f"{self.value} has no precision")

    @property
    def fmt(self):
        if self is TypeTag.B64:
            return BINARY64
        if self is TypeTag.B32:
            return BINARY32
        raise ValueError(f"{self.value} is not a float type")


FLOAT_TYPES = (TypeTag.B64, TypeTag.B32)

# Real function vocabulary with arities; 'pi' is the only nullary.
REAL_FUNCTIONS = {
    "+": 2, "-": 2, "*": 2, "/": 2, "neg": 1,
    "sqrt": 1, "fabs": 1, "exp": 1, "expm1": 1, "log": 1, "log1p": 1,
    "pow": 2, "sin": 1, "cos": 1, "tan": 1, "fma": 3, "hypot": 2,
    "pi": 0,
}

CMP_RELATIONS = ("<", "<=", ">", ">=", "==", "!=")


class ParseError(ValueError):
    pass


class TypeCheckError(ValueError):
    pass


class NoSuchOperatorError(KeyError):
    def __init__(self, surface: str, arity: int, ty: "TypeTag"):
        super().__init__(f"target has no operator for '{surface}'/{arity} at {ty.value}")
        self.surface = surface
        self.arity = arity
        self.ty = ty


class Expr:
    __slots__ = ()

    def __repr__(self):
        return to_sexp(self)


@dataclass(frozen=True, repr=False)
class Var(Expr):
    name: str


@dataclass(frozen=True, repr=False)
class Lit(Expr):
    value: Fraction
    type: TypeTag

    def __post_init__(self):
        if self.type.is_float and not is_representable(self.value, self.type.fmt):
            raise ValueError(f"{self.value} is not exact in {self.type.value}")


@dataclass(frozen=True, repr=False)
class RealOp(Expr):
    symbol: str
    args: tuple[Expr, ...]


@dataclass(frozen=True, repr=False)
class FloatOp(Expr):
    op: str
    args: tuple[Expr, ...]


@dataclass(frozen=True, repr=False)
class If(Expr):
    cond: Expr
    then: Expr
    orelse: Expr


@dataclass(frozen=True, repr=False)
class Cmp(Expr):
    relation: str
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Program:
    params: tuple[tuple[str, TypeTag], ...]
    body: Expr
    out_type: TypeTag

    @property
    def env(self) -> dict[str, TypeTag]:
        return dict(self.params)


def is_pattern_var(e: Expr) -> bool:
    return isinstance(e, Var) and e.name.startswith("?")


def children(e: Expr) -> tuple[Expr, ...]:
    if isinstance(e, (RealOp, FloatOp)):
        return e.args
    if isinstance(e, If):
        return (e.cond, e.then, e.orelse)
    if isinstance(e, Cmp):
        return (e.lhs, e.rhs)
    return ()


def with_children(e: Expr, kids: tuple[Expr, ...]) -> Expr:
    if isinstance(e, RealOp):
        return RealOp(e.symbol, kids)
    if isinstance(e, FloatOp):
        return FloatOp(e.op, kids)
    if isinstance(e, If):
        return If(*kids)
    if isinstance(e, Cmp):
        return Cmp(e.relation, *kids)
    assert not kids
    return e


Path = tuple[int, ...]


def iter_subexprs(e: Expr, path: Path = ()):
    """Preorder (path, node) traversal."""
    yield path, e
    for i, c in enumerate(children(e)):
        yield from iter_subexprs(c, path + (i,))


def subexpr_at(e: Expr, path: Path) -> Expr:
    for i in path:
        e = children(e)[i]
    return e


def replace_at(e: Expr, path: Path, new: Expr) -> Expr:
    if not path:
        return new
    kids = list(children(e))
    kids[path[0]] = replace_at(kids[path[0]], path[1:], new)
    return with_children(e, tuple(kids))


def substitute(e: Expr, mapping: dict[str, Expr]) -> Expr:
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    kids = children(e)
    if not kids:
        return e
    return with_children(e, tuple(substitute(c, mapping) for c in kids))


def expr_size(e: Expr) -> int:
    return 1 + sum(expr_size(c) for c in children(e))


# ---------------------------------------------------------------------------
# Parsing

_DECIMAL_RE = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")
_RATIONAL_RE = re.compile(r"^[+-]?\d+/\d+$")

_PRECISIONS = {"binary64": TypeTag.B64, "binary32": TypeTag.B32}


def parse_rational(text: str) -> Fraction | None:
    if _RATIONAL_RE.match(text):
        return Fraction(text)
    if _DECIMAL_RE.match(text):
        return Fraction(Decimal(text))
    return None


def _err(form, message: str) -> ParseError:
    line, col = sexp.position(form)
    return ParseError(f"{message} (line {line}, column {col})")


def _parse_expr(form, env: dict[str, TypeTag], prec: TypeTag) -> Expr:
    if isinstance(form, sexp.Str):
        raise _err(form, "string literal not allowed in expression")
    if isinstance(form, sexp.Sym):
        value = parse_rational(form.text)
        if value is not None:
            rounded = round_to_format(value, prec.fmt)
            if rounded is None:
                raise _err(form, f"literal {form.text} overflows {prec.value}")
            return Lit(Fraction(rounded), prec)
        if form.text == "PI":
            return RealOp("pi", ())
        if form.text not in env:
            raise _err(form, f"unbound variable '{form.text}'")
        return Var(form.text)
    if not form:
        raise _err(form, "empty application")
    head = form[0]
    if not isinstance(head, sexp.Sym):
        raise _err(form, "operator must be a symbol")
    args = [_parse_expr(f, env, prec) for f in form[1:]]
    name = head.text
    if name == "if":
        if len(args) != 3:
            raise _err(form, "'if' takes exactly 3 arguments")
        return If(args[0], args[1], args[2])
    if name in CMP_RELATIONS:
        if len(args) != 2:
            raise _err(form, f"'{name}' takes exactly 2 arguments")
        return Cmp(name, args[0], args[1])
    if name == "-" and len(args) == 1:
        return RealOp("neg", (args[0],))
    if name in REAL_FUNCTIONS:
        if len(args) != REAL_FUNCTIONS[name]:
            raise _err(form, f"'{name}' takes {REAL_FUNCTIONS[name]} arguments, got {len(args)}")
        return RealOp(name, tuple(args))
    # Anything else is a target-specific surface operator; existence and
    # arity are checked at resolution time.
    return RealOp(name, tuple(args))


def parse_program(text: str) -> Program:
    """Parse `(FPCore (params...) :precision <prec> body)`."""
    try:
        form = sexp.parse_one(text)
    except sexp.SexpError as e:
        raise ParseError(str(e)) from None
    if not isinstance(form, list) or not form or not (
        isinstance(form[0], sexp.Sym) and form[0].text == "FPCore"
    ):
        raise _err(form, "expected (FPCore ...)")
    if len(form) != 5:
        raise _err(form, "expected (FPCore (params) :precision <prec> body)")
    _, params_form, key, prec_form, body_form = form
    if not isinstance(params_form, list):
        raise _err(form, "expected parameter list after FPCore")
    if not (isinstance(key, sexp.Sym) and key.text == ":precision"):
        raise _err(key, "expected ':precision'")
    if not (isinstance(prec_form, sexp.Sym) and prec_form.text in _PRECISIONS):
        raise _err(prec_form, "precision must be binary64 or binary32")
    prec = _PRECISIONS[prec_form.text]
    params = []
    seen = set()
    for p in params_form:
        if not isinstance(p, sexp.Sym) or parse_rational(p.text) is not None:
            raise _err(p if not isinstance(p, list) else params_form, "parameter must be an identifier")
        if p.text in seen:
            raise _err(p, f"duplicate parameter '{p.text}'")
        seen.add(p.text)
        params.append((p.text, prec))
    env = dict(params)
    body = _parse_expr(body_form, env, prec)
    return Program(tuple(params), body, prec)


def parse_real_expr(form, variables: set[str] | None = None, pattern: bool = False) -> Expr:
    """Parse a real-only expression from a parsed s-expression form.

    Literals stay exact rationals (no rounding). With `pattern=True`,
    symbols starting with '?' become pattern variables; otherwise variables
    must come from `variables` (None allows any identifier).
    """
    if isinstance(form, sexp.Str):
        raise _err(form, "string literal not allowed in real expression")
    if isinstance(form, sexp.Sym):
        value = parse_rational(form.text)
        if value is not None:
            return Lit(value, TypeTag.REAL)
        if form.text == "PI":
            return RealOp("pi", ())
        if form.text.startswith("?"):
            if not pattern:
                raise _err(form, f"pattern variable '{form.text}' not allowed here")
            return Var(form.text)
        if variables is not None and form.text not in variables:
            raise _err(form, f"unbound variable '{form.text}'")
        return Var(form.text)
    if not form or not isinstance(form[0], sexp.Sym):
        raise _err(form, "expected (op args...)")
    name = form[0].text
    args = tuple(parse_real_expr(f, variables, pattern) for f in form[1:])
    if name == "-" and len(args) == 1:
        return RealOp("neg", args)
    if name not in REAL_FUNCTIONS:
        raise _err(form, f"unknown real function '{name}'")
    if len(args) != REAL_FUNCTIONS[name]:
        raise _err(form, f"'{name}' takes {REAL_FUNCTIONS[name]} arguments, got {len(args)}")
    return RealOp(name, args)


# ---------------------------------------------------------------------------
# Type checking

def typecheck(e: Expr, env: dict[str, TypeTag], target=None) -> TypeTag:
    """Return the unique type of `e`, or raise TypeCheckError.

    Float operator signatures must match exactly; there are no implicit
    casts. `target` may be None for real-only expressions.
    """
    if isinstance(e, Var):
        if e.name not in env:
            raise TypeCheckError(f"unbound variable '{e.name}'")
        return env[e.name]
    if isinstance(e, Lit):
        return e.type
    if isinstance(e, RealOp):
        if e.symbol in REAL_FUNCTIONS and len(e.args) != REAL_FUNCTIONS[e.symbol]:
            raise TypeCheckError(f"'{e.symbol}' arity mismatch")
        for a in e.args:
            t = typecheck(a, env, target)
            if t is not TypeTag.REAL:
                raise TypeCheckError(f"real operator '{e.symbol}' applied to {t.value} argument")
        return TypeTag.REAL
    if isinstance(e, FloatOp):
        if target is None or e.op not in target.operators:
            raise TypeCheckError(f"unknown operator '{e.op}'")
        op = target.operators[e.op]
        if len(e.args) != len(op.arg_types):
            raise TypeCheckError(f"'{e.op}' expects {len(op.arg_types)} arguments, got {len(e.args)}")
        for a, want in zip(e.args, op.arg_types):
            got = typecheck(a, env, target)
            if got is not want:
                raise TypeCheckError(f"'{e.op}' argument: expected {want.value}, found {got.value}")
        return op.ret_type
    if isinstance(e, Cmp):
        lt = typecheck(e.lhs, env, target)
        rt = typecheck(e.rhs, env, target)
        if lt is not rt or lt is TypeTag.BOOL:
            raise TypeCheckError(f"comparison between {lt.value} and {rt.value}")
        return TypeTag.BOOL
    if isinstance(e, If):
        ct = typecheck(e.cond, env, target)
        if ct is not TypeTag.BOOL:
            raise TypeCheckError(f"'if' condition has type {ct.value}, expected bool")
        tt = typecheck(e.then, env, target)
        et = typecheck(e.orelse, env, target)
        if tt is not et:
            raise TypeCheckError(f"'if' branches disagree: {tt.value} vs {et.value}")
        return tt
    raise TypeCheckError(f"unknown expression node {e!r}")


# ---------------------------------------------------------------------------
# Resolution and desugaring

def resolve(program: Program, target) -> Program:
    """Map surface operators onto the target's operator set.

    Operators are chosen by (surface name, arity, expected type), with the
    expected type flowing down from the program precision; an operator's
    own name also resolves it, so printed programs that use target-only
    operators (or explicit casts between widths) round-trip. The result is
    fully type-checked.
    """
    prec = program.out_type
    env = program.env

    def pick(symbol: str, arity: int, want: TypeTag):
        op = target.lookup_surface(symbol, arity, want)
        if op is not None:
            return op
        op = target.operators.get(symbol)
        if op is not None and op.ret_type is want and op.arity == arity:
            return op
        raise NoSuchOperatorError(symbol, arity, want)

    def go(e: Expr, want: TypeTag) -> Expr:
        if isinstance(e, Var):
            if env[e.name] is not want:
                raise TypeCheckError(
                    f"variable '{e.name}' is {env[e.name].value} but {want.value} "
                    "is required (insert an explicit cast operator)"
                )
            return e
        if isinstance(e, Lit):
            if e.type is want:
                return e
            if is_representable(e.value, want.fmt):
                return Lit(e.value, want)
            raise TypeCheckError(f"literal {e.value} is not exact in {want.value}")
        if isinstance(e, If):
            return If(go(e.cond, TypeTag.BOOL), go(e.then, want), go(e.orelse, want))
        if isinstance(e, Cmp):
            # Comparisons read their operands at the program precision.
            return Cmp(e.relation, go(e.lhs, prec), go(e.rhs, prec))
        if isinstance(e, FloatOp):
            op = target.operators.get(e.op)
            if op is None or op.ret_type is not want or op.arity != len(e.args):
                raise NoSuchOperatorError(e.op, len(e.args), want)
            return FloatOp(e.op, tuple(go(a, t) for a, t in zip(e.args, op.arg_types)))
        assert isinstance(e, RealOp)
        op = pick(e.symbol, len(e.args), want)
        return FloatOp(op.name, tuple(go(a, t) for a, t in zip(e.args, op.arg_types)))

    body = go(program.body, prec)
    resolved = Program(program.params, body, program.out_type)
    got = typecheck(body, env, target)
    if got is not program.out_type:
        raise TypeCheckError(f"program body has type {got.value}, expected {program.out_type.value}")
    return resolved


def desugar(e: Expr, target=None) -> Expr:
    """Replace float operators by their real-number definitions.

    The result contains only RealOp/Var/Lit(REAL)/If/Cmp nodes. Desugaring
    is deterministic and idempotent on real-only expressions.
    """
    if isinstance(e, Var):
        return e
    if isinstance(e, Lit):
        return Lit(e.value, TypeTag.REAL)
    if isinstance(e, RealOp):
        return RealOp(e.symbol, tuple(desugar(a, target) for a in e.args))
    if isinstance(e, FloatOp):
        op = target.operators[e.op]
        mapping = {f: desugar(a, target) for f, a in zip(op.formals, e.args)}
        return substitute(op.approx, mapping)
    if isinstance(e, If):
        return If(desugar(e.cond, target), desugar(e.then, target), desugar(e.orelse, target))
    if isinstance(e, Cmp):
        return Cmp(e.relation, desugar(e.lhs, target), desugar(e.rhs, target))
    raise TypeError(f"cannot desugar {e!r}")


# ---------------------------------------------------------------------------
# Printing

_STANDARD_SURFACES = set(REAL_FUNCTIONS) | set(CMP_RELATIONS) | {"if"}


def format_rational(v: Fraction) -> str:
    if v.denominator == 1:
        return str(v.numerator)
    if is_representable(v, BINARY64):
        return repr(float(v))
    return f"{v.numerator}/{v.denominator}"


def to_sexp(e: Expr, surface_of=None) -> str:
    """Render an expression as surface text.

    `surface_of` maps a FloatOp name to its print name; by default the
    operator name itself is used.
    """
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Lit):
        return format_rational(e.value)
    if isinstance(e, RealOp):
        if e.symbol == "pi":
            return "PI"
        parts = " ".join(to_sexp(a, surface_of) for a in e.args)
        return f"({e.symbol} {parts})"
    if isinstance(e, FloatOp):
        name = surface_of(e.op) if surface_of else e.op
        parts = " ".join(to_sexp(a, surface_of) for a in e.args)
        return f"({name} {parts})" if parts else f"({name})"
    if isinstance(e, If):
        return f"(if {to_sexp(e.cond, surface_of)} {to_sexp(e.then, surface_of)} {to_sexp(e.orelse, surface_of)})"
    if isinstance(e, Cmp):
        return f"({e.relation} {to_sexp(e.lhs, surface_of)} {to_sexp(e.rhs, surface_of)})"
    raise TypeError(f"cannot format {e!r}")


def format_fpcore(p: Program, target=None) -> str:
    """Render a Program; round-trips through parse_program and resolve."""

    def surface_of(name: str) -> str:
        if target is not None and name in target.operators:
            return target.operators[name].surface or name
        return name

    nonstandard = sorted(
        {
            surface_of(node.op)
            for _, node in iter_subexprs(p.body)
            if isinstance(node, FloatOp) and surface_of(node.op) not in _STANDARD_SURFACES
        }
    )
    params = " ".join(name for name, _ in p.params)
    body = to_sexp(p.body, surface_of)
    text = f"(FPCore ({params}) :precision {p.out_type.value} {body})"
    if nonstandard:
        return f"; ! target ops: {' '.join(nonstandard)}\n{text}"
    return text
