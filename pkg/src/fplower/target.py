"""Target descriptions: operator sets with real definitions, costs, and
accuracy models, loaded from an s-expression DSL.

A target file contains `define-operator` forms and one `define-target`
form. Targets may import other targets by name; imported files are found
next to the importing file, falling back to the directory of shipped
targets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import sexp
from .ir import (
    Cmp,
    Expr,
    FloatOp,
    If,
    Lit,
    ParseError,
    RealOp,
    TypeTag,
    Var,
    is_pattern_var,
    iter_subexprs,
    parse_real_expr,
    substitute,
    typecheck,
)

SHIPPED_DIR = Path(__file__).parent / "targets"

_TYPE_NAMES = {"binary64": TypeTag.B64, "binary32": TypeTag.B32, "bool": TypeTag.BOOL}


class TargetError(ValueError):
    pass


@dataclass(frozen=True)
class OperatorDef:
    name: str
    arg_types: tuple[TypeTag, ...]
    ret_type: TypeTag
    formals: tuple[str, ...]
    approx: Expr
    surface: str | None = None
    cost: float = 1.0
    rounded_at: int | None = None  # None means correctly rounded
    codegen: str | None = None

    @property
    def arity(self) -> int:
        return len(self.arg_types)


@dataclass(frozen=True)
class TargetDesc:
    name: str
    operators: dict[str, OperatorDef]
    literal_cost: dict[TypeTag, float] = field(default_factory=dict)
    var_cost: float = 0.0
    if_mode: str = "scalar"  # or "vector"
    if_overhead: float = 0.0
    declared: frozenset[str] = frozenset()

    def __post_init__(self):
        index = {}
        for op in self.operators.values():
            if op.surface is not None:
                index[(op.surface, op.ret_type)] = op
        object.__setattr__(self, "_surface_index", index)

    def lookup_surface(self, surface: str, arity: int, ret: TypeTag) -> OperatorDef | None:
        op = self._surface_index.get((surface, ret))
        if op is not None and op.arity == arity:
            return op
        return None

    def literal_cost_of(self, ty: TypeTag) -> float:
        return self.literal_cost.get(ty, 0.0)

    def cmp_cost(self, relation: str) -> float:
        op = self._surface_index.get((relation, TypeTag.BOOL))
        return op.cost if op is not None else 1.0


@dataclass(frozen=True)
class RewriteRule:
    """A one-way rewrite between pattern expressions.

    kind: 'identity' (real identity), 'lower' (real pattern to an operator),
    'lift' (operator to its real definition), or 'custom' (unchecked).
    """

    name: str
    lhs: Expr
    rhs: Expr
    kind: str = "identity"

    def __post_init__(self):
        lhs_vars = {n.name for _, n in iter_subexprs(self.lhs) if is_pattern_var(n)}
        rhs_vars = {n.name for _, n in iter_subexprs(self.rhs) if is_pattern_var(n)}
        if not rhs_vars <= lhs_vars:
            raise TargetError(f"rule {self.name}: rhs has unbound pattern vars {rhs_vars - lhs_vars}")
        if self.kind == "identity":
            for side in (self.lhs, self.rhs):
                if any(isinstance(n, FloatOp) for _, n in iter_subexprs(side)):
                    raise TargetError(f"identity rule {self.name} mentions a float operator")
        elif self.kind == "lower" and not isinstance(self.rhs, FloatOp):
            raise TargetError(f"lowering rule {self.name} must produce an operator node")
        elif self.kind == "lift" and not isinstance(self.lhs, FloatOp):
            raise TargetError(f"lifting rule {self.name} must start from an operator node")


# ---------------------------------------------------------------------------
# Validation

def _validate_operator(op: OperatorDef):
    free = {n.name for _, n in iter_subexprs(op.approx) if isinstance(n, Var)}
    if op.ret_type is TypeTag.BOOL:
        # comparison-cost entries never desugar; any well-formed approx does
        if not free <= set(op.formals):
            raise TargetError(f"operator {op.name}: approx mentions unknown variables")
    elif free != set(op.formals):
        raise TargetError(
            f"operator {op.name}: approx variables {sorted(free)} "
            f"do not match formals {list(op.formals)}"
        )
    env = {f: TypeTag.REAL for f in op.formals}
    if typecheck(op.approx, env) is not TypeTag.REAL:
        raise TargetError(f"operator {op.name}: approx is not a real expression")
    if not (op.cost >= 0 and math.isfinite(op.cost)):
        raise TargetError(f"operator {op.name}: cost must be finite and nonnegative")
    # bool-returning operators exist only to give comparisons a cost
    if not all(t.is_float for t in op.arg_types) or not (
        op.ret_type.is_float or op.ret_type is TypeTag.BOOL
    ):
        raise TargetError(f"operator {op.name}: signature must use float types")
    if op.rounded_at is not None and not 1 <= op.rounded_at <= op.ret_type.precision:
        raise TargetError(
            f"operator {op.name}: rounded-at {op.rounded_at} outside "
            f"[1, {op.ret_type.precision}]"
        )


def _validate_target(t: TargetDesc) -> TargetDesc:
    surfaces = {}
    for op in t.operators.values():
        _validate_operator(op)
        if op.surface is None:
            continue
        key = (op.surface, op.ret_type)
        if key in surfaces:
            raise TargetError(
                f"operators {surfaces[key]} and {op.name} both claim surface "
                f"'{op.surface}' at {op.ret_type.value}"
            )
        surfaces[key] = op.name
    for ty, cost in t.literal_cost.items():
        if not ty.is_float:
            raise TargetError(f"literal cost declared for non-float type {ty.value}")
        if cost < 0:
            raise TargetError("literal costs must be nonnegative")
    if t.var_cost < 0 or t.if_overhead < 0:
        raise TargetError("costs must be nonnegative")
    if t.if_mode not in ("scalar", "vector"):
        raise TargetError(f"unknown if mode '{t.if_mode}'")
    return t


def compose(base: TargetDesc, overlay: TargetDesc) -> TargetDesc:
    """Overlay a target on a base: operators shadow by name, scalar fields
    are taken from the overlay when it declared them."""
    ops = dict(base.operators)
    ops.update(overlay.operators)
    literal_cost = dict(base.literal_cost)
    literal_cost.update(overlay.literal_cost)
    declared = base.declared | overlay.declared
    return _validate_target(
        TargetDesc(
            name=overlay.name or base.name,
            operators=ops,
            literal_cost=literal_cost,
            var_cost=overlay.var_cost if "var-cost" in overlay.declared else base.var_cost,
            if_mode=overlay.if_mode if "if-cost" in overlay.declared else base.if_mode,
            if_overhead=overlay.if_overhead if "if-cost" in overlay.declared else base.if_overhead,
            declared=declared,
        )
    )


def empty_target() -> TargetDesc:
    return TargetDesc(name="", operators={})


# ---------------------------------------------------------------------------
# Loading

def _err(form, message: str) -> TargetError:
    line, col = sexp.position(form)
    return TargetError(f"{message} (line {line}, column {col})")


def _sym(form) -> str:
    if not isinstance(form, sexp.Sym):
        raise _err(form, "expected an identifier")
    return form.text


def _num(form) -> float:
    from .ir import parse_rational

    if isinstance(form, sexp.Sym):
        v = parse_rational(form.text)
        if v is not None:
            return float(v)
    raise _err(form, "expected a number")


def _keywords(items, where: str):
    """Split a flat tail into {keyword: [values...]} preserving order."""
    out: dict[str, list] = {}
    key = None
    for item in items:
        if isinstance(item, sexp.Sym) and item.text.startswith("#:"):
            key = item.text[2:]
            if key in out:
                raise _err(item, f"duplicate keyword #:{key} in {where}")
            out[key] = []
        elif key is None:
            raise _err(item, f"unexpected item before first keyword in {where}")
        else:
            out[key].append(item)
    return out


def _parse_operator(form) -> OperatorDef:
    if len(form) < 3:
        raise _err(form, "define-operator needs a signature and return type")
    sig = form[1]
    if not isinstance(sig, list) or not sig:
        raise _err(form, "expected (NAME [arg type]...) signature")
    name = _sym(sig[0])
    formals, arg_types = [], []
    for argform in sig[1:]:
        if not isinstance(argform, list) or len(argform) != 2:
            raise _err(argform if not isinstance(argform, list) else sig, f"operator {name}: expected [arg type]")
        formals.append(_sym(argform[0]))
        tyname = _sym(argform[1])
        if tyname not in _TYPE_NAMES:
            raise _err(argform[1], f"unknown type '{tyname}'")
        arg_types.append(_TYPE_NAMES[tyname])
    retname = _sym(form[2])
    if retname not in _TYPE_NAMES:
        raise _err(form[2], f"unknown type '{retname}'")
    ret_type = _TYPE_NAMES[retname]

    kw = _keywords(form[3:], f"operator {name}")
    if "approx" not in kw or len(kw["approx"]) != 1:
        raise _err(form, f"operator {name}: exactly one #:approx expression required")
    try:
        approx = parse_real_expr(kw.pop("approx")[0], set(formals))
    except ParseError as e:
        raise TargetError(f"operator {name}: bad approx: {e}") from None

    surface = None
    if "surface" in kw:
        vals = kw.pop("surface")
        if len(vals) != 1:
            raise _err(form, f"operator {name}: #:surface takes one name")
        surface = _sym(vals[0])
    cost = 1.0
    if "cost" in kw:
        vals = kw.pop("cost")
        if len(vals) != 1:
            raise _err(form, f"operator {name}: #:cost takes one number")
        cost = _num(vals[0])
    rounded_at = None
    if "impl" in kw:
        vals = kw.pop("impl")
        if (
            len(vals) != 1
            or not isinstance(vals[0], list)
            or len(vals[0]) != 2
            or _sym(vals[0][0]) != "rounded-at"
        ):
            raise _err(form, f"operator {name}: #:impl must be (rounded-at N)")
        rounded_at = int(_num(vals[0][1]))
    codegen = None
    if "codegen" in kw:
        vals = kw.pop("codegen")
        if len(vals) != 1 or not isinstance(vals[0], sexp.Str):
            raise _err(form, f"operator {name}: #:codegen takes one string")
        codegen = vals[0].text
    if kw:
        raise _err(form, f"operator {name}: unknown keywords {sorted(kw)}")

    op = OperatorDef(
        name=name,
        arg_types=tuple(arg_types),
        ret_type=ret_type,
        formals=tuple(formals),
        approx=approx,
        surface=surface,
        cost=cost,
        rounded_at=rounded_at,
        codegen=codegen,
    )
    _validate_operator(op)
    return op


def _load_text(text: str, origin: Path | None, stack: tuple[Path, ...]) -> TargetDesc:
    try:
        forms = sexp.parse_all(text)
    except sexp.SexpError as e:
        raise TargetError(str(e)) from None

    local_ops: dict[str, OperatorDef] = {}
    target_form = None
    for form in forms:
        if not isinstance(form, list) or not form or not isinstance(form[0], sexp.Sym):
            raise _err(form, "expected (define-operator ...) or (define-target ...)")
        head = form[0].text
        if head == "define-operator":
            op = _parse_operator(form)
            if op.name in local_ops:
                raise _err(form, f"duplicate operator '{op.name}'")
            local_ops[op.name] = op
        elif head == "define-target":
            if target_form is not None:
                raise _err(form, "only one define-target per file")
            target_form = form
        else:
            raise _err(form, f"unknown form '{head}'")
    if target_form is None:
        raise TargetError(f"no define-target form in {origin or '<string>'}")

    name = _sym(target_form[1])
    kw = _keywords(target_form[2:], f"target {name}")

    base = empty_target()
    for imp in kw.pop("import", []):
        imported = _load_import(_sym(imp), origin, stack)
        base = compose(base, imported)

    declared = set()
    if_mode, if_overhead = base.if_mode, base.if_overhead
    if "if-cost" in kw:
        declared.add("if-cost")
        vals = kw.pop("if-cost")
        if len(vals) != 1 or not isinstance(vals[0], list) or len(vals[0]) != 2:
            raise _err(target_form, "#:if-cost must be ((max|sum) N)")
        mode = _sym(vals[0][0])
        if mode not in ("max", "sum"):
            raise _err(vals[0][0], "#:if-cost mode must be max or sum")
        if_mode = "scalar" if mode == "max" else "vector"
        if_overhead = _num(vals[0][1])
    var_cost = base.var_cost
    if "var-cost" in kw:
        declared.add("var-cost")
        vals = kw.pop("var-cost")
        if len(vals) != 1:
            raise _err(target_form, "#:var-cost takes one number")
        var_cost = _num(vals[0])
    literal_cost = dict(base.literal_cost)
    if "literals" in kw:
        vals = kw.pop("literals")
        if len(vals) != 1 or not isinstance(vals[0], list):
            raise _err(target_form, "#:literals takes one ([type cost]...) list")
        for pair in vals[0]:
            if not isinstance(pair, list) or len(pair) != 2:
                raise _err(vals[0], "#:literals entries must be [type cost]")
            tyname = _sym(pair[0])
            if tyname not in _TYPE_NAMES:
                raise _err(pair[0], f"unknown type '{tyname}'")
            literal_cost[_TYPE_NAMES[tyname]] = _num(pair[1])

    if "operators" not in kw:
        raise _err(target_form, "target requires #:operators (NAME...)")
    opvals = kw.pop("operators")
    if len(opvals) != 1 or not isinstance(opvals[0], list):
        raise _err(target_form, "#:operators takes one (NAME...) list")
    ops = dict(base.operators)
    for opname_form in opvals[0]:
        opname = _sym(opname_form)
        if opname in local_ops:
            ops[opname] = local_ops[opname]
        elif opname not in ops:
            raise _err(opname_form, f"operator '{opname}' is not defined or imported")
    if kw:
        raise _err(target_form, f"unknown keywords {sorted(kw)} in define-target")

    return _validate_target(
        TargetDesc(
            name=name,
            operators=ops,
            literal_cost=literal_cost,
            var_cost=var_cost,
            if_mode=if_mode,
            if_overhead=if_overhead,
            declared=base.declared | frozenset(declared),
        )
    )


def _load_import(name: str, origin: Path | None, stack: tuple[Path, ...]) -> TargetDesc:
    candidates = []
    if origin is not None:
        candidates.append(origin.parent / f"{name}.tgt")
    candidates.append(SHIPPED_DIR / f"{name}.tgt")
    for cand in candidates:
        if cand.exists():
            return _load_path(cand, stack)
    raise TargetError(f"cannot find imported target '{name}' (searched {[str(c) for c in candidates]})")


def _load_path(path: Path, stack: tuple[Path, ...]) -> TargetDesc:
    path = path.resolve()
    if path in stack:
        cycle = " -> ".join(p.name for p in stack + (path,))
        raise TargetError(f"cyclic target imports: {cycle}")
    text = path.read_text()
    return _load_text(text, path, stack + (path,))


def load_target(path) -> TargetDesc:
    """Load and validate a target description file."""
    return _load_path(Path(path), ())


def load_target_source(text: str, base_dir=None) -> TargetDesc:
    """Load a target from source text (imports resolve against base_dir)."""
    origin = Path(base_dir) / "<string>.tgt" if base_dir else None
    return _load_text(text, origin, ())


def shipped_target(name: str) -> TargetDesc:
    return load_target(SHIPPED_DIR / f"{name}.tgt")


# ---------------------------------------------------------------------------
# Derived rewrite rules

def derive_rules(target: TargetDesc) -> list[RewriteRule]:
    """One lifting and one lowering rule per operator, straight from its
    real definition."""
    rules = []
    for op in target.operators.values():
        if not op.ret_type.is_float:
            continue
        pvars = tuple(Var("?" + f) for f in op.formals)
        opnode = FloatOp(op.name, pvars)
        body = substitute(op.approx, {f: v for f, v in zip(op.formals, pvars)})
        rules.append(RewriteRule(f"lift-{op.name}", opnode, body, kind="lift"))
        rules.append(RewriteRule(f"lower-{op.name}", body, opnode, kind="lower"))
    return rules


# ---------------------------------------------------------------------------
# Code emission

def _render_literal(v: Fraction, ty: TypeTag) -> str:
    text = repr(float(v))
    return text + "f" if ty is TypeTag.B32 else text


def format_target_code(e_or_program, target: TargetDesc) -> str:
    """Emit the expression in the target's surface language.

    Operators with a #:codegen template are rendered through it (positional
    placeholders {0}, {1}, ...); others fall back to `name(args...)`.
    """
    e = e_or_program.body if hasattr(e_or_program, "body") else e_or_program

    def go(node) -> str:
        if isinstance(node, Var):
            return node.name
        if isinstance(node, Lit):
            return _render_literal(node.value, node.type)
        if isinstance(node, FloatOp):
            args = [go(a) for a in node.args]
            op = target.operators[node.op]
            if op.codegen is not None:
                return op.codegen.format(*args)
            return f"{node.op}({', '.join(args)})"
        if isinstance(node, If):
            return f"(({go(node.cond)}) ? ({go(node.then)}) : ({go(node.orelse)}))"
        if isinstance(node, Cmp):
            return f"({go(node.lhs)} {node.relation} {go(node.rhs)})"
        if isinstance(node, RealOp):
            raise TargetError(f"cannot emit unresolved operator '{node.symbol}'")
        raise TargetError(f"cannot emit {node!r}")

    return go(e)
