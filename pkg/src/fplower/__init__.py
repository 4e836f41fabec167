"""Target-aware lowering of real-number expressions to floating-point
programs, searching mathematically equivalent implementations for the
best cost/accuracy trade-offs."""

from .costing import CostModel, cost_opportunity, program_cost
from .egraph import EGraph, SaturationReport
from .extraction import build_table, multi_extract, typed_extract
from .ir import (
    Program,
    TypeTag,
    desugar,
    format_fpcore,
    parse_program,
    resolve,
    typecheck,
)
from .oracle import (
    NONREP,
    EvalContext,
    SamplePoint,
    accuracy,
    bits_of_error,
    eval_float,
    eval_real,
    local_error,
    sample,
)
from .rules import math_rules, simplifying_rules
from .search import ImproveResult, SearchConfig, improve, pareto_filter
from .target import (
    OperatorDef,
    RewriteRule,
    TargetDesc,
    compose,
    derive_rules,
    format_target_code,
    load_target,
    load_target_source,
    shipped_target,
)

__version__ = "0.1.0"

__all__ = [
    "CostModel", "cost_opportunity", "program_cost",
    "EGraph", "SaturationReport",
    "build_table", "multi_extract", "typed_extract",
    "Program", "TypeTag", "desugar", "format_fpcore", "parse_program",
    "resolve", "typecheck",
    "NONREP", "EvalContext", "SamplePoint", "accuracy", "bits_of_error",
    "eval_float", "eval_real", "local_error", "sample",
    "math_rules", "simplifying_rules",
    "ImproveResult", "SearchConfig", "improve", "pareto_filter",
    "OperatorDef", "RewriteRule", "TargetDesc", "compose", "derive_rules",
    "format_target_code", "load_target", "load_target_source", "shipped_target",
    "__version__",
]
