"""Command-line driver.

    fplower compile --target t.tgt --input prog.fpcore [--format json]
    fplower check-target t.tgt

Exit codes: 0 success, 2 usage error, 3 unworkable input (operator
missing on the target, domain too thin to sample, bad file).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

from .costing import CostModel, program_cost
from .ir import NoSuchOperatorError, ParseError, format_fpcore, parse_program
from .oracle import RNG_ALGORITHM, SamplingExhausted
from .search import ImproveResult, SearchConfig, improve
from .target import TargetDesc, TargetError, format_target_code, load_target


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fplower")
    sub = parser.add_subparsers(dest="command", required=True)

    comp = sub.add_parser("compile", help="search for fast/accurate lowerings")
    comp.add_argument("--target", required=True, help="target description file")
    comp.add_argument("--input", required=True, help="program file, or - for stdin")
    comp.add_argument("--seed", type=int, default=0)
    comp.add_argument("--points", type=int, default=512)
    comp.add_argument("--iters", type=int, default=4)
    comp.add_argument("--node-limit", type=int, default=8000)
    comp.add_argument(
        "--format", choices=("json", "csv", "fpcore", "code"), default="json"
    )
    comp.add_argument("--out", default="-", help="output file, or - for stdout")

    chk = sub.add_parser("check-target", help="validate and describe a target file")
    chk.add_argument("path")
    return parser


def _read_input(spec: str) -> str:
    if spec == "-":
        return sys.stdin.read()
    with open(spec) as f:
        return f.read()


def build_report(source: str, target: TargetDesc, cfg: SearchConfig, result: ImproveResult) -> dict:
    has_templates = all(
        op.codegen is not None for op in target.operators.values()
    )

    def entry(e) -> dict:
        d = {
            "cost": e.cost,
            "accuracy": e.accuracy,
            "train_error_bits": e.train_error_bits,
            "test_error_bits": e.test_error_bits,
            "fpcore": format_fpcore(e.program, target),
        }
        if has_templates:
            d["code"] = format_target_code(e.program, target)
        return d

    return {
        "input": source.strip(),
        "target": target.name,
        "config": {
            "seed": cfg.seed,
            "points": cfg.points,
            "iterations": cfg.iterations,
            "node_limit": cfg.node_limit,
            "candidates_per_site": cfg.candidates_per_site,
            "sites_per_iteration": cfg.sites_per_iteration,
            "rng": RNG_ALGORITHM,
        },
        "original": entry(result.original),
        "frontier": [entry(e) for e in result.frontier],
        "trace": result.trace,
    }


def emit_report(report: dict, fmt: str, sink) -> None:
    if fmt == "json":
        sink.write(json.dumps(report, indent=2))
        sink.write("\n")
        return
    if fmt == "csv":
        writer = csv.writer(sink, lineterminator="\n")
        writer.writerow(["cost", "accuracy", "fpcore"])
        for e in report["frontier"]:
            writer.writerow([repr(e["cost"]), repr(e["accuracy"]), e["fpcore"]])
        return
    if fmt == "fpcore":
        for e in report["frontier"]:
            sink.write(f"; cost={e['cost']!r} accuracy={e['accuracy']!r}\n")
            sink.write(e["fpcore"])
            sink.write("\n\n")
        return
    if fmt == "code":
        for e in report["frontier"]:
            if "code" not in e:
                raise TargetError("--format code requires codegen templates on every operator")
            sink.write(f"/* cost={e['cost']!r} accuracy={e['accuracy']!r} */\n")
            sink.write(e["code"])
            sink.write("\n\n")
        return
    raise ValueError(f"unknown format {fmt}")


def cmd_compile(args) -> int:
    try:
        target = load_target(args.target)
    except (OSError, TargetError) as e:
        print(f"fplower: bad target: {e}", file=sys.stderr)
        return 3
    try:
        source = _read_input(args.input)
        program = parse_program(source)
    except OSError as e:
        print(f"fplower: cannot read input: {e}", file=sys.stderr)
        return 3
    except ParseError as e:
        print(f"fplower: parse error: {e}", file=sys.stderr)
        return 3
    cfg = SearchConfig(
        iterations=args.iters,
        node_limit=args.node_limit,
        points=args.points,
        seed=args.seed,
    )
    try:
        result = improve(program, target, cfg)
    except NoSuchOperatorError as e:
        print(f"fplower: {e.args[0]}", file=sys.stderr)
        return 3
    except SamplingExhausted as e:
        print(f"fplower: sampling failed: {e}", file=sys.stderr)
        return 3

    report = build_report(source, target, cfg, result)
    buffer = io.StringIO()
    emit_report(report, args.format, buffer)
    if args.out == "-":
        sys.stdout.write(buffer.getvalue())
    else:
        with open(args.out, "w") as f:
            f.write(buffer.getvalue())
    return 0


def cmd_check_target(path) -> int:
    try:
        target = load_target(path)
    except (OSError, TargetError) as e:
        print(f"fplower: invalid target: {e}", file=sys.stderr)
        return 3
    print(f"target {target.name}: {len(target.operators)} operators")
    print(f"  if: {target.if_mode}, overhead {target.if_overhead}; var cost {target.var_cost}")
    for op in target.operators.values():
        sig = ", ".join(t.value for t in op.arg_types)
        impl = "correctly-rounded" if op.rounded_at is None else f"rounded-at {op.rounded_at}"
        surface = f" surface={op.surface}" if op.surface else ""
        print(f"  {op.name}({sig}) -> {op.ret_type.value}  cost={op.cost} {impl}{surface}")
        print(f"      = {op.approx!r}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    if args.command == "check-target":
        return cmd_check_target(args.path)
    return cmd_compile(args)


if __name__ == "__main__":
    sys.exit(main())
