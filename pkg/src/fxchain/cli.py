"""Command-line entry point.

Exit status: 0 success, 1 analysis or verification failure, 2 usage, parse
or input-file error.  Artifacts go to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

from . import bitgrowth, dfg, report, simulator
from .allocator import InfeasibleAllocation, assign_formats

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Usage(Exception):
    pass


def _err(msg: str) -> None:
    print(f"fxchain: {msg}", file=sys.stderr)


def _positive(name, minimum=1):
    def conv(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be an integer") from None
        if v < minimum:
            raise argparse.ArgumentTypeError(f"{name} must be >= {minimum}")
        return v
    return conv


def _table(rows: list[list], header: list[str], mode: str) -> str:
    if mode == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return buf.getvalue()
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    lines = ["  ".join(str(x).rjust(wd) for x, wd in zip(r, widths)) for r in [header, *rows]]
    return "\n".join(lines) + "\n"


def _load_graph(path):
    try:
        g = dfg.load(path)
    except OSError as exc:
        raise _Usage(f"{path}: {exc.strerror or exc}") from None
    except dfg.ParseError as exc:
        raise _Usage(f"{path}: {exc}") from None
    for w in g.warnings:
        _err(f"{path}: warning: {w}")
    return g


# ---------------------------------------------------------------- subcommands


def cmd_predict(args) -> int:
    B = args.operand_bits
    N = B - 1
    if args.overflow_index is not None:
        n = args.overflow_index
        step = bitgrowth.overflow_step(N, n)
        if args.format == "json":
            out = json.dumps({"B": B, "N": N, "overflow_index": n, "step": step})
        elif args.format == "csv":
            out = f"B,N,overflow_index,step\n{B},{N},{n},{step}"
        else:
            out = f"{step}  (B={B}, N={N}, overflow {n})"
    else:
        s = args.steps
        k = bitgrowth.growth_at_step(N, s)
        bits = bitgrowth.oracle_bit_length(N, s)
        if args.format == "json":
            out = json.dumps({"B": B, "N": N, "steps": s, "growth": k, "bit_length": bits})
        elif args.format == "csv":
            out = f"B,N,steps,growth,bit_length\n{B},{N},{s},{k},{bits}"
        else:
            out = f"growth {k}, bit-length {bits}  (B={B}, N={N}, steps={s})"
    print(out)
    return EXIT_OK


def cmd_accumulate(args) -> int:
    B = args.operand_bits
    prof = simulator.accumulate_harness(B - 1, args.steps)
    rows = [list(r) for r in prof.rows()]
    if args.format == "json":
        print(json.dumps({"B": B, "N": B - 1, "steps": args.steps,
                          "rows": [{"position": p, "k": k, "bit_length": b} for p, k, b in rows]},
                         indent=2))
    elif args.format == "csv":
        sys.stdout.write(_table(rows, ["position", "k", "bit_length"], "csv"))
    else:
        print(f"# {args.steps} consecutive additions of {B}-bit unsigned operands (B={B}, N={B - 1})")
        sys.stdout.write(_table(rows, ["position", "k", "bit-length"], "text"))
    return EXIT_OK


def cmd_analyze(args) -> int:
    g = _load_graph(args.path)
    try:
        r = assign_formats(g)
    except InfeasibleAllocation as exc:
        _err(f"{args.path}: infeasible allocation at {exc}")
        return EXIT_FAIL
    sys.stdout.write(report.render_report(r, args.format))
    return EXIT_OK


def cmd_chains(args) -> int:
    g = _load_graph(args.path)
    chains = dfg.allocate_chains(g)
    if args.format == "json":
        print(json.dumps([{"index": i, "members": c.members, "base_N": c.base_N,
                           "overflow_steps": c.overflow_steps()}
                          for i, c in enumerate(chains, start=1)], indent=2))
        return EXIT_OK
    if args.format == "csv":
        rows = [[i, " ".join(c.members), "" if c.base_N is None else c.base_N,
                 " ".join(map(str, c.overflow_steps()))] for i, c in enumerate(chains, start=1)]
        sys.stdout.write(_table(rows, ["chain", "members", "base_N", "overflow_steps"], "csv"))
        return EXIT_OK
    if not chains:
        print("no chains")
    for i, c in enumerate(chains, start=1):
        members = " ".join(c.members)
        if c.base_N is None:
            print(f"chain {i}: {members} (heterogeneous operands, worst case per step)")
        else:
            steps = ", ".join(map(str, c.overflow_steps()))
            print(f"chain {i}: {members} (N={c.base_N}), overflows at steps {steps}")
    return EXIT_OK


def _simulate_vectors(g, r, vectors, args) -> int:
    rows, failures = [], 0
    for t, vec in enumerate(vectors, start=1):
        res = simulator.run_fixed(g, r, vec, carry_residual=not args.discard_residual)
        for node_id, nr in res:
            bound = r[node_id].error_bound
            ok = nr.deviation <= bound
            failures += not ok
            if not ok and args.check_bounds:
                _err(f"trial {t}: node {node_id}: deviation {nr.deviation} exceeds bound {bound}")
            rows.append([t, node_id, nr.raw, str(nr.stored), str(nr.reference),
                         "+".join(report.dyadic_terms(nr.deviation)) or "0",
                         "+".join(report.dyadic_terms(bound)) or "0"])
    header = ["trial", "node", "raw", "stored", "reference", "deviation", "bound"]
    if args.format == "json":
        print(json.dumps([dict(zip(header, r_)) for r_ in rows], indent=2))
    else:
        sys.stdout.write(_table(rows, header, args.format))
    return EXIT_FAIL if (args.check_bounds and failures) else EXIT_OK


def _simulate_summary(g, r, args) -> int:
    if args.exhaustive:
        verdict = simulator.verify_bounds(g, r, exhaustive=True,
                                          carry_residual=not args.discard_residual)
    else:
        verdict = simulator.verify_bounds(g, r, args.random, args.seed,
                                          carry_residual=not args.discard_residual)
    rows = []
    for a in r:
        t = verdict.tightness(a.node_id)
        rows.append([a.node_id, a.notation, a.scale_exp,
                     "+".join(report.dyadic_terms(verdict.max_deviation[a.node_id])) or "0",
                     "+".join(report.dyadic_terms(a.error_bound)) or "0",
                     "-" if t is None else f"{float(t):.6f}"])
    header = ["node", "notation", "scale_exp", "max_deviation", "bound", "tightness"]
    if args.format == "json":
        print(json.dumps({"source": verdict.source, "trials": verdict.trials,
                          "violations": [str(c) for c in verdict.counterexamples],
                          "nodes": [dict(zip(header, r_)) for r_ in rows]}, indent=2))
    else:
        if args.format == "text":
            print(f"# {verdict.source}")
        sys.stdout.write(_table(rows, header, args.format))
    if args.check_bounds and not verdict.ok:
        for c in verdict.counterexamples:
            _err(f"bound violated: {c}")
        return EXIT_FAIL
    return EXIT_OK


def cmd_simulate(args) -> int:
    g = _load_graph(args.path)
    try:
        r = assign_formats(g)
    except InfeasibleAllocation as exc:
        _err(f"{args.path}: infeasible allocation at {exc}")
        return EXIT_FAIL
    try:
        if args.inputs:
            try:
                vectors = simulator.load_inputs(args.inputs, g, r.symmetric_inputs)
            except OSError as exc:
                raise _Usage(f"{args.inputs}: {exc.strerror or exc}") from None
            except simulator.InputError as exc:
                raise _Usage(f"{args.inputs}: {exc}") from None
            return _simulate_vectors(g, r, vectors, args)
        return _simulate_summary(g, r, args)
    except simulator.OverflowViolation as exc:
        _err(f"overflow violation (allocator bug): {exc}; inputs {exc.inputs}")
        return EXIT_FAIL


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fxchain",
        description="Chain-aware fixed-point format allocation for dataflow graphs.")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def fmt_flag(sp):
        sp.add_argument("--format", choices=report.MODES, default="text")

    sp = sub.add_parser("predict", help="predict overflow steps of an addition chain")
    sp.add_argument("--operand-bits", "-B", type=_positive("--operand-bits"), required=True,
                    help="operand width B in bits (N = B - 1)")
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--overflow-index", "-n", type=_positive("--overflow-index"),
                   help="print the step of the n-th overflow")
    g.add_argument("--steps", "-s", type=_positive("--steps", 0),
                   help="print the growth after s additions")
    fmt_flag(sp)
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("accumulate", help="run the consecutive-addition experiment")
    sp.add_argument("--operand-bits", "-B", type=_positive("--operand-bits"), required=True)
    sp.add_argument("--steps", "-s", type=_positive("--steps"), required=True)
    fmt_flag(sp)
    sp.set_defaults(func=cmd_accumulate)

    sp = sub.add_parser("analyze", help="assign fixed-point formats to a dataflow graph")
    sp.add_argument("path")
    fmt_flag(sp)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("chains", help="list the chains of consecutive additions")
    sp.add_argument("path")
    fmt_flag(sp)
    sp.set_defaults(func=cmd_chains)

    sp = sub.add_parser("simulate", help="bit-accurate simulation against the exact reference")
    sp.add_argument("path")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--inputs", help="CSV or JSON file of input vectors")
    src.add_argument("--random", type=_positive("--random"), metavar="TRIALS",
                     help=f"number of seeded random vectors ({simulator.GENERATOR})")
    src.add_argument("--exhaustive", action="store_true", help="every input combination")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--check-bounds", action="store_true",
                    help="exit 1 if any deviation exceeds its error bound")
    sp.add_argument("--discard-residual", action="store_true",
                    help="drop rescaled-out bits inside chains instead of forwarding them")
    fmt_flag(sp)
    sp.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "simulate" and args.seed != 0 and args.random is None:
        parser.error("--seed only applies to --random")
    try:
        return args.func(args)
    except _Usage as exc:
        _err(str(exc))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
