"""Rendering allocation reports as aligned text, CSV and JSON."""

from __future__ import annotations

import csv
import io
import json
from decimal import ROUND_HALF_EVEN, Decimal
from fractions import Fraction

from .allocator import AllocationReport, ChainSummary, NodeAllocation
from .fxformat import parse_format

MODES = ("text", "csv", "json")

SCHEMA = {
    "type": "object",
    "required": ["graph", "word", "nodes", "chains"],
    "properties": {
        "graph": {"type": "string"},
        "word": {"type": "integer", "minimum": 1},
        "nodes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "notation", "scale_exp", "overflow",
                             "error_terms", "error_decimal"],
                "properties": {
                    "id": {"type": "string"},
                    "notation": {"type": "string", "pattern": r"^\(\d+/\d+(/\d+)?\)$"},
                    "scale_exp": {"type": "integer"},
                    "overflow": {"type": "boolean"},
                    "error_terms": {"type": "array",
                                    "items": {"type": "string", "pattern": r"^2\^-?\d+$"}},
                    "error_decimal": {"type": "string"},
                },
            },
        },
        "chains": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["members", "base_N", "overflow_steps"],
                "properties": {
                    "members": {"type": "array", "items": {"type": "string"}},
                    "base_N": {"type": ["integer", "null"]},
                    "overflow_steps": {"type": "array", "items": {"type": "integer"}},
                },
            },
        },
    },
}


def dyadic_terms(x: Fraction) -> list[str]:
    """Powers of two summing to ``x``, largest first: 3/2**17 -> ['2^-16', '2^-17']."""
    x = Fraction(x)
    if x < 0:
        raise ValueError("error bounds are non-negative")
    den = x.denominator
    if den & (den - 1):
        raise ValueError(f"{x} is not a dyadic rational")
    e = den.bit_length() - 1
    p = x.numerator
    return [f"2^{b - e}" for b in range(p.bit_length() - 1, -1, -1) if p >> b & 1]


def parse_terms(terms: list[str]) -> Fraction:
    total = Fraction(0)
    for t in terms:
        base, _, exp = t.partition("^")
        if base != "2":
            raise ValueError(f"bad dyadic term {t!r}")
        total += Fraction(2) ** int(exp)
    return total


def decimal9(x: Fraction) -> str:
    """Display value rounded half-to-even to nine places."""
    x = Fraction(x)
    # x is dyadic: x = n / 2**e = n * 5**e / 10**e, exactly
    e = x.denominator.bit_length() - 1
    d = Decimal(x.numerator * 5 ** e).scaleb(-e)
    return format(d.quantize(Decimal("1e-9"), rounding=ROUND_HALF_EVEN), "f")


def _error_text(a: NodeAllocation) -> str:
    if a.error_bound == 0:
        return ""
    return f"error: {'+'.join(dyadic_terms(a.error_bound))} = {decimal9(a.error_bound)}"


def _node_dict(a: NodeAllocation) -> dict:
    return {
        "id": a.node_id,
        "kind": a.kind,
        "notation": a.notation,
        "signed": a.format.signed,
        "scale_exp": a.scale_exp,
        "overflow": a.overflow,
        "action": a.action,
        "truncated_bits": a.truncated_bits,
        "symmetric": a.symmetric,
        "chain": a.chain,
        "step": a.step,
        "error_terms": dyadic_terms(a.error_bound),
        "error_decimal": decimal9(a.error_bound),
    }


def _chain_dict(c: ChainSummary) -> dict:
    return {
        "index": c.index,
        "members": list(c.members),
        "base_N": c.base_N,
        "overflow_steps": list(c.overflow_steps),
        "mode": c.mode,
    }


def to_dict(r: AllocationReport) -> dict:
    return {
        "graph": r.graph,
        "word": r.word,
        "symmetric_inputs": r.symmetric_inputs,
        "nodes": [_node_dict(a) for a in r.nodes],
        "chains": [_chain_dict(c) for c in r.chains],
    }


def from_dict(d: dict) -> AllocationReport:
    nodes = []
    for n in d["nodes"]:
        f = parse_format(n["notation"])
        if f.signed != n.get("signed", f.signed):
            f = type(f)(f.S, f.I, f.F, n["signed"])
        nodes.append(NodeAllocation(
            n["id"], n.get("kind", "node"), f, n["scale_exp"], n["overflow"],
            parse_terms(n["error_terms"]), n.get("action"), n.get("truncated_bits", 0),
            n.get("symmetric", True), n.get("chain"), n.get("step")))
    chains = [ChainSummary(c.get("index", i), tuple(c["members"]), c["base_N"],
                           tuple(c["overflow_steps"]), c.get("mode", "predicted"))
              for i, c in enumerate(d["chains"], start=1)]
    return AllocationReport(d["graph"], d["word"], tuple(nodes), tuple(chains),
                            d.get("symmetric_inputs", True))


def parse_json(text: str) -> AllocationReport:
    return from_dict(json.loads(text))


def render_report(r: AllocationReport, mode: str = "text") -> str:
    if mode == "json":
        return json.dumps(to_dict(r), indent=2) + "\n"
    if mode == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "kind", "notation", "signed", "scale_exp", "overflow",
                    "error_terms", "error_decimal"])
        for a in r.nodes:
            w.writerow([a.node_id, a.kind, a.notation, int(a.format.signed), a.scale_exp,
                        int(a.overflow), "+".join(dyadic_terms(a.error_bound)),
                        decimal9(a.error_bound)])
        return buf.getvalue()
    if mode != "text":
        raise ValueError(f"unknown output mode {mode!r}")

    width = max(6, max(len(a.node_id) for a in r.nodes) + 2)
    note_col = width + 12 + max(len(_error_text(a)) for a in r.nodes) + 2
    lines = [f"# graph {r.graph}, word {r.word} bits", f"{'Node':<{width}}{'Notation':<12}Error"]
    for a in r.nodes:
        notes = []
        if a.scale_exp:
            notes.append(f"scale 2^{a.scale_exp}")
        if a.overflow and a.chain is not None:
            notes.append(f"overflow ({a.action})" if a.action else "overflow")
        if a.truncated_bits:
            notes.append(f"{a.truncated_bits} lsb truncated")
        row = f"{a.node_id:<{width}}{a.notation:<12}{_error_text(a)}"
        if notes:
            row = f"{row:<{note_col}}[{', '.join(notes)}]"
        lines.append(row.rstrip())
    for c in r.chains:
        lines.append(chain_line(c))
    return "\n".join(lines) + "\n"


def chain_line(c: ChainSummary) -> str:
    members = " ".join(c.members)
    if c.base_N is None:
        return f"chain {c.index}: {members} (heterogeneous, worst case per step)"
    steps = ", ".join(map(str, c.overflow_steps)) or "none"
    return f"chain {c.index}: {members} (N={c.base_N}), overflows at steps {steps}"
