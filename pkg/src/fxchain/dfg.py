"""Dataflow graphs: the text format, ordering, and addition-chain allocation."""

from __future__ import annotations

import heapq
import re
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import bitgrowth
from .fxformat import (Format, FormatError, add_min_format, floor_scaled,
                       mul_min_format, parse_format, promote_to_signed)

KINDS = ("input", "const", "add", "sub", "mul", "output")
BINARY = ("add", "sub", "mul")
ADDITIVE = ("add", "sub")

_ID = re.compile(r"^[A-Za-z_][A-Za-z0-9_.]*$")


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.message = message
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class CycleError(ValueError):
    pass


@dataclass(frozen=True)
class Node:
    id: str
    kind: str
    operands: tuple[str, ...] = ()
    declared_format: Format | None = None
    const_value: Fraction | None = None
    line: int | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown node kind {self.kind!r}")
        expected = 2 if self.kind in BINARY else 1 if self.kind == "output" else 0
        if len(self.operands) != expected:
            raise ValueError(f"{self.kind} node {self.id!r} takes {expected} operand(s)")
        if self.kind in ("input", "const") and self.declared_format is None:
            raise ValueError(f"{self.kind} node {self.id!r} needs a declared format")


@dataclass
class DataFlowGraph:
    nodes: dict[str, Node]
    word_length: int
    name: str = "graph"
    warnings: list[str] = field(default_factory=list)

    def __getitem__(self, node_id: str) -> Node:
        return self.nodes[node_id]

    def __iter__(self):
        return iter(self.nodes.values())

    def __len__(self):
        return len(self.nodes)

    @property
    def inputs(self) -> list[Node]:
        return [n for n in self if n.kind == "input"]

    @property
    def outputs(self) -> list[Node]:
        return [n for n in self if n.kind == "output"]

    def fanout(self) -> Counter:
        """Number of operand references to each node (outputs included)."""
        refs = Counter()
        for n in self:
            refs.update(n.operands)
        return refs

    def position(self, node_id: str) -> int:
        return list(self.nodes).index(node_id)


def _parse_value(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"bad numeric literal {text!r}") from None


def parse(text: str, name: str = "graph") -> DataFlowGraph:
    word = None
    nodes: dict[str, Node] = {}
    first_use: dict[str, int] = {}

    def define(node: Node, lineno: int):
        if not _ID.match(node.id):
            raise ParseError(f"bad identifier {node.id!r}", lineno)
        if node.id in nodes:
            raise ParseError(f"duplicate id {node.id!r} (first defined on line "
                             f"{nodes[node.id].line})", lineno)
        nodes[node.id] = node
        for op in node.operands:
            first_use.setdefault(op, lineno)

    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        head = tok[0]
        if word is None and head != "word":
            raise ParseError("missing word directive (must be the first line)", lineno)
        try:
            if head == "word":
                if word is not None:
                    raise ParseError("duplicate word directive", lineno)
                if len(tok) != 2 or not tok[1].isdigit() or int(tok[1]) < 1:
                    raise ParseError("expected: word <positive integer>", lineno)
                word = int(tok[1])
            elif head == "input":
                if len(tok) != 3:
                    raise ParseError("expected: input <id> <S>/<I>/<F>", lineno)
                define(Node(tok[1], "input", (), parse_format(tok[2]), line=lineno), lineno)
            elif head == "const":
                if len(tok) != 4:
                    raise ParseError("expected: const <id> <value> <S>/<I>/<F>", lineno)
                fmt = parse_format(tok[3])
                value = _parse_value(tok[2])
                raw = floor_scaled(value, fmt.F)
                if Fraction(raw, 1 << fmt.F) != value or not fmt.contains_raw(raw):
                    raise ParseError(f"constant {tok[2]} is not representable in {fmt}", lineno)
                define(Node(tok[1], "const", (), fmt, value, line=lineno), lineno)
            elif head == "node":
                if len(tok) != 6 or tok[2] != "=":
                    raise ParseError("expected: node <id> = <add|sub|mul> <id> <id>", lineno)
                if tok[3] not in BINARY:
                    raise ParseError(f"unknown operation {tok[3]!r}", lineno)
                define(Node(tok[1], tok[3], (tok[4], tok[5]), line=lineno), lineno)
            elif head == "output":
                if len(tok) != 3:
                    raise ParseError("expected: output <id> <node-id>", lineno)
                define(Node(tok[1], "output", (tok[2],), line=lineno), lineno)
            else:
                raise ParseError(f"unknown directive {head!r}", lineno)
        except (FormatError, ValueError) as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(str(exc), lineno) from None

    if word is None:
        raise ParseError("missing word directive")
    for ref, lineno in sorted(first_use.items(), key=lambda kv: kv[1]):
        if ref not in nodes:
            raise ParseError(f'unknown node reference "{ref}"', lineno)
    for n in nodes.values():
        if n.kind == "output" and nodes[n.operands[0]].kind == "output":
            raise ParseError(f"output {n.id!r} cannot read another output", n.line)
    g = DataFlowGraph(nodes, word, name)
    if not g.outputs:
        raise ParseError("graph has no output")
    try:
        topological_order(g)
    except CycleError as exc:
        raise ParseError(str(exc), _cycle_line(g)) from None
    fan = g.fanout()
    for n in g:
        if n.kind != "output" and fan[n.id] == 0:
            g.warnings.append(f"line {n.line}: node {n.id!r} is never used")
    return g


def _cycle_line(g: DataFlowGraph) -> int | None:
    placed = {n.id for n in _kahn(g)}
    stuck = [n.line for n in g if n.id not in placed and n.line is not None]
    return min(stuck) if stuck else None


def load(path) -> DataFlowGraph:
    path = Path(path)
    return parse(path.read_text(encoding="utf-8"), name=path.stem)


def render(g: DataFlowGraph) -> str:
    lines = [f"word {g.word_length}"]
    for n in g:
        if n.kind == "input":
            lines.append(f"input {n.id} {n.declared_format.token()}")
        elif n.kind == "const":
            lines.append(f"const {n.id} {_decimal(n.const_value)} {n.declared_format.token()}")
        elif n.kind == "output":
            lines.append(f"output {n.id} {n.operands[0]}")
        else:
            lines.append(f"node {n.id} = {n.kind} {n.operands[0]} {n.operands[1]}")
    return "\n".join(lines) + "\n"


def _decimal(x: Fraction) -> str:
    if x.denominator == 1:
        return str(x.numerator)
    # dyadic: the decimal expansion terminates
    den = x.denominator
    digits = den.bit_length() - 1
    scaled = abs(x.numerator) * 5 ** digits
    s = str(scaled).rjust(digits + 1, "0")
    out = f"{s[:-digits]}.{s[-digits:]}".rstrip("0")
    return ("-" if x < 0 else "") + out


def _kahn(g: DataFlowGraph) -> list[Node]:
    index = {nid: i for i, nid in enumerate(g.nodes)}
    pending = {n.id: len(set(n.operands)) for n in g}
    users: dict[str, list[str]] = {nid: [] for nid in g.nodes}
    for n in g:
        for op in set(n.operands):
            if op in users:
                users[op].append(n.id)
    heap = [index[nid] for nid, k in pending.items() if k == 0]
    heapq.heapify(heap)
    order = []
    names = list(g.nodes)
    while heap:
        nid = names[heapq.heappop(heap)]
        order.append(g[nid])
        for u in users[nid]:
            pending[u] -= 1
            if pending[u] == 0:
                heapq.heappush(heap, index[u])
    return order


def topological_order(g: DataFlowGraph) -> list[Node]:
    """Operands before users; ties broken by position in the file."""
    order = _kahn(g)
    if len(order) != len(g):
        stuck = sorted(set(g.nodes) - {n.id for n in order}, key=list(g.nodes).index)
        raise CycleError(f"cyclic definition involving {', '.join(stuck)}")
    return order


def minimal_formats(g: DataFlowGraph) -> dict[str, Format]:
    """Worst-case data formats ignoring the machine word."""
    fmt: dict[str, Format] = {}
    for n in topological_order(g):
        if n.kind in ("input", "const"):
            fmt[n.id] = n.declared_format.minimal()
        elif n.kind == "output":
            fmt[n.id] = fmt[n.operands[0]]
        elif n.kind == "mul":
            fmt[n.id] = mul_min_format(*(fmt[o] for o in n.operands))
        else:
            a, b = (fmt[o] for o in n.operands)
            if n.kind == "sub" and not a.signed and not b.signed:
                r = add_min_format(a, b)
                fmt[n.id] = Format(1, r.I, r.F, True)
            else:
                if a.signed != b.signed:
                    a, b = promote_to_signed(a), promote_to_signed(b)
                fmt[n.id] = add_min_format(a, b)
    return fmt


@dataclass
class AdditionChain:
    members: list[str]
    external_operands: list[tuple[str, ...]]
    operand_format: Format | None
    """Shared minimal format of every external operand; None if they differ."""

    @property
    def uniform(self) -> bool:
        return self.operand_format is not None

    @property
    def base_N(self) -> int | None:
        if self.operand_format is None:
            return None
        return self.operand_format.data_bits - 1

    @property
    def tail(self) -> str:
        return self.members[-1]

    def step_of(self, node_id: str) -> int:
        return self.members.index(node_id) + 1

    def overflow_steps(self) -> list[int]:
        """Chain steps at which the predicted width grows."""
        if self.base_N is None:
            return list(range(1, len(self.members) + 1))
        return list(bitgrowth.profile(self.base_N, len(self.members)).overflow_positions)


def _chainable_pair(a: Format, b: Format, kind: str) -> Format | None:
    if not a.same_data(b) or a.data_bits < 1:
        return None
    if kind == "sub" and not a.signed:
        return None
    return a


def allocate_chains(g: DataFlowGraph) -> list[AdditionChain]:
    """Partition every add/sub node into maximal chains of consecutive additions.

    A node extends the chain ending at one of its operands when that operand
    feeds nothing else and the other operand has the chain's operand format.
    If both operands qualify, the one defined earlier in the file wins.
    """
    fmt = minimal_formats(g)
    fan = g.fanout()
    pos = {nid: i for i, nid in enumerate(g.nodes)}
    chains: list[AdditionChain] = []
    chain_of: dict[str, AdditionChain] = {}

    for n in topological_order(g):
        if n.kind not in ADDITIVE:
            continue
        candidates = []
        for i, op in enumerate(n.operands):
            c = chain_of.get(op)
            if c is None or c.tail != op or not c.uniform or fan[op] != 1:
                continue
            other = n.operands[1 - i]
            if other == op:
                continue
            if _chainable_pair(c.operand_format, fmt[other], n.kind) is None:
                continue
            candidates.append((pos[op], c, other))
        if candidates:
            _, c, other = min(candidates, key=lambda t: t[0])
            c.members.append(n.id)
            c.external_operands.append((other,))
        else:
            a, b = n.operands
            shared = _chainable_pair(fmt[a], fmt[b], n.kind)
            c = AdditionChain([n.id], [(a, b)], shared)
            chains.append(c)
        chain_of[n.id] = c
    return chains
