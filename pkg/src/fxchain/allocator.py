"""Format assignment for every node of a dataflow graph.

Additions that belong to a uniform chain are sized with the exact chain
growth prediction (:mod:`fxchain.bitgrowth`); the width grows only at the
predicted overflow steps.  Growth widens the integer part while the word has
room and switches to a one-bit right shift (a rescale, tracked by
``scale_exp``) once it is full.  Everything else gets the per-operation worst
case.

Bookkeeping uses two exponents per value: ``msb`` (the stored magnitude is
below ``2**msb``) and ``lsb`` (the weight of the last stored bit).  For a node
with format (S/I/F) and scale exponent s, ``msb = I + s`` and ``lsb = s - F``.

Error bounds are exact :class:`~fractions.Fraction` values in stored units,
i.e. ``|raw * 2**-F - ideal / 2**scale_exp|``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from . import bitgrowth
from .dfg import ADDITIVE, AdditionChain, DataFlowGraph, allocate_chains, topological_order
from .fxformat import Format, truncation_error


class InfeasibleAllocation(Exception):
    def __init__(self, node_id: str, message: str):
        super().__init__(f"node {node_id}: {message}")
        self.node_id = node_id


GROW = "grow"
RESCALE = "rescale"
TRUNCATE = "truncate"


@dataclass(frozen=True)
class NodeAllocation:
    node_id: str
    kind: str
    format: Format
    scale_exp: int = 0
    overflow: bool = False
    error_bound: Fraction = Fraction(0)
    action: str | None = None
    truncated_bits: int = 0
    # a signed value that can never take the most negative raw code
    symmetric: bool = True
    chain: int | None = None
    step: int | None = None

    @property
    def msb(self) -> int:
        return self.format.I + self.scale_exp

    @property
    def lsb(self) -> int:
        return self.scale_exp - self.format.F

    @property
    def notation(self) -> str:
        return str(self.format)

    def real_error(self) -> Fraction:
        return _shift(self.error_bound, self.scale_exp)


@dataclass(frozen=True)
class ChainSummary:
    index: int
    members: tuple[str, ...]
    base_N: int | None
    overflow_steps: tuple[int, ...]
    mode: str = "predicted"
    """``predicted`` for chain-aware sizing, ``fallback`` for per-step worst case."""

    def required_widths(self) -> list[int]:
        """Predicted data bits after each chain step."""
        if self.base_N is None:
            return []
        return [bitgrowth.oracle_bit_length(self.base_N, i)
                for i in range(1, len(self.members) + 1)]

    def naive_widths(self) -> list[int]:
        """Data bits if every step reserved a carry bit."""
        if self.base_N is None:
            return []
        return [self.base_N + 1 + i for i in range(1, len(self.members) + 1)]


@dataclass(frozen=True)
class AllocationReport:
    graph: str
    word: int
    nodes: tuple[NodeAllocation, ...]
    chains: tuple[ChainSummary, ...] = ()
    symmetric_inputs: bool = True
    _index: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {a.node_id: a for a in self.nodes})

    def __getitem__(self, node_id: str) -> NodeAllocation:
        return self._index[node_id]

    def __iter__(self):
        return iter(self.nodes)

    def replace_node(self, alloc: NodeAllocation) -> "AllocationReport":
        nodes = tuple(alloc if a.node_id == alloc.node_id else a for a in self.nodes)
        return AllocationReport(self.graph, self.word, nodes, self.chains, self.symmetric_inputs)


def _shift(x: Fraction, e: int) -> Fraction:
    return x * (1 << e) if e >= 0 else x / (1 << -e)


def chain_step_error(e_in: Fraction, rescale: bool, F: int) -> Fraction:
    """Error after a chain step whose operands carry ``e_in`` in total.

    A rescale halves the inherited error and adds half an LSB of fresh
    truncation; growth and no-overflow steps keep it.
    """
    if rescale:
        return e_in / 2 + Fraction(1, 1 << (F + 1))
    return e_in


def _place(node_id, msb, lsb_full, signed, preferred_scale, W):
    """Fit exact exponents [lsb_full, msb) into W bits.

    Returns (format, scale, dropped lsb count).  Dropping LSBs is allowed only
    down to integer weight; needing more is infeasible.
    """
    s_min = 1 if signed else 0
    if msb + s_min > W:
        raise InfeasibleAllocation(
            node_id, f"needs {msb} integer bit(s) but a {W}-bit word leaves {W - s_min}")
    deficit = (msb - lsb_full) + s_min - W
    j = max(deficit, 0)
    lsb = lsb_full + j
    s = min(max(preferred_scale, lsb), msb)
    fmt = Format(W - (msb - lsb), msb - s, s - lsb, signed)
    return fmt, s, j


def _input_alloc(n, W, symmetric_inputs):
    f = n.declared_format
    s_min = 1 if f.signed else 0
    if f.data_bits + s_min > W:
        raise InfeasibleAllocation(
            n.id, f"declared {f} needs {f.data_bits + s_min} bits, word is {W}")
    fitted = Format(W - f.data_bits, f.I, f.F, f.signed)
    if not f.signed:
        sym = True
    elif n.kind == "input":
        sym = symmetric_inputs
    else:
        sym = n.const_value * (1 << f.F) != f.raw_min
    return NodeAllocation(n.id, n.kind, fitted, symmetric=sym)


def _mul_alloc(n, a: NodeAllocation, b: NodeAllocation, W):
    signed = a.format.signed or b.format.signed
    # (-2^p) * (-2^q) is the only product that needs the extra bit
    corner = int(a.format.signed and b.format.signed and not a.symmetric and not b.symmetric)
    msb = a.msb + b.msb + corner
    lsb_full = a.lsb + b.lsb
    fmt, s, j = _place(n.id, msb, lsb_full, signed, a.scale_exp + b.scale_exp, W)
    ea, eb = a.real_error(), b.real_error()
    err = (Fraction(2) ** a.msb) * eb + (Fraction(2) ** b.msb + eb) * ea
    err += truncation_error(-lsb_full, j)
    return NodeAllocation(n.id, n.kind, fmt, s, False, _shift(err, -s),
                          TRUNCATE if j else None, j, symmetric=(j == 0))


def _add_alloc(n, a: NodeAllocation, b: NodeAllocation, W, chain=None, step=None):
    fa, fb = a.format, b.format
    msb_a, msb_b = a.msb, b.msb
    if fa.signed != fb.signed:
        # promoted unsigned operand gets one extra integer bit
        if not fa.signed:
            msb_a += 1
        else:
            msb_b += 1
    signed = fa.signed or fb.signed or n.kind == "sub"
    msb = max(msb_a, msb_b) + 1
    lsb_full = min(a.lsb, b.lsb)
    fmt, s, j = _place(n.id, msb, lsb_full, signed, max(a.scale_exp, b.scale_exp), W)
    err = a.real_error() + b.real_error() + truncation_error(-lsb_full, j)
    return NodeAllocation(n.id, n.kind, fmt, s, True, _shift(err, -s),
                          TRUNCATE if j else None, j,
                          symmetric=a.symmetric and b.symmetric and j == 0,
                          chain=chain, step=step)


def _external_key(a: NodeAllocation):
    return (a.msb, a.lsb, a.format.signed, a.symmetric or not a.format.signed)


def _chain_allocs(g, chain: AdditionChain, index: int, alloc: dict, W: int):
    """Allocate the members of one chain; returns (allocations, summary)."""
    externals = [alloc[o] for ops in chain.external_operands for o in ops]
    keys = {_external_key(x) for x in externals}
    uniform = chain.uniform and len(keys) == 1 and all(
        x.symmetric or not x.format.signed for x in externals)
    if not uniform:
        out = []
        for i, m in enumerate(chain.members, start=1):
            n = g[m]
            a = _add_alloc(n, alloc[n.operands[0]], alloc[n.operands[1]], W,
                           chain=index, step=i)
            alloc[m] = a
            out.append(a)
        summary = ChainSummary(index, tuple(chain.members), None,
                               tuple(range(1, len(chain.members) + 1)), "fallback")
        return out, summary

    base = externals[0]
    signed = base.format.signed
    s_min = 1 if signed else 0
    N = base.msb - base.lsb - 1
    I, F, scale = base.format.I, base.format.F, base.scale_exp
    msb, lsb = base.msb, base.lsb
    err = None
    out, overflow_steps = [], []
    for i, m in enumerate(chain.members, start=1):
        n = g[m]
        e_ext = sum((alloc[o].error_bound for o in chain.external_operands[i - 1]), Fraction(0))
        e_in = e_ext if err is None else err + e_ext
        grows = bitgrowth.growth_at_step(N, i) > bitgrowth.growth_at_step(N, i - 1)
        action = None
        if grows:
            overflow_steps.append(i)
            msb += 1
            if (msb - lsb) + s_min <= W:
                I += 1
                action = GROW
            else:
                if msb + s_min > W:
                    raise InfeasibleAllocation(
                        m, f"chain step {i} needs {msb} integer bit(s) but a {W}-bit "
                           f"word leaves {W - s_min}")
                lsb += 1
                scale += 1
                action = RESCALE
        err = chain_step_error(e_in, action == RESCALE, F)
        fmt = Format(W - I - F, I, F, signed)
        a = NodeAllocation(m, n.kind, fmt, scale, grows, err, action,
                           symmetric=(scale == base.scale_exp) or not signed,
                           chain=index, step=i)
        alloc[m] = a
        out.append(a)
    summary = ChainSummary(index, tuple(chain.members), N, tuple(overflow_steps))
    return out, summary


def assign_formats(g: DataFlowGraph, chains: list[AdditionChain] | None = None,
                   symmetric_inputs: bool = True) -> AllocationReport:
    """Assign format, scale, overflow flag and error bound to every node.

    ``symmetric_inputs`` declares that signed inputs never take their most
    negative code, which is what lets a signed product keep the plain
    sum-of-widths format.
    """
    W = g.word_length
    if chains is None:
        chains = allocate_chains(g)
    chain_of = {m: (i, c) for i, c in enumerate(chains, start=1) for m in c.members}
    alloc: dict[str, NodeAllocation] = {}
    summaries: dict[int, ChainSummary] = {}
    for n in topological_order(g):
        if n.id in alloc:
            continue
        if n.kind in ("input", "const"):
            alloc[n.id] = _input_alloc(n, W, symmetric_inputs)
        elif n.kind == "output":
            src = alloc[n.operands[0]]
            alloc[n.id] = NodeAllocation(
                n.id, "output", src.format, src.scale_exp, src.overflow, src.error_bound,
                None, 0, src.symmetric)
        elif n.kind == "mul":
            alloc[n.id] = _mul_alloc(n, alloc[n.operands[0]], alloc[n.operands[1]], W)
        elif n.kind in ADDITIVE:
            # only the next member reads a non-tail member, so every external
            # is allocated by the time the tail comes up
            index, chain = chain_of[n.id]
            if n.id == chain.tail:
                _, summaries[index] = _chain_allocs(g, chain, index, alloc, W)
    order = [alloc[n.id] for n in topological_order(g)]
    return AllocationReport(g.name, W, tuple(order),
                            tuple(summaries[i] for i in sorted(summaries)), symmetric_inputs)

