"""Bit-accurate execution of an allocated graph and error-bound checking.

Every value is an integer payload at a known binary exponent, so the fixed
data path and the ideal reference are both exact.  Trials are vectorised with
numpy (int64 when the static magnitude analysis allows it, Python ints in an
object array otherwise).

Chain members forward the bits shifted out by a rescale to the next member.
A member's only consumer is the next member, so those bits never leave the
chain; every stored value still satisfies its W-bit format.  Pass
``carry_residual=False`` to discard them instead.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import bitgrowth
from .allocator import AllocationReport
from .dfg import ADDITIVE, DataFlowGraph, topological_order
from .fxformat import RangeError, floor_scaled

GENERATOR = "numpy PCG64"


class OverflowViolation(AssertionError):
    """A stored raw left its format: the allocation is wrong."""

    def __init__(self, node_id, raw, lo, hi, trial=0):
        super().__init__(f"node {node_id}: stored raw {raw} outside its format [{lo}, {hi}]")
        self.node_id = node_id
        self.raw = raw
        self.trial = trial
        self.inputs = None


class InputError(ValueError):
    pass


# ---------------------------------------------------------------- inputs


def input_raw_range(g: DataFlowGraph, node_id: str, symmetric: bool = True) -> tuple[int, int]:
    f = g[node_id].declared_format
    lo = f.raw_min
    if f.signed and symmetric:
        lo += 1
    return lo, f.raw_max


def quantize_inputs(g: DataFlowGraph, values: dict, symmetric: bool = True) -> dict[str, int]:
    """Map input ids to raw payloads (values truncated onto the declared grid).

    Values may be numbers (int, Fraction, decimal strings) or ``"raw:<int>"``.
    """
    names = [n.id for n in g.inputs]
    missing = [n for n in names if n not in values]
    extra = [k for k in values if k not in names]
    if missing:
        raise InputError(f"no value for input(s) {', '.join(missing)}")
    if extra:
        raise InputError(f"unknown input(s) {', '.join(extra)}")
    out = {}
    for name in names:
        v = values[name]
        f = g[name].declared_format
        if isinstance(v, str) and v.strip().startswith("raw:"):
            try:
                raw = int(v.strip()[4:])
            except ValueError:
                raise InputError(f"{name}: bad raw literal {v!r}") from None
        else:
            try:
                raw = floor_scaled(Fraction(v) if not isinstance(v, float) else Fraction(v), f.F)
            except (ValueError, ZeroDivisionError):
                raise InputError(f"{name}: bad value {v!r}") from None
        lo, hi = input_raw_range(g, name, symmetric)
        if not lo <= raw <= hi:
            raise InputError(f"{name}: raw {raw} outside the input range [{lo}, {hi}] of {f}")
        out[name] = raw
    return out


def load_inputs(path, g: DataFlowGraph, symmetric: bool = True) -> list[dict[str, int]]:
    """Read input vectors from CSV (header of input ids) or JSON."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: {exc}") from None
        rows = data if isinstance(data, list) else [data]
        if not all(isinstance(r, dict) for r in rows):
            raise InputError(f"{path}: expected an object or a list of objects")
    else:
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames is None:
            raise InputError(f"{path}: empty input file")
        rows = []
        for r in reader:
            if None in r or any(v is None for v in r.values()):
                raise InputError(f"{path}:{reader.line_num}: wrong number of fields")
            rows.append({k.strip(): v.strip() for k, v in r.items()})
    return [quantize_inputs(g, {k: (str(v) if isinstance(v, (int, float)) else v)
                                for k, v in row.items()}, symmetric)
            for row in rows]


# ---------------------------------------------------------------- reference


def _real(raw: int, exp: int) -> Fraction:
    return Fraction(raw << exp) if exp >= 0 else Fraction(raw, 1 << -exp)


def run_reference(g: DataFlowGraph, inputs: dict[str, int]) -> dict[str, Fraction]:
    """Exact rational value of every node from (already quantized) raw inputs."""
    val: dict[str, Fraction] = {}
    for n in topological_order(g):
        if n.kind == "input":
            val[n.id] = _real(inputs[n.id], -n.declared_format.F)
        elif n.kind == "const":
            val[n.id] = Fraction(n.const_value)
        elif n.kind == "output":
            val[n.id] = val[n.operands[0]]
        else:
            a, b = (val[o] for o in n.operands)
            val[n.id] = a + b if n.kind == "add" else a - b if n.kind == "sub" else a * b
    return val


# ---------------------------------------------------------------- execution plan


@dataclass
class _Step:
    node_id: str
    kind: str
    ops: tuple[int, ...] = ()
    lsb: int = 0          # exponent of the stored raw
    lo: int = 0
    hi: int = 0
    exact_lsb: int = 0    # exponent of the exact pre-truncation value
    ref_lsb: int = 0
    ref_msb: int = 0
    const_raw: int = 0
    chain_head: bool = False
    chain_prev: int | None = None   # operand position of the previous member
    residual: bool = False
    scale: int = 0
    bound: Fraction = Fraction(0)


@dataclass
class _Plan:
    steps: list[_Step]
    index: dict[str, int]
    inputs: list[str]
    dtype: object


def _plan(g: DataFlowGraph, r: AllocationReport, carry_residual: bool) -> _Plan:
    order = topological_order(g)
    index = {n.id: i for i, n in enumerate(order)}
    residual_chain = {}
    if carry_residual:
        for c in r.chains:
            if c.mode == "predicted":
                for m in c.members:
                    residual_chain[m] = c
    steps: list[_Step] = []
    widest = 0
    for n in order:
        a = r[n.id]
        st = _Step(n.id, n.kind, tuple(index[o] for o in n.operands), a.lsb,
                   a.format.raw_min, a.format.raw_max, a.lsb, a.lsb, a.msb,
                   scale=a.scale_exp, bound=a.error_bound)
        if n.kind == "const":
            st.const_raw = n.const_value.numerator * (1 << n.declared_format.F) // n.const_value.denominator
        elif n.kind in ("add", "sub", "mul"):
            sa, sb = (steps[i] for i in st.ops)
            if n.kind == "mul":
                st.exact_lsb = sa.lsb + sb.lsb
                st.ref_lsb = sa.ref_lsb + sb.ref_lsb
                st.ref_msb = sa.ref_msb + sb.ref_msb
            else:
                st.exact_lsb = min(sa.lsb, sb.lsb)
                st.ref_lsb = min(sa.ref_lsb, sb.ref_lsb)
                st.ref_msb = max(sa.ref_msb, sb.ref_msb) + 1
            c = residual_chain.get(n.id)
            if c is not None:
                st.residual = True
                pos = c.members.index(n.id)
                if pos == 0:
                    st.chain_head = True
                    st.exact_lsb = min(sa.lsb, sb.lsb)
                else:
                    prev = c.members[pos - 1]
                    st.chain_prev = n.operands.index(prev)
                    ext = steps[st.ops[1 - st.chain_prev]]
                    st.exact_lsb = ext.lsb
        elif n.kind == "output":
            src = steps[st.ops[0]]
            st.ref_lsb, st.ref_msb, st.exact_lsb = src.ref_lsb, src.ref_msb, src.exact_lsb
        top = max(st.ref_msb, a.msb) + 2
        bottom = min(st.ref_lsb, st.exact_lsb, st.lsb, a.scale_exp - _bound_bits(st.bound))
        widest = max(widest, top - bottom)
        steps.append(st)
    dtype = np.int64 if widest <= 60 else object
    return _Plan(steps, index, [n.id for n in g.inputs], dtype)


def _bound_bits(x: Fraction) -> int:
    return x.denominator.bit_length() - 1


def _shl(x, k: int):
    return x << k if k > 0 else x


def _execute(plan: _Plan, raw_inputs: dict[str, np.ndarray]):
    """Stored raws and exact references (integers at their exponents)."""
    steps = plan.steps
    stored: list = [None] * len(steps)
    ref: list = [None] * len(steps)
    acc: list = [None] * len(steps)  # chain accumulators at exact_lsb
    n_trials = len(next(iter(raw_inputs.values()))) if raw_inputs else 1
    for i, st in enumerate(steps):
        if st.kind == "input":
            stored[i] = ref[i] = raw_inputs[st.node_id]
        elif st.kind == "const":
            stored[i] = ref[i] = np.full(n_trials, st.const_raw, dtype=plan.dtype)
        elif st.kind == "output":
            stored[i], ref[i] = stored[st.ops[0]], ref[st.ops[0]]
        else:
            ia, ib = st.ops
            sa, sb = steps[ia], steps[ib]
            ra, rb = ref[ia], ref[ib]
            if st.kind == "mul":
                ref[i] = ra * rb
                exact = stored[ia] * stored[ib]
            else:
                ka, kb = sa.ref_lsb - st.ref_lsb, sb.ref_lsb - st.ref_lsb
                ref[i] = _shl(ra, ka) + _shl(rb, kb) if st.kind == "add" else _shl(ra, ka) - _shl(rb, kb)
                if st.residual and not st.chain_head:
                    p = st.chain_prev
                    prev, ext = acc[st.ops[p]], stored[st.ops[1 - p]]
                    if st.kind == "add":
                        exact = prev + ext
                    else:
                        exact = prev - ext if p == 0 else ext - prev
                else:
                    xa = _shl(stored[ia], sa.lsb - st.exact_lsb)
                    xb = _shl(stored[ib], sb.lsb - st.exact_lsb)
                    exact = xa + xb if st.kind == "add" else xa - xb
            if st.residual:
                acc[i] = exact
            stored[i] = exact >> (st.lsb - st.exact_lsb) if st.lsb > st.exact_lsb else exact
        s = stored[i]
        bad = (s < st.lo) | (s > st.hi)
        if bad.any():
            k = int(np.flatnonzero(bad)[0])
            raise OverflowViolation(st.node_id, int(s[k]), st.lo, st.hi, k)
    return stored, ref


# ---------------------------------------------------------------- results


@dataclass(frozen=True)
class NodeResult:
    raw: int
    stored: Fraction       # raw * 2**(scale_exp - F)
    reference: Fraction    # exact ideal value
    deviation: Fraction    # |stored - reference| / 2**scale_exp


@dataclass
class SimulationResult:
    nodes: dict[str, NodeResult]

    def __getitem__(self, node_id: str) -> NodeResult:
        return self.nodes[node_id]

    def __iter__(self):
        return iter(self.nodes.items())


def run_fixed(g: DataFlowGraph, alloc: AllocationReport, inputs: dict[str, int],
              carry_residual: bool = True) -> SimulationResult:
    """Execute one input vector (raw payloads, see :func:`quantize_inputs`)."""
    plan = _plan(g, alloc, carry_residual)
    arrays = {k: np.array([inputs[k]], dtype=object) for k in plan.inputs}
    plan.dtype = object
    try:
        stored, _ = _execute(plan, arrays)
    except OverflowViolation as exc:
        exc.inputs = dict(inputs)
        raise
    reference = run_reference(g, inputs)
    out = {}
    for st, s in zip(plan.steps, stored):
        raw = int(s[0])
        value = _real(raw, st.lsb)
        dev = abs(value - reference[st.node_id]) / Fraction(2) ** st.scale
        out[st.node_id] = NodeResult(raw, value, reference[st.node_id], dev)
    return SimulationResult(out)


@dataclass(frozen=True)
class Counterexample:
    node_id: str
    inputs: dict[str, int]
    deviation: Fraction
    bound: Fraction

    def __str__(self):
        vec = ", ".join(f"{k}=raw:{v}" for k, v in self.inputs.items())
        return (f"node {self.node_id}: deviation {self.deviation} exceeds bound "
                f"{self.bound} for inputs {vec}")


@dataclass
class Verdict:
    trials: int
    source: str
    max_deviation: dict[str, Fraction]
    bounds: dict[str, Fraction]
    counterexamples: list[Counterexample] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.counterexamples

    def tightness(self, node_id: str) -> Fraction | None:
        """Largest observed deviation as a fraction of the bound."""
        b = self.bounds[node_id]
        return None if b == 0 else self.max_deviation[node_id] / b


def _random_batches(g, plan, trials, seed, symmetric, batch):
    rng = np.random.Generator(np.random.PCG64(seed))
    ranges = [input_raw_range(g, name, symmetric) for name in plan.inputs]
    for start in range(0, trials, batch):
        size = min(batch, trials - start)
        yield {name: rng.integers(lo, hi, endpoint=True, size=size).astype(plan.dtype)
               for name, (lo, hi) in zip(plan.inputs, ranges)}


def _exhaustive_batches(g, plan, symmetric, batch):
    ranges = [input_raw_range(g, name, symmetric) for name in plan.inputs]
    sizes = [hi - lo + 1 for lo, hi in ranges]
    total = math.prod(sizes)
    for start in range(0, total, batch):
        idx = np.arange(start, min(start + batch, total), dtype=np.int64)
        cols = {}
        for name, (lo, _), size in zip(plan.inputs, ranges, sizes):
            cols[name] = (idx % size + lo).astype(plan.dtype)
            idx = idx // size
        yield cols


def count_exhaustive(g: DataFlowGraph, symmetric: bool = True) -> int:
    sizes = [hi - lo + 1 for lo, hi in (input_raw_range(g, n.id, symmetric) for n in g.inputs)]
    return math.prod(sizes)


def verify_bounds(g: DataFlowGraph, alloc: AllocationReport, trials: int | None = None,
                  seed: int = 0, *, exhaustive: bool = False, vectors: list[dict] | None = None,
                  carry_residual: bool = True, batch: int = 1 << 20) -> Verdict:
    """Check every node's deviation against its error bound.

    Inputs come from ``vectors`` (raw payloads), from every combination of
    input codes (``exhaustive``), or from ``trials`` seeded random draws,
    uniform over each input's raw range.
    """
    plan = _plan(g, alloc, carry_residual)
    symmetric = alloc.symmetric_inputs
    if vectors is not None:
        source = f"{len(vectors)} supplied vector(s)"
        batches = [{k: np.array([v[k] for v in vectors], dtype=plan.dtype) for k in plan.inputs}]
    elif exhaustive:
        source = f"exhaustive ({count_exhaustive(g, symmetric)} vectors)"
        batches = _exhaustive_batches(g, plan, symmetric, batch)
    else:
        if trials is None or trials < 1:
            raise ValueError("trials must be >= 1")
        source = f"{trials} random vectors, {GENERATOR} seed {seed}"
        batches = _random_batches(g, plan, trials, seed, symmetric, batch)

    max_dev = {st.node_id: 0 for st in plan.steps}
    common = {}
    for st in plan.steps:
        c = min(st.lsb, st.ref_lsb, st.scale - _bound_bits(st.bound))
        bound_int = st.bound * Fraction(2) ** (st.scale - c)
        common[st.node_id] = (c, math.floor(bound_int))
    found: dict[str, Counterexample] = {}
    count = 0
    for cols in batches:
        n = len(next(iter(cols.values()))) if cols else 1
        try:
            stored, ref = _execute(plan, cols)
        except OverflowViolation as exc:
            exc.inputs = {k: int(v[exc.trial]) for k, v in cols.items()}
            raise
        count += n
        for i, st in enumerate(plan.steps):
            c, bound_int = common[st.node_id]
            dev = np.abs(_shl(stored[i], st.lsb - c) - _shl(ref[i], st.ref_lsb - c))
            m = int(dev.max())
            if m > max_dev[st.node_id]:
                max_dev[st.node_id] = m
            if m > bound_int and st.node_id not in found:
                k = int(np.argmax(dev))
                found[st.node_id] = Counterexample(
                    st.node_id, {name: int(v[k]) for name, v in cols.items()},
                    Fraction(m) * Fraction(2) ** (c - st.scale), st.bound)
    devs = {st.node_id: Fraction(max_dev[st.node_id]) * Fraction(2) ** (common[st.node_id][0] - st.scale)
            for st in plan.steps}
    return Verdict(count, source, devs, {st.node_id: st.bound for st in plan.steps},
                   [found[st.node_id] for st in plan.steps if st.node_id in found])


# ---------------------------------------------------------------- accumulation harness


def accumulate_harness(N: int, steps: int) -> bitgrowth.GrowthProfile:
    """Literally add the all-ones operand ``steps`` times, noting each carry-out."""
    M = bitgrowth.max_operand(N)
    if steps < 1:
        raise ValueError("steps must be >= 1")
    acc = M
    width = acc.bit_length()
    positions, lengths = [], []
    for s in range(1, steps + 1):
        acc += M
        if acc.bit_length() > width:
            width = acc.bit_length()
            positions.append(s)
            lengths.append(width)
    return bitgrowth.GrowthProfile(N, steps, tuple(positions), tuple(lengths))
