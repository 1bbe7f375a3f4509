"""Chain-aware fixed-point format allocation for dataflow graphs."""

from .allocator import AllocationReport, InfeasibleAllocation, NodeAllocation, assign_formats
from .bitgrowth import (GrowthProfile, growth_at_step, oracle_bit_length, overflow_step,
                        profile, steps_between_overflows, worst_case_result)
from .dfg import AdditionChain, DataFlowGraph, ParseError, allocate_chains, parse, topological_order
from .fxformat import FixedValue, Format, decode, encode, parse_format

__version__ = "0.1.0"
