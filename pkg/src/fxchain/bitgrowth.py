"""Bit growth of a chain of consecutive additions.

A chain adds ``steps + 1`` operands whose highest data bit sits at position
``N`` (little-endian, 0-indexed), so each operand is at most
``M = 2**(N + 1) - 1``.  Step ``s = 1`` is the first addition; step 0 means
nothing has been added yet.

Everything here is exact integer arithmetic.  The closed forms
(:func:`overflow_step`, :func:`steps_between_overflows`) are kept literal and
are cross-checked against the brute-force worst case in
:func:`oracle_bit_length`, which is the canonical answer.
"""

from __future__ import annotations

from dataclasses import dataclass


def _check_width(N: int) -> None:
    if not isinstance(N, int) or N < 0:
        raise ValueError(f"operand bit position N must be a non-negative integer, got {N!r}")


def _check_index(name: str, k: int) -> None:
    if not isinstance(k, int) or k < 1:
        raise ValueError(f"{name} must be an integer >= 1, got {k!r}")


def max_operand(N: int) -> int:
    _check_width(N)
    return (1 << (N + 1)) - 1


def worst_case_result(N: int, k: int) -> int:
    """Accumulator value ``2**0 + ... + 2**(N+k-1)`` right at the k-th overflow."""
    _check_width(N)
    _check_index("k", k)
    return (1 << (N + k)) - 1


def steps_between_overflows(N: int, k: int) -> int:
    """Closed-form gap between overflow ``k`` and ``k + 1``: floor(2^(N+k) / M)."""
    _check_width(N)
    _check_index("k", k)
    return (1 << (N + k)) // max_operand(N)


def overflow_step(N: int, n: int) -> int:
    """Closed-form step index of the n-th overflow: floor(2^(N+n) / M).

    Agrees with the brute-force oracle for every ``N >= 1``.  For ``N = 0``
    it returns ``2**n`` while the oracle overflows one step earlier.
    """
    _check_width(N)
    _check_index("n", n)
    return (1 << (N + n)) // max_operand(N)


def oracle_bit_length(N: int, s: int) -> int:
    """Bit length of ``(s + 1) * M``, the worst-case sum after ``s`` additions."""
    _check_width(N)
    if not isinstance(s, int) or s < 0:
        raise ValueError(f"step index must be a non-negative integer, got {s!r}")
    return ((s + 1) * max_operand(N)).bit_length()


def growth_at_step(N: int, s: int) -> int:
    """Number of extra bits (overflows) accumulated by step ``s``."""
    return oracle_bit_length(N, s) - (N + 1)


def oracle_overflow_step(N: int, n: int) -> int:
    """First step whose worst-case sum needs ``N + 1 + n`` bits.

    That is the least ``s`` with ``(s + 1) * M >= 2**(N + n)``.
    """
    _check_width(N)
    _check_index("n", n)
    return -(-(1 << (N + n)) // max_operand(N)) - 1


@dataclass(frozen=True)
class GrowthProfile:
    N: int
    steps: int
    overflow_positions: tuple[int, ...]
    bit_lengths: tuple[int, ...]

    @property
    def ks(self) -> tuple[int, ...]:
        return tuple(range(1, len(self.overflow_positions) + 1))

    def rows(self) -> list[tuple[int, int, int]]:
        """(position, k, bit length) triples."""
        return list(zip(self.overflow_positions, self.ks, self.bit_lengths))


def profile(N: int, steps: int) -> GrowthProfile:
    """All overflow positions within ``steps`` additions.

    Each step adds at most one bit (the running sum never more than doubles),
    so the positions are exactly the oracle overflow steps for n = 1, 2, ...
    """
    _check_width(N)
    _check_index("steps", steps)
    positions = []
    n = 1
    while True:
        s = oracle_overflow_step(N, n)
        if s > steps:
            break
        positions.append(s)
        n += 1
    bit_lengths = tuple(N + 1 + k for k in range(1, len(positions) + 1))
    return GrowthProfile(N, steps, tuple(positions), bit_lengths)
