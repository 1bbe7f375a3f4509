"""Fixed-point formats in (S/I/F) notation and exact value encoding.

A format splits a machine word into ``S`` sign (or pad) bits, ``I`` integer
bits and ``F`` fraction bits.  Raw payloads are Python ints, so values are
always exact dyadic rationals; :class:`fractions.Fraction` is used whenever a
real value has to be materialised.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational


class FormatError(ValueError):
    """Malformed notation or an invalid (S/I/F) combination."""


class RangeError(ValueError):
    """A value does not fit the requested format."""


class DoesNotFit(Exception):
    """Minimal format is wider than the machine word allows."""

    def __init__(self, fmt: "Format", word: int, deficit: int):
        super().__init__(f"{fmt} needs {deficit} more bit(s) than a {word}-bit word provides")
        self.format = fmt
        self.word = word
        self.deficit = deficit


@dataclass(frozen=True)
class Format:
    S: int
    I: int
    F: int
    signed: bool = True
    # True when parsed from the unsigned two-field "(I/F)" spelling
    two_field: bool = field(default=False, compare=False)

    def __post_init__(self):
        for name in ("S", "I", "F"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 0:
                raise FormatError(f"{name} must be a non-negative integer, got {v!r}")
        if self.width < 1:
            raise FormatError("format must be at least one bit wide")
        if self.signed and self.S < 1:
            raise FormatError("signed formats need at least one sign bit")

    @property
    def width(self) -> int:
        return self.S + self.I + self.F

    @property
    def data_bits(self) -> int:
        return self.I + self.F

    @property
    def raw_min(self) -> int:
        return -(1 << self.data_bits) if self.signed else 0

    @property
    def raw_max(self) -> int:
        return (1 << self.data_bits) - 1

    def contains_raw(self, raw: int) -> bool:
        return self.raw_min <= raw <= self.raw_max

    def minimal(self) -> "Format":
        """Same data bits with no padding (one sign bit if signed)."""
        return Format(1 if self.signed else 0, self.I, self.F, self.signed)

    def same_data(self, other: "Format") -> bool:
        return (self.I, self.F, self.signed) == (other.I, other.F, other.signed)

    def __str__(self) -> str:
        if self.two_field and self.S == 0 and not self.signed:
            return f"({self.I}/{self.F})"
        return f"({self.S}/{self.I}/{self.F})"

    def token(self) -> str:
        """Unambiguous spelling for graph files: unsigned padding gets a ``u``."""
        if self.two_field and self.S == 0 and not self.signed:
            return f"{self.I}/{self.F}"
        suffix = "u" if (not self.signed and self.S > 0) else ""
        return f"{self.S}/{self.I}/{self.F}{suffix}"


_NOTATION = re.compile(r"^\(?\s*(\d+)\s*/\s*(\d+)\s*(?:/\s*(\d+)\s*)?\)?([us])?$")


def parse_format(text: str) -> Format:
    """Parse ``(S/I/F)``, ``S/I/F``, or the unsigned ``(I/F)`` form.

    Three-field formats are signed when ``S >= 1``; a trailing ``u`` marks an
    unsigned format whose S bits are padding, a trailing ``s`` forces signed.
    """
    m = _NOTATION.match(text.strip())
    if not m:
        raise FormatError(f"bad format notation {text!r}")
    a, b, c, flag = m.groups()
    if c is None:
        if flag == "s":
            raise FormatError(f"two-field notation is unsigned: {text!r}")
        return Format(0, int(a), int(b), signed=False, two_field=True)
    S, I, F = int(a), int(b), int(c)
    if flag == "u":
        signed = False
    elif flag == "s":
        signed = True
    else:
        signed = S >= 1
    return Format(S, I, F, signed)


@dataclass(frozen=True)
class FixedValue:
    raw: int
    format: Format
    scale_exp: int = 0

    def __post_init__(self):
        if not self.format.contains_raw(self.raw):
            raise RangeError(f"raw {self.raw} outside {self.format} "
                             f"[{self.format.raw_min}, {self.format.raw_max}]")

    @property
    def value(self) -> Fraction:
        return decode(self)

    def bits(self) -> str:
        """W-bit two's-complement pattern of the raw payload."""
        w = self.format.width
        return format(self.raw & ((1 << w) - 1), f"0{w}b")


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x)
    return Fraction(str(x))


def floor_scaled(x, F: int) -> int:
    """floor(x * 2**F) computed exactly."""
    q = _as_fraction(x) * (1 << F) if F >= 0 else _as_fraction(x) / (1 << -F)
    return q.numerator // q.denominator


def encode(x, f: Format) -> FixedValue:
    """Truncate ``x`` (toward negative infinity) onto the grid of ``f``."""
    raw = floor_scaled(x, f.F)
    if not f.contains_raw(raw):
        raise RangeError(f"{x} does not fit {f}: raw {raw} outside "
                         f"[{f.raw_min}, {f.raw_max}]")
    return FixedValue(raw, f)


def decode(v: FixedValue) -> Fraction:
    e = v.scale_exp - v.format.F
    return Fraction(v.raw * (1 << e)) if e >= 0 else Fraction(v.raw, 1 << -e)


def promote_to_signed(f: Format) -> Format:
    """Unsigned operand prepared for signed arithmetic (one extra integer bit)."""
    if f.signed:
        return f
    return Format(1, f.I + 1, f.F, signed=True)


def add_min_format(a: Format, b: Format) -> Format:
    """Worst-case result of ``a + b``: one carry bit over the wider operand."""
    if a.signed != b.signed:
        raise FormatError("mixed signedness: promote the unsigned operand first")
    return Format(1 if a.signed else 0, max(a.I, b.I) + 1, max(a.F, b.F), a.signed)


def mul_min_format(a: Format, b: Format) -> Format:
    signed = a.signed or b.signed
    return Format(1 if signed else 0, a.I + b.I, a.F + b.F, signed)


def fit_to_word(minimal: Format, W: int) -> Format:
    """Pad ``minimal`` with sign (or zero) bits up to exactly ``W`` bits.

    Raises :class:`DoesNotFit` carrying the number of missing bits.
    """
    if W < 1:
        raise ValueError("word length must be positive")
    s_min = 1 if minimal.signed else 0
    need = minimal.data_bits + s_min
    if need > W:
        raise DoesNotFit(minimal, W, need - W)
    return Format(W - minimal.data_bits, minimal.I, minimal.F, minimal.signed)


def truncation_error(F: int, j: int) -> Fraction:
    """Worst-case loss from dropping the ``j`` lowest of ``F`` fraction bits."""
    return Fraction((1 << j) - 1, 1 << F) if F >= 0 else Fraction(((1 << j) - 1) << -F)


def truncate_lsbs(f: Format, j: int) -> tuple[Format, Fraction]:
    if j < 0:
        raise ValueError("cannot truncate a negative number of bits")
    if j > f.F:
        raise FormatError(f"cannot drop {j} bits from {f}: only {f.F} fraction bits")
    if j == 0:
        return f, Fraction(0)
    return Format(f.S, f.I, f.F - j, f.signed), truncation_error(f.F, j)


def truncate_raw(raw: int, j: int) -> int:
    """Arithmetic right shift (floor) by ``j`` bits."""
    return raw >> j
