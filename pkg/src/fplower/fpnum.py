"""IEEE binary float formats, exact rational rounding, and float ordinals.

Everything here is pure integer/Fraction arithmetic so it can serve as an
independent cross-check for the MPFR-based evaluator.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from fractions import Fraction


@dataclass(frozen=True)
class FloatFormat:
    name: str
    precision: int  # significand bits, hidden bit included
    emax: int       # largest unbiased exponent of a normal
    emin: int       # smallest unbiased exponent of a normal
    width: int      # storage bits


BINARY64 = FloatFormat("binary64", 53, 1023, -1022, 64)
BINARY32 = FloatFormat("binary32", 24, 127, -126, 32)


def max_finite(fmt: FloatFormat) -> Fraction:
    return Fraction((2**fmt.precision - 1) * 2 ** (fmt.emax - fmt.precision + 1))


def min_subnormal(fmt: FloatFormat) -> Fraction:
    return Fraction(1, 2 ** (fmt.precision - 1 - fmt.emin))


def _round_half_even(num: int, den: int) -> int:
    """Nearest integer to num/den (num, den > 0), ties to even."""
    q, r = divmod(num, den)
    if 2 * r > den or (2 * r == den and q % 2 == 1):
        q += 1
    return q


def round_to_format(value: Fraction, fmt: FloatFormat) -> float | None:
    """Round an exact rational to fmt with round-to-nearest-even.

    Returns the value as a Python float (exact, since every binary32/binary64
    value is a double), or None when the result overflows to infinity.
    """
    if value == 0:
        return 0.0
    sign = -1 if value < 0 else 1
    v = -value if value < 0 else value

    # e such that 2^e <= v < 2^(e+1)
    e = v.numerator.bit_length() - v.denominator.bit_length()
    if v >= Fraction(2) ** (e + 1):
        e += 1
    elif v < Fraction(2) ** e:
        e -= 1

    # Quantum exponent; clamped so subnormals round on the subnormal grid.
    q = max(e - fmt.precision + 1, fmt.emin - fmt.precision + 1)
    scaled = v * Fraction(2) ** (-q)
    m = _round_half_even(scaled.numerator, scaled.denominator)
    if m == 0:
        return sign * 0.0
    while m >= 2**fmt.precision:  # carry out of the significand
        m >>= 1
        q += 1
    # Overflow iff m * 2^q >= 2^(emax+1).
    if q >= 0:
        overflow = m << q >= 1 << (fmt.emax + 1)
    else:
        overflow = m >= 1 << (fmt.emax + 1 - q) if fmt.emax + 1 - q >= 0 else True
    if overflow:
        return None
    return sign * math.ldexp(m, q)


def is_representable(value: Fraction, fmt: FloatFormat) -> bool:
    r = round_to_format(value, fmt)
    return r is not None and Fraction(r) == value


_PACK = {64: ("<d", 1 << 63), 32: ("<f", 1 << 31)}
_UNPACK_INT = {64: "<Q", 32: "<I"}


def float_to_bits(x: float, fmt: FloatFormat) -> int:
    code, _ = _PACK[fmt.width]
    return struct.unpack(_UNPACK_INT[fmt.width], struct.pack(code, x))[0]


def bits_to_float(bits: int, fmt: FloatFormat) -> float:
    code, _ = _PACK[fmt.width]
    return struct.unpack(code, struct.pack(_UNPACK_INT[fmt.width], bits))[0]


def ordinal(x: float, fmt: FloatFormat) -> int:
    """Monotone map from finite floats to integers (sign-magnitude reflected).

    Both zeros map to 0; adjacent floats differ by 1.
    """
    if math.isnan(x) or math.isinf(x):
        raise ValueError(f"ordinal of non-finite value {x!r}")
    _, signbit = _PACK[fmt.width]
    bits = float_to_bits(x, fmt)
    if bits & signbit:
        return -(bits ^ signbit)
    return bits


def from_ordinal(i: int, fmt: FloatFormat) -> float:
    _, signbit = _PACK[fmt.width]
    if i < 0:
        return bits_to_float((-i) | signbit, fmt)
    return bits_to_float(i, fmt)


def max_ordinal(fmt: FloatFormat) -> int:
    return ordinal(float(max_finite(fmt)), fmt)
