"""Exact dyadic rationals: numerator * 2^(-log2_denominator).

The oracle and polymer paths sum weights of the form 2^(-N) and their
products, which stay dyadic forever; big-integer numerators keep every
identity exact.  Canonical form has an odd numerator (or zero with a zero
exponent), so equality is structural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction


@dataclass(frozen=True, order=False)
class DyadicWeight:
    numerator: int
    log2_denominator: int

    def __post_init__(self):
        num, k = self.numerator, self.log2_denominator
        if num < 0 or k < 0:
            raise ValueError("DyadicWeight components must be non-negative")
        if num == 0:
            k = 0
        else:
            while num & 1 == 0 and k > 0:
                num >>= 1
                k -= 1
        object.__setattr__(self, "numerator", num)
        object.__setattr__(self, "log2_denominator", k)

    # -- constructors ----------------------------------------------------------

    @staticmethod
    def zero() -> "DyadicWeight":
        return DyadicWeight(0, 0)

    @staticmethod
    def one() -> "DyadicWeight":
        return DyadicWeight(1, 0)

    @staticmethod
    def pow2(exponent: int) -> "DyadicWeight":
        """2^exponent for any integer exponent (negative gives 1/2^|e|)."""
        if exponent >= 0:
            return DyadicWeight(1 << exponent, 0)
        return DyadicWeight(1, -exponent)

    # -- arithmetic -------------------------------------------------------------

    def __add__(self, other: "DyadicWeight") -> "DyadicWeight":
        k = max(self.log2_denominator, other.log2_denominator)
        num = (self.numerator << (k - self.log2_denominator)) + (
            other.numerator << (k - other.log2_denominator)
        )
        return DyadicWeight(num, k)

    def __mul__(self, other: "DyadicWeight") -> "DyadicWeight":
        return DyadicWeight(
            self.numerator * other.numerator,
            self.log2_denominator + other.log2_denominator,
        )

    def __sub__(self, other: "DyadicWeight") -> "DyadicWeight":
        k = max(self.log2_denominator, other.log2_denominator)
        num = (self.numerator << (k - self.log2_denominator)) - (
            other.numerator << (k - other.log2_denominator)
        )
        if num < 0:
            raise ValueError("DyadicWeight subtraction went negative")
        return DyadicWeight(num, k)

    def _cmp_key(self, other: "DyadicWeight") -> tuple[int, int]:
        k = max(self.log2_denominator, other.log2_denominator)
        return (
            self.numerator << (k - self.log2_denominator),
            other.numerator << (k - other.log2_denominator),
        )

    def __le__(self, other: "DyadicWeight") -> bool:
        a, b = self._cmp_key(other)
        return a <= b

    def __lt__(self, other: "DyadicWeight") -> bool:
        a, b = self._cmp_key(other)
        return a < b

    # -- conversions ------------------------------------------------------------

    def as_fraction(self) -> Fraction:
        return Fraction(self.numerator, 1 << self.log2_denominator)

    def __float__(self) -> float:
        if self.numerator == 0:
            return 0.0
        nbits = self.numerator.bit_length()
        if nbits <= 64 and self.log2_denominator <= 1000:
            return self.numerator * 2.0**-self.log2_denominator
        # round the numerator to 64 bits, then scale in log space
        shift = nbits - 64
        return float(self.numerator >> shift) * 2.0 ** (shift - self.log2_denominator)

    def log2(self) -> float:
        """log2 of the value; -inf for zero."""
        if self.numerator == 0:
            return float("-inf")
        nbits = self.numerator.bit_length()
        top = self.numerator if nbits <= 64 else self.numerator >> (nbits - 64)
        return math.log2(top) + max(nbits - 64, 0) - self.log2_denominator

    def __repr__(self) -> str:
        return f"DyadicWeight({self.numerator}, 2^-{self.log2_denominator})"


def dyadic_sum(items) -> DyadicWeight:
    total = DyadicWeight.zero()
    for it in items:
        total = total + it
    return total
