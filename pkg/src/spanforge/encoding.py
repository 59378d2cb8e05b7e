"""Binary encodings of bounded reals and of integer indices.

Reals use the offset fixed-point form x = sum_{i=0..k} x_i 2^-i - 1, which
covers the grid from -1 to 1 - 2^-k in steps of 2^-k.  Integers in [0, n)
use little-endian binary with ceil(log2 n) bits; n = 1 needs zero bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


def index_bit_width(n: int) -> int:
    """Bits needed to address n slots; 0 when there is a single slot."""
    if n < 1:
        raise ValueError(f"need at least one slot, got {n}")
    return max(0, math.ceil(math.log2(n)))


@dataclass(frozen=True)
class IntegerCode:
    """Little-endian binary encoding of an index: c = sum bits[i] * 2^i."""

    width: int
    bits: tuple[int, ...]

    def __post_init__(self):
        if len(self.bits) != self.width:
            raise ValueError(f"expected {self.width} bits, got {len(self.bits)}")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError(f"bits must be 0/1, got {self.bits}")

    @property
    def value(self) -> int:
        return sum(b << i for i, b in enumerate(self.bits))


def encode_int(c: int, n: int) -> IntegerCode:
    width = index_bit_width(n)
    if not 0 <= c < n:
        raise ValueError(f"index {c} outside [0, {n})")
    return IntegerCode(width=width, bits=tuple((c >> i) & 1 for i in range(width)))


def decode_int(code) -> int:
    """Value of a little-endian index code; accepts the code object or raw bits."""
    if isinstance(code, IntegerCode):
        return code.value
    bits = tuple(int(b) for b in code)
    return IntegerCode(width=len(bits), bits=bits).value


@dataclass(frozen=True)
class FixedPointCode:
    """Offset fixed-point real: value = sum_{i=0..k} bits[i] * 2^-i - 1."""

    precision: int
    bits: tuple[int, ...]

    def __post_init__(self):
        if self.precision < 0:
            raise ValueError(f"precision must be >= 0, got {self.precision}")
        if len(self.bits) != self.precision + 1:
            raise ValueError(f"expected {self.precision + 1} bits, got {len(self.bits)}")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError(f"bits must be 0/1, got {self.bits}")

    @property
    def value(self) -> float:
        return sum(b * 2.0**-i for i, b in enumerate(self.bits)) - 1.0


def encode_real(x: float, k: int) -> FixedPointCode:
    """Round x to the nearest grid point, ties broken downward, then encode.

    The grid is {-1, -1 + 2^-k, ..., 1 - 2^-k}; inputs are expected in
    [-1, 1] and anything outside clamps to the nearest end of the grid.
    """
    if k < 0:
        raise ValueError(f"precision must be >= 0, got {k}")
    scaled = (x + 1.0) * 2.0**k
    level = math.ceil(scaled - 0.5)  # nearest integer, half-way cases go down
    level = min(max(level, 0), 2 ** (k + 1) - 1)
    # bits[i] carries weight 2^(k-i) in the integer level
    return FixedPointCode(precision=k, bits=tuple((level >> (k - i)) & 1 for i in range(k + 1)))


def decode_real(code) -> float:
    """Value of a fixed-point code; accepts the code object or raw bits."""
    if isinstance(code, FixedPointCode):
        return code.value
    bits = tuple(int(b) for b in code)
    return FixedPointCode(precision=len(bits) - 1, bits=bits).value


def grid_values(k: int) -> list[float]:
    """All representable values at precision k, ascending."""
    return [level * 2.0**-k - 1.0 for level in range(2 ** (k + 1))]
