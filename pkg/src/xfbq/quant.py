"""Scalar quantization into XOR-composable sign-digit codes.

A real in (-1, 1) is greedily approximated by B sign digits a_{B-1}..a_0,
each in {+1, -1}, so that the value is sum(a_i / 2^(B-i)).  Digits map to
bits through sigma(a) = (1 - a) / 2, and the product of two quantized
values can be recovered exactly from an integer built out of XORs and
shifts of the two codes.  Everything here is exact dyadic arithmetic; no
operation introduces rounding beyond the quantization step itself.

Scalar functions implement the definition one digit at a time; the
``*_values`` variants are vectorized equivalents used on whole matrices
and are verified against the scalar path in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

MAX_WIDTH = 8


def check_width(width: int) -> int:
    """Validate an encoding bit width (1..MAX_WIDTH) and return it as int."""
    w = int(width)
    if w < 1 or w > MAX_WIDTH:
        raise InvalidInputError(f"bit width must be in 1..{MAX_WIDTH}, got {width}")
    return w


def sigma(digit: int) -> int:
    """Map a sign digit {+1, -1} to its bit {0, 1}."""
    if digit == 1:
        return 0
    if digit == -1:
        return 1
    raise InvalidInputError(f"sign digit must be +1 or -1, got {digit}")


def sigma_inverse(bit: int) -> int:
    """Map a bit {0, 1} back to its sign digit {+1, -1}."""
    if bit == 0:
        return 1
    if bit == 1:
        return -1
    raise InvalidInputError(f"bit must be 0 or 1, got {bit}")


@dataclass(frozen=True, slots=True)
class ScalarCode:
    """A quantized scalar: ``width`` bits, most significant digit at bit width-1."""

    bits: int
    width: int

    def __post_init__(self):
        check_width(self.width)
        if not 0 <= self.bits < (1 << self.width):
            raise InvalidInputError(
                f"code 0b{self.bits:b} does not fit in {self.width} bits"
            )

    def digits(self) -> list[int]:
        """Sign digits, most significant first."""
        return [sigma_inverse((self.bits >> i) & 1) for i in range(self.width - 1, -1, -1)]


def quantize_scalar(x: float, width: int) -> ScalarCode:
    """Quantize a finite real to a ``width``-bit code.

    Runs the greedy digit recursion: at each step the next digit is +1
    iff the running approximation does not yet exceed x (ties resolve to
    +1).  Inputs at or beyond +-1 saturate to the all-(+1) / all-(-1)
    code; the result is always within 2^-width of any x in (-1, 1).
    """
    width = check_width(width)
    x = float(x)
    if not np.isfinite(x):
        raise InvalidInputError(f"cannot quantize non-finite value {x!r}")
    bits = 0
    approx = 0.0
    for step in range(width):
        if x - approx >= 0.0:
            digit = 1
        else:
            digit = -1
        approx += digit / float(1 << (step + 1))
        bits = (bits << 1) | sigma(digit)
    return ScalarCode(bits=bits, width=width)


def decode_scalar(code: ScalarCode) -> float:
    """Exact dyadic value of a code: sum of a_i / 2^(width-i)."""
    value = 0.0
    for pos, digit in enumerate(code.digits()):
        value += digit / float(1 << (pos + 1))
    return value


def xor_scalar_product(x: ScalarCode, y: ScalarCode) -> int:
    """Integer XOR-product of two codes: sum over bit pairs of (x_i ^ y_j) << (i+j)."""
    d = 0
    for i in range(x.width):
        xi = (x.bits >> i) & 1
        for j in range(y.width):
            d += (xi ^ ((y.bits >> j) & 1)) << (i + j)
    return d


def scalar_product_upper_bound(width_x: int, width_y: int) -> int:
    """Largest possible XOR-product for the given widths."""
    return ((1 << check_width(width_x)) - 1) * ((1 << check_width(width_y)) - 1)


def decode_scalar_product(d: int, width_x: int, width_y: int) -> float:
    """Recover the exact product of the two decoded values from an XOR-product.

    The identity is ``x*y = (hi - 2*d) / 2^(width_x + width_y)`` with
    ``hi = (2^width_x - 1)(2^width_y - 1)``; both sides are dyadic with at
    most 16 significant bits, so equality against the float product of the
    decoded operands is exact.
    """
    hi = scalar_product_upper_bound(width_x, width_y)
    if not 0 <= d <= hi:
        raise InvalidInputError(f"product code {d} outside [0, {hi}]")
    return (hi - 2 * d) / float(1 << (width_x + width_y))


# Vectorized equivalents.  The closed form below lands on the same grid as
# the digit recursion: codes decode to odd multiples of 2^-width, and the
# recursion picks the nearest one with ties resolved upward.  Multiplying
# by a power of two and flooring are both exact in binary floating point,
# so the two paths agree bit for bit.

def quantize_values(values: np.ndarray, width: int) -> np.ndarray:
    """Quantize an array of finite reals; returns uint8 codes of the same shape."""
    width = check_width(width)
    x = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("cannot quantize non-finite values")
    hi = float((1 << width) - 1)
    with np.errstate(over="ignore"):  # huge inputs saturate via the clip
        odd = 2.0 * np.floor(x * float(1 << (width - 1))) + 1.0
    np.clip(odd, -hi, hi, out=odd)
    return ((hi - odd) * 0.5).astype(np.uint8)


def decode_values(codes: np.ndarray, width: int) -> np.ndarray:
    """Decode an array of codes to their exact dyadic values (float64)."""
    width = check_width(width)
    c = np.asarray(codes)
    hi = float((1 << width) - 1)
    return (hi - 2.0 * c.astype(np.float64)) / float(1 << width)


def xor_product_values(
    x_codes: np.ndarray, y_codes: np.ndarray, width_x: int, width_y: int
) -> np.ndarray:
    """Elementwise XOR-product of two code arrays; returns uint64."""
    width_x = check_width(width_x)
    width_y = check_width(width_y)
    x = np.asarray(x_codes, dtype=np.uint64)
    y = np.asarray(y_codes, dtype=np.uint64)
    out = np.zeros(np.broadcast(x, y).shape, dtype=np.uint64)
    one = np.uint64(1)
    for i in range(width_x):
        xi = (x >> np.uint64(i)) & one
        for j in range(width_y):
            yj = (y >> np.uint64(j)) & one
            out += (xi ^ yj) << np.uint64(i + j)
    return out


def decode_product_values(d: np.ndarray, width_x: int, width_y: int) -> np.ndarray:
    """Vectorized form of :func:`decode_scalar_product` (no range check)."""
    hi = float(scalar_product_upper_bound(width_x, width_y))
    return (hi - 2.0 * np.asarray(d, dtype=np.float64)) / float(1 << (width_x + width_y))
