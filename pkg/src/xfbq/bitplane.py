"""Bit-plane packing of quantized vectors into 64-bit words.

A quantized N-dim vector with B-bit codes is stored as B planes; plane b
holds bit b of every component, packed so that dimension k lives in word
k // 64 at bit k % 64 (little-endian bit numbering).  Padding bits past
the true dimension are always zero, so XOR of two same-shape packs never
lights a padding bit and padded positions contribute nothing to popcount
distances.

:class:`PackedMatrix` keeps its planes word-major, shape
``(width, words, n)``, which makes the query-vs-all distance kernel a set
of contiguous passes; serialization transposes to the row-major on-disk
layout (row, then plane, then word).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInputError
from .quant import ScalarCode, check_width, quantize_values

WORD_BITS = 64


def words_needed(dim: int) -> int:
    return (int(dim) + WORD_BITS - 1) // WORD_BITS


def _padding_mask(dim: int) -> np.uint64:
    """Bits of the last word that are real data (all-ones when dim % 64 == 0)."""
    rem = dim % WORD_BITS
    if rem == 0:
        return np.uint64(0xFFFFFFFFFFFFFFFF)
    return np.uint64((1 << rem) - 1)


def _check_padding(planes: np.ndarray, dim: int, last_word_axis_slice) -> None:
    if dim == 0 or planes.size == 0:
        return
    last = planes[last_word_axis_slice]
    if np.any(last & ~_padding_mask(dim)):
        raise InvalidInputError("nonzero padding bits past the true dimension")


@dataclass(frozen=True)
class PackedVector:
    """One quantized vector as ``(width, words)`` uint64 bit-planes."""

    planes: np.ndarray
    dim: int

    def __post_init__(self):
        planes = np.ascontiguousarray(self.planes, dtype=np.uint64)
        object.__setattr__(self, "planes", planes)
        if planes.ndim != 2:
            raise InvalidInputError("planes must be a (width, words) array")
        check_width(planes.shape[0])
        if self.dim < 0 or planes.shape[1] != words_needed(self.dim):
            raise InvalidInputError(
                f"expected {words_needed(self.dim)} words per plane for dim "
                f"{self.dim}, got {planes.shape[1]}"
            )
        _check_padding(planes, self.dim, np.s_[:, -1])
        planes.setflags(write=False)

    @property
    def width(self) -> int:
        return self.planes.shape[0]

    @property
    def nbytes(self) -> int:
        return self.planes.nbytes


@dataclass(frozen=True)
class PackedMatrix:
    """n quantized vectors as word-major ``(width, words, n)`` uint64 planes."""

    planes: np.ndarray
    dim: int

    def __post_init__(self):
        planes = np.ascontiguousarray(self.planes, dtype=np.uint64)
        object.__setattr__(self, "planes", planes)
        if planes.ndim != 3:
            raise InvalidInputError("planes must be a (width, words, n) array")
        check_width(planes.shape[0])
        if self.dim < 0 or planes.shape[1] != words_needed(self.dim):
            raise InvalidInputError(
                f"expected {words_needed(self.dim)} words per plane for dim "
                f"{self.dim}, got {planes.shape[1]}"
            )
        _check_padding(planes, self.dim, np.s_[:, -1, :])
        planes.setflags(write=False)

    @property
    def width(self) -> int:
        return self.planes.shape[0]

    @property
    def count(self) -> int:
        return self.planes.shape[2]

    @property
    def nbytes(self) -> int:
        return self.planes.nbytes

    def row(self, k: int) -> PackedVector:
        return PackedVector(planes=np.ascontiguousarray(self.planes[:, :, k]), dim=self.dim)

    def to_row_major(self) -> np.ndarray:
        """Copy as ``(n, width, words)`` — the serialization layout."""
        return np.ascontiguousarray(self.planes.transpose(2, 0, 1))

    @classmethod
    def from_row_major(cls, rows: np.ndarray, dim: int) -> "PackedMatrix":
        rows = np.asarray(rows, dtype=np.uint64)
        return cls(planes=np.ascontiguousarray(rows.transpose(1, 2, 0)), dim=dim)


def _coerce_codes(codes, width: int | None) -> tuple[np.ndarray, int]:
    """Accept a ScalarCode sequence or a raw uint array plus explicit width."""
    if isinstance(codes, np.ndarray):
        if width is None:
            raise InvalidInputError("width is required when passing a raw code array")
        arr = codes
    elif len(codes) > 0 and isinstance(codes[0], ScalarCode):
        widths = {c.width for c in codes}
        if len(widths) > 1:
            raise InvalidInputError(f"mixed code widths {sorted(widths)}")
        inferred = widths.pop()
        if width is not None and width != inferred:
            raise InvalidInputError(f"width {width} does not match codes ({inferred})")
        width = inferred
        arr = np.array([c.bits for c in codes], dtype=np.uint8)
    else:
        if width is None:
            raise InvalidInputError("width is required when passing raw codes")
        arr = np.asarray(codes)
    width = check_width(width)
    arr = np.asarray(arr, dtype=np.uint64)
    if arr.size and int(arr.max()) >= (1 << width):
        raise InvalidInputError(f"code values exceed {width} bits")
    return arr.astype(np.uint8), width


def _pack_code_matrix(codes: np.ndarray, width: int) -> np.ndarray:
    """(n, dim) uint8 codes -> word-major (width, words, n) uint64 planes."""
    n, dim = codes.shape
    nwords = words_needed(dim)
    planes = np.empty((width, n, nwords), dtype=np.uint64)
    for b in range(width):
        bits = (codes >> b) & 1
        packed = np.packbits(bits, axis=1, bitorder="little")
        pad = nwords * 8 - packed.shape[1]
        if pad:
            packed = np.pad(packed, ((0, 0), (0, pad)))
        planes[b] = packed.view("<u8").astype(np.uint64, copy=False)
    return np.ascontiguousarray(planes.transpose(0, 2, 1))


def _unpack_plane_words(words: np.ndarray, dim: int) -> np.ndarray:
    """(n, words) uint64 -> (n, dim) single-plane bits."""
    le = np.ascontiguousarray(words).astype("<u8", copy=False)
    as_bytes = le.view(np.uint8).reshape(words.shape[0], -1)
    bits = np.unpackbits(as_bytes, axis=1, bitorder="little")
    return bits[:, :dim]


def pack_vector(codes: Sequence[ScalarCode] | np.ndarray, width: int | None = None) -> PackedVector:
    """Pack per-component codes into bit-planes.

    ``codes`` is either a sequence of :class:`ScalarCode` (all of one
    width) or a raw unsigned array with an explicit ``width``.
    """
    arr, width = _coerce_codes(codes, width)
    if arr.ndim != 1:
        raise InvalidInputError("pack_vector expects a 1-D code array")
    planes = _pack_code_matrix(arr[None, :], width)
    return PackedVector(planes=np.ascontiguousarray(planes[:, :, 0]), dim=arr.shape[0])


def unpack_vector(packed: PackedVector) -> np.ndarray:
    """Inverse of :func:`pack_vector`; returns the uint8 code array."""
    codes = np.zeros(packed.dim, dtype=np.uint8)
    for b in range(packed.width):
        bits = _unpack_plane_words(packed.planes[b][None, :], packed.dim)[0]
        codes |= (bits << b).astype(np.uint8)
    return codes


def pack_matrix(codes: np.ndarray, width: int) -> PackedMatrix:
    """Pack an (n, dim) uint code matrix into a :class:`PackedMatrix`."""
    arr, width = _coerce_codes(np.asarray(codes), width)
    if arr.ndim != 2:
        raise InvalidInputError("pack_matrix expects an (n, dim) code array")
    return PackedMatrix(planes=_pack_code_matrix(arr, width), dim=arr.shape[1])


def unpack_matrix(packed: PackedMatrix) -> np.ndarray:
    """Inverse of :func:`pack_matrix`; returns (n, dim) uint8 codes."""
    n = packed.count
    codes = np.zeros((n, packed.dim), dtype=np.uint8)
    for b in range(packed.width):
        words = np.ascontiguousarray(packed.planes[b].T)
        codes |= (_unpack_plane_words(words, packed.dim) << b).astype(np.uint8)
    return codes


def quantize_vector(values: np.ndarray, width: int, scale: float = 1.0) -> PackedVector:
    """Scale, quantize and pack one float vector."""
    if scale <= 0:
        raise InvalidInputError(f"scale must be positive, got {scale}")
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise InvalidInputError("quantize_vector expects a 1-D vector")
    codes = quantize_values(v * float(scale), width)
    return pack_vector(codes, width)


def quantize_matrix(values: np.ndarray, width: int, scale: float = 1.0) -> PackedMatrix:
    """Scale, quantize and pack an (n, dim) float matrix row by row."""
    if scale <= 0:
        raise InvalidInputError(f"scale must be positive, got {scale}")
    m = np.asarray(values, dtype=np.float64)
    if m.ndim != 2:
        raise InvalidInputError("quantize_matrix expects an (n, dim) matrix")
    codes = quantize_values(m * float(scale), width)
    return pack_matrix(codes, width)
