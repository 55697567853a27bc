"""Searchable index: scale estimation, build, and the XFBQ file format.

An index bundles the packed bit-planes of all documents, the original
float32 vectors kept for exact re-ranking, and the quantization
parameters.  Once built it is deeply immutable (arrays are marked
read-only), so any number of concurrent searches may share it.

On-disk layout (version 1, little-endian):

    magic "XFBQ" | u32 version | u32 n | u32 dim | u8 doc_bits |
    u8 query_bits | f64 scale | u8 has_originals |
    planes, row-major: per row, plane 0 first, words as <u8 |
    originals as <f4 row-major, only if has_originals

The format is bit-exact: saving and reloading reproduces every field.
"""

from __future__ import annotations

import os
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .bitplane import PackedMatrix, quantize_matrix, words_needed
from .errors import (
    BadMagicError,
    InvalidInputError,
    TruncatedIndexError,
    UnsupportedVersionError,
)
from .quant import check_width

MAGIC = b"XFBQ"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIIBBdB")

DEFAULT_DOC_BITS = 3
DEFAULT_QUERY_BITS = 4
DEFAULT_SCALE_PERCENTILE = 0.98

_NORM_TOLERANCE = 1e-4


@dataclass(frozen=True, slots=True)
class QuantParams:
    """Quantization configuration shared by documents and queries."""

    dim: int
    scale: float
    doc_bits: int = DEFAULT_DOC_BITS
    query_bits: int = DEFAULT_QUERY_BITS

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidInputError(f"dim must be >= 1, got {self.dim}")
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise InvalidInputError(f"scale must be positive, got {self.scale}")
        check_width(self.doc_bits)
        check_width(self.query_bits)


@dataclass(frozen=True)
class Index:
    """Immutable searchable bundle of packed codes plus original vectors.

    ``originals`` is None when the index was built without them; searches
    then fall back to quantized-similarity ranking.  ``ids`` optionally
    maps row numbers to external document ids (in-memory only; the file
    format stores rows by position).
    """

    params: QuantParams
    packed: PackedMatrix
    originals: np.ndarray | None
    ids: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.packed.dim != self.params.dim:
            raise InvalidInputError("packed matrix dim does not match params")
        if self.packed.width != self.params.doc_bits:
            raise InvalidInputError("packed matrix width does not match doc_bits")
        if self.originals is not None:
            originals = np.ascontiguousarray(self.originals, dtype=np.float32)
            object.__setattr__(self, "originals", originals)
            if originals.shape != (self.packed.count, self.params.dim):
                raise InvalidInputError("originals shape does not match packed matrix")
            originals.setflags(write=False)
        if self.ids is not None:
            ids = np.ascontiguousarray(self.ids, dtype=np.int64)
            object.__setattr__(self, "ids", ids)
            if ids.shape != (self.packed.count,):
                raise InvalidInputError("ids length does not match document count")
            ids.setflags(write=False)

    @property
    def n(self) -> int:
        return self.packed.count

    @property
    def dim(self) -> int:
        return self.params.dim

    def originals_as_float64(self) -> np.ndarray | None:
        """Originals widened to float64 (exact), cached after first use.

        Refinement accumulates in float64; caching the widened copy keeps
        repeated searches from re-converting the whole matrix.  Benign to
        race: concurrent first calls compute the same immutable array.
        """
        if self.originals is None:
            return None
        cached = getattr(self, "_originals64", None)
        if cached is None:
            cached = self.originals.astype(np.float64)
            cached.setflags(write=False)
            object.__setattr__(self, "_originals64", cached)
        return cached


def estimate_scale(vectors: np.ndarray, percentile: float = DEFAULT_SCALE_PERCENTILE) -> float:
    """Reciprocal of the given percentile of |component| over all entries.

    ``percentile=1.0`` is the conservative 1/max rule; the default 0.98
    deliberately lets the largest 2% of components saturate, which spreads
    the bulk of the data across the representable range.
    """
    v = np.asarray(vectors)
    if v.size == 0:
        raise InvalidInputError("cannot estimate scale from an empty matrix")
    if not 0.0 < percentile <= 1.0:
        raise InvalidInputError(f"percentile must be in (0, 1], got {percentile}")
    q = float(np.quantile(np.abs(v), percentile))
    if q <= 0.0:
        raise InvalidInputError("cannot estimate scale: selected percentile is zero")
    return 1.0 / q


def build_index(
    vectors: np.ndarray,
    params: QuantParams,
    normalize: bool = False,
    keep_originals: bool = True,
    ids: np.ndarray | None = None,
) -> Index:
    """Quantize all rows of ``vectors`` into a searchable :class:`Index`.

    With ``normalize`` set, rows are L2-normalized first (zero-norm rows
    are an error, reported with their indices).  Cosine semantics assume
    unit rows; non-unit rows without ``normalize`` produce a warning, not
    an error, since the quantized pipeline itself ranks by inner product.
    """
    v = np.ascontiguousarray(vectors, dtype=np.float32)
    if v.ndim != 2:
        raise InvalidInputError("vectors must be an (n, dim) matrix")
    if v.shape[1] != params.dim:
        raise InvalidInputError(f"vectors have dim {v.shape[1]}, params say {params.dim}")
    if v.size and not np.all(np.isfinite(v)):
        raise InvalidInputError("vectors contain non-finite entries")

    if v.shape[0]:
        norms = np.linalg.norm(v.astype(np.float64), axis=1)
        if normalize:
            zero_rows = np.flatnonzero(norms == 0.0)
            if zero_rows.size:
                shown = ", ".join(map(str, zero_rows[:10].tolist()))
                raise InvalidInputError(
                    f"cannot normalize zero-norm rows: [{shown}]"
                    + (" ..." if zero_rows.size > 10 else "")
                )
            v = (v.astype(np.float64) / norms[:, None]).astype(np.float32)
        elif np.any(np.abs(norms - 1.0) > _NORM_TOLERANCE):
            worst = int(np.argmax(np.abs(norms - 1.0)))
            warnings.warn(
                f"rows are not unit-norm (row {worst} has norm {norms[worst]:.6f}); "
                "similarities will be inner products, not cosines",
                stacklevel=2,
            )

    packed = quantize_matrix(v, params.doc_bits, params.scale)
    return Index(
        params=params,
        packed=packed,
        originals=v if keep_originals else None,
        ids=ids,
    )


def save_index(index: Index, path) -> None:
    """Write an index in the versioned XFBQ format (atomic via temp file)."""
    if index.ids is not None:
        raise InvalidInputError(
            "index files do not carry external ids; drop them before saving"
        )
    header = _HEADER.pack(
        MAGIC,
        FORMAT_VERSION,
        index.n,
        index.dim,
        index.params.doc_bits,
        index.params.query_bits,
        float(index.params.scale),
        1 if index.originals is not None else 0,
    )
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as f:
        f.write(header)
        f.write(index.packed.to_row_major().astype("<u8", copy=False).tobytes())
        if index.originals is not None:
            f.write(index.originals.astype("<f4", copy=False).tobytes())
    os.replace(tmp, path)


def load_index(path) -> Index:
    """Read an XFBQ index file; raises distinct errors for each failure class."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 4 or raw[:4] != MAGIC:
        raise BadMagicError(f"{path}: not an XFBQ index file")
    if len(raw) < _HEADER.size:
        raise TruncatedIndexError(f"{path}: header truncated")
    _, version, n, dim, doc_bits, query_bits, scale, has_originals = _HEADER.unpack_from(raw)
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"{path}: version {version}, expected {FORMAT_VERSION}")
    params = QuantParams(dim=dim, scale=scale, doc_bits=doc_bits, query_bits=query_bits)

    offset = _HEADER.size
    nwords = words_needed(dim)
    plane_bytes = n * doc_bits * nwords * 8
    if len(raw) < offset + plane_bytes:
        raise TruncatedIndexError(f"{path}: plane data truncated")
    rows = (
        np.frombuffer(raw, dtype="<u8", count=n * doc_bits * nwords, offset=offset)
        .astype(np.uint64, copy=False)
        .reshape(n, doc_bits, nwords)
    )
    packed = PackedMatrix.from_row_major(rows, dim)
    offset += plane_bytes

    originals = None
    if has_originals:
        orig_bytes = n * dim * 4
        if len(raw) < offset + orig_bytes:
            raise TruncatedIndexError(f"{path}: originals truncated")
        originals = (
            np.frombuffer(raw, dtype="<f4", count=n * dim, offset=offset)
            .astype(np.float32, copy=False)
            .reshape(n, dim)
        )
        offset += orig_bytes
    if offset != len(raw):
        raise TruncatedIndexError(f"{path}: {len(raw) - offset} unexpected trailing bytes")
    return Index(params=params, packed=packed, originals=originals)
