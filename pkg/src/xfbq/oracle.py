"""Brute-force ground truth, precision@K, and quantization-error diagnostics.

The brute-force scan accumulates similarities in float64 so it can serve
as ground truth for the pipeline; it shares the pipeline's tiebreak
(similarity descending, doc id ascending), which makes exhaustive-mode
results comparable id for id.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bitplane import unpack_matrix, quantize_matrix
from .errors import DimensionMismatchError, InvalidInputError
from .index import QuantParams
from .quant import decode_values


def brute_force_topk(vectors: np.ndarray, query: np.ndarray, k: int) -> list[tuple[int, float]]:
    """Exact top-k rows by float dot product (float64 accumulation)."""
    m = np.asarray(vectors)
    q = np.ascontiguousarray(query, dtype=np.float64)
    if m.ndim != 2 or m.shape[1] != q.shape[0]:
        raise DimensionMismatchError(
            f"vectors are {m.shape}, query has dim {q.shape[0]}"
        )
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    n = m.shape[0]
    if n == 0:
        return []
    sims = np.asarray(m, dtype=np.float64) @ q
    order = np.lexsort((np.arange(n), -sims))[: min(k, n)]
    return [(int(i), float(sims[i])) for i in order]


def precision_at_k(approx: list, exact: list, k: int) -> float:
    """|top-k of approx  intersect  top-k of exact| / k (set semantics)."""
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    a = {int(i) for i in approx[:k]}
    b = {int(i) for i in exact[:k]}
    return len(a & b) / k


@dataclass(frozen=True)
class PrecisionReport:
    """Mean precision@k with the underlying per-query values."""

    k: int
    precision: float
    per_query: np.ndarray

    def to_kv_text(self) -> str:
        return (
            f"k={self.k}\n"
            f"precision={self.precision:.6f}\n"
            f"queries={len(self.per_query)}\n"
        )


def precision_report(approx_lists: list, exact_lists: list, k: int) -> PrecisionReport:
    if len(approx_lists) != len(exact_lists):
        raise InvalidInputError("approx and exact query counts differ")
    per_query = np.array(
        [precision_at_k(a, e, k) for a, e in zip(approx_lists, exact_lists)],
        dtype=np.float64,
    )
    if per_query.size == 0:
        raise InvalidInputError("no queries to score")
    return PrecisionReport(k=k, precision=float(per_query.mean()), per_query=per_query)


@dataclass(frozen=True)
class QuantErrorReport:
    """Length and direction distortion introduced by quantization.

    ``mean_length_expansion`` is the mean signed relative change of the
    row norm after quantizing the scaled row; ``length_spread`` is the
    standard deviation of that per-row expansion.  Angles are between the
    scaled row and its quantized reconstruction, in degrees.
    """

    mean_length_expansion: float
    length_spread: float
    mean_angle_error_deg: float
    p95_angle_error_deg: float
    sample_count: int

    def to_kv_text(self) -> str:
        return (
            f"mean_length_expansion={self.mean_length_expansion:.6f}\n"
            f"length_spread={self.length_spread:.6f}\n"
            f"mean_angle_error_deg={self.mean_angle_error_deg:.4f}\n"
            f"p95_angle_error_deg={self.p95_angle_error_deg:.4f}\n"
            f"sample_count={self.sample_count}\n"
        )


def quantization_error_report(
    vectors: np.ndarray,
    params: QuantParams,
    sample: int | None = None,
    seed: int = 0,
) -> QuantErrorReport:
    """Compare scaled rows against their quantized reconstructions.

    A deterministic random sample of ``sample`` rows is used (all rows
    when None).  Rows that quantize to themselves report zero errors.
    """
    m = np.asarray(vectors, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] == 0:
        raise InvalidInputError("vectors must be a non-empty (n, dim) matrix")
    if m.shape[1] != params.dim:
        raise InvalidInputError(f"vectors have dim {m.shape[1]}, params say {params.dim}")
    n = m.shape[0]
    if sample is not None:
        if sample < 1:
            raise InvalidInputError(f"sample must be >= 1, got {sample}")
        if sample > n:
            raise InvalidInputError(f"sample {sample} exceeds row count {n}")
        rng = np.random.Generator(np.random.PCG64(seed))
        m = m[np.sort(rng.choice(n, size=sample, replace=False))]

    scaled = m * params.scale
    packed = quantize_matrix(m, params.doc_bits, params.scale)
    decoded = decode_values(unpack_matrix(packed), params.doc_bits)

    scaled_norms = np.linalg.norm(scaled, axis=1)
    decoded_norms = np.linalg.norm(decoded, axis=1)
    ok = scaled_norms > 0
    if not np.any(ok):
        raise InvalidInputError("all sampled rows have zero norm")
    expansion = (decoded_norms[ok] - scaled_norms[ok]) / scaled_norms[ok]

    # Angle via 2*atan2(|u^ - v^|, |u^ + v^|): stable near 0 and exactly
    # zero for rows the quantizer maps to themselves.  Decoded rows always
    # have positive norm because the code grid has no zero point.
    u = scaled[ok] / scaled_norms[ok, None]
    v = decoded[ok] / decoded_norms[ok, None]
    diff = np.linalg.norm(u - v, axis=1)
    summ = np.linalg.norm(u + v, axis=1)
    angles = np.degrees(2.0 * np.arctan2(diff, summ))

    return QuantErrorReport(
        mean_length_expansion=float(expansion.mean()),
        length_spread=float(expansion.std()),
        mean_angle_error_deg=float(angles.mean()),
        p95_angle_error_deg=float(np.percentile(angles, 95)),
        sample_count=int(ok.sum()),
    )
