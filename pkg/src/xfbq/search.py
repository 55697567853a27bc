"""The K-Select pipeline: quantize query, distance pass, histogram
selection with extra distance, candidate gather, exact refine.

Distances take few enough distinct integer values that the Kth minimum is
found with a plain frequency histogram (one bin per value) instead of a
heap.  The Kth-minimum distance plus a caller-chosen extra distance forms
the candidate threshold; extra distance widens the candidate set to
recover neighbors displaced by quantization error, and at the distance
upper bound the pipeline degenerates to exact exhaustive search.

All stages are read-only on the index; concurrent searches need no
coordination.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .bitplane import quantize_vector
from .distance import (
    batch_distances,
    decode_inner_product_values,
    distance_upper_bound,
    packed_distance,
)
from .errors import DimensionMismatchError, InvalidInputError
from .index import Index


@dataclass(frozen=True)
class SearchRequest:
    """One top-K query: float vector, K, and integer extra distance."""

    query: np.ndarray
    k: int
    extra_distance: int = 0

    def __post_init__(self):
        query = np.ascontiguousarray(self.query, dtype=np.float64)
        object.__setattr__(self, "query", query)
        if query.ndim != 1:
            raise InvalidInputError("query must be a 1-D vector")
        if not np.all(np.isfinite(query)):
            raise InvalidInputError("query contains non-finite entries")
        if self.k < 1:
            raise InvalidInputError(f"k must be >= 1, got {self.k}")
        if self.extra_distance < 0:
            raise InvalidInputError(f"extra_distance must be >= 0, got {self.extra_distance}")


@dataclass(frozen=True)
class SearchResult:
    """Hits sorted by similarity descending (ties by doc id ascending).

    ``approximate`` is set when the index has no originals and hits were
    ranked by quantized similarity instead of exact float products.
    ``stage_seconds`` is filled only when timing collection was requested.
    """

    hits: list[tuple[int, float]]
    candidate_count: int
    threshold_distance: int
    approximate: bool = False
    stage_seconds: dict[str, float] | None = field(default=None, compare=False)


@dataclass(frozen=True)
class DistanceHistogram:
    """Frequency of every integer distance value in 0..upper_bound."""

    bins: np.ndarray

    @classmethod
    def from_distances(cls, distances: np.ndarray, upper_bound: int) -> "DistanceHistogram":
        d = np.asarray(distances)
        if d.size == 0:
            raise InvalidInputError("cannot histogram an empty distance array")
        if int(d.max()) > upper_bound:
            raise InvalidInputError(
                f"distance {int(d.max())} exceeds upper bound {upper_bound}"
            )
        bins = np.bincount(d.astype(np.int64), minlength=int(upper_bound) + 1)
        return cls(bins=bins)

    @property
    def total(self) -> int:
        return int(self.bins.sum())

    def kth_smallest(self, k: int) -> int:
        """Smallest distance value t with at least k distances <= t."""
        if k < 1:
            raise InvalidInputError(f"k must be >= 1, got {k}")
        k = min(k, self.total)
        cumulative = np.cumsum(self.bins)
        return int(np.searchsorted(cumulative, k, side="left"))


def histogram_kth_distance(
    distances: np.ndarray, k: int, extra: int = 0, upper_bound: int | None = None
) -> int:
    """Kth-minimum distance by histogram, plus ``extra`` slack.

    Equivalent to ``sorted(distances)[min(k, n) - 1] + extra`` but runs in
    one counting pass; ties at the boundary all fall inside the threshold.
    """
    d = np.asarray(distances)
    if d.size == 0:
        raise InvalidInputError("cannot select from an empty distance array")
    if extra < 0:
        raise InvalidInputError(f"extra must be >= 0, got {extra}")
    if upper_bound is None:
        upper_bound = int(d.max())
    hist = DistanceHistogram.from_distances(d, upper_bound)
    return hist.kth_smallest(k) + int(extra)


def gather_candidates(distances: np.ndarray, threshold: int) -> np.ndarray:
    """Ids with distance <= threshold, in ascending id order."""
    d = np.asarray(distances)
    if d.size == 0 or threshold < 0:
        return np.empty(0, dtype=np.int64)
    capped = min(int(threshold), int(d.max()))
    return np.flatnonzero(d <= d.dtype.type(capped))


def _rank_hits(ids: np.ndarray, sims: np.ndarray, k: int) -> list[tuple[int, float]]:
    order = np.lexsort((ids, -sims))[:k]
    return [(int(ids[i]), float(sims[i])) for i in order]


def refine(
    index: Index,
    query: np.ndarray,
    candidates: np.ndarray,
    k: int,
    distances: np.ndarray | None = None,
) -> tuple[list[tuple[int, float]], bool]:
    """Re-rank candidate rows; returns (hits, approximate).

    With originals present, similarities are exact float dot products
    (float64 accumulation over the stored float32 rows).  Without them,
    ranking falls back to similarities decoded from quantized distances
    (descaled to approximate cosine units) and the result is flagged
    approximate.
    """
    cand = np.asarray(candidates, dtype=np.int64)
    if cand.size == 0:
        return [], index.originals is None
    q = np.ascontiguousarray(query, dtype=np.float64)
    originals = index.originals_as_float64()
    if originals is not None:
        rows = originals if cand.size == index.n else originals[cand]
        sims = rows @ q
        return _rank_hits(cand, sims, k), False

    p = index.params
    if distances is None:
        packed_query = quantize_vector(q, p.query_bits, p.scale)
        cand_d = np.array(
            [packed_distance(index.packed.row(int(i)), packed_query) for i in cand],
            dtype=np.uint64,
        )
    else:
        cand_d = np.asarray(distances)[cand]
    # decoded quantized products are in scale^2 units; divide back so the
    # reported values approximate cosine similarity like the exact path
    sims = decode_inner_product_values(cand_d, p.dim, p.doc_bits, p.query_bits)
    sims /= p.scale * p.scale
    return _rank_hits(cand, sims, k), True


def suggest_extra_distance(index: Index, fraction: float) -> int:
    """Extra distance as a fraction of the total distance range.

    A few percent of the range is normally enough to recover the
    neighbors that quantization error pushed past the Kth boundary;
    fraction 1.0 forces exact search.
    """
    if not 0.0 <= fraction <= 1.0:
        raise InvalidInputError(f"fraction must be in [0, 1], got {fraction}")
    p = index.params
    return round(fraction * distance_upper_bound(p.dim, p.query_bits, p.doc_bits))


def k_select(index: Index, request: SearchRequest, collect_timing: bool = False) -> SearchResult:
    """Full pipeline for one query; see the module docstring.

    With ``extra_distance >= distance_upper_bound`` the result equals the
    brute-force top-K exactly (same ids, same order).  ``k > n`` returns
    all n hits.
    """
    p = index.params
    if request.query.shape[0] != p.dim:
        raise DimensionMismatchError(
            f"query dim {request.query.shape[0]} != index dim {p.dim}"
        )
    timings = {} if collect_timing else None
    if index.n == 0:
        return SearchResult(hits=[], candidate_count=0, threshold_distance=0,
                            approximate=index.originals is None, stage_seconds=timings)

    t0 = time.perf_counter()
    packed_query = quantize_vector(request.query, p.query_bits, p.scale)
    t1 = time.perf_counter()
    dists = batch_distances(index.packed, packed_query)
    t2 = time.perf_counter()
    upper = distance_upper_bound(p.dim, p.doc_bits, p.query_bits)
    threshold = histogram_kth_distance(
        dists, min(request.k, index.n), request.extra_distance, upper_bound=upper
    )
    candidates = gather_candidates(dists, min(threshold, upper))
    t3 = time.perf_counter()
    hits, approximate = refine(index, request.query, candidates, request.k, distances=dists)
    t4 = time.perf_counter()

    if index.ids is not None:
        hits = [(int(index.ids[row]), sim) for row, sim in hits]
    if collect_timing:
        timings["quantize_query"] = t1 - t0
        timings["distances"] = t2 - t1
        timings["histogram_gather"] = t3 - t2
        timings["refine"] = t4 - t3
    return SearchResult(
        hits=hits,
        candidate_count=int(candidates.size),
        threshold_distance=int(threshold),
        approximate=approximate,
        stage_seconds=timings,
    )
