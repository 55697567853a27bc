"""XOR/popcount distances between packed vectors and their exact decode.

The integer distance between two packed vectors equals the sum of the
per-component XOR scalar products, computed as
``sum_{i,j} popcount(plane_i ^ plane_j) << (i + j)``.  Smaller distance
means larger inner product; the decode is affine with slope
``-2 / 2^(width_x + width_y)``, so ascending distance order is exactly
descending quantized-similarity order.

Distances accumulate in uint64: the bound ``n_dims * 255 * 255`` keeps
any realistic dimensionality far from overflow.
"""

from __future__ import annotations

import numpy as np

from ._kernels import batch_distances_kernel
from .bitplane import PackedMatrix, PackedVector
from .errors import DimensionMismatchError, InvalidInputError
from .popcount import popcount
from .quant import check_width, scalar_product_upper_bound


def distance_upper_bound(dim: int, width_x: int, width_y: int) -> int:
    """Largest possible packed distance for the given shape."""
    if dim < 0:
        raise InvalidInputError(f"dim must be non-negative, got {dim}")
    return int(dim) * scalar_product_upper_bound(width_x, width_y)


def packed_distance(x: PackedVector, y: PackedVector) -> int:
    """Pairwise XOR/popcount distance; widths may differ, dims must match."""
    if x.dim != y.dim:
        raise DimensionMismatchError(f"dim mismatch: {x.dim} vs {y.dim}")
    total = 0
    for i in range(x.width):
        for j in range(y.width):
            pc = int(popcount(x.planes[i] ^ y.planes[j]).sum())
            total += pc << (i + j)
    return total


def batch_distances(matrix: PackedMatrix, query: PackedVector,
                    out: np.ndarray | None = None) -> np.ndarray:
    """Distances from one packed query to every row of a packed matrix.

    Returns a uint64 array of length ``matrix.count``; ``out`` may be
    supplied to reuse a buffer.  Read-only on its inputs, so concurrent
    calls over a shared matrix are safe.
    """
    if matrix.dim != query.dim:
        raise DimensionMismatchError(f"dim mismatch: {matrix.dim} vs {query.dim}")
    n = matrix.count
    if out is None:
        out = np.empty(n, dtype=np.uint64)
    elif out.shape != (n,) or out.dtype != np.uint64:
        raise InvalidInputError("out buffer must be uint64 of length matrix.count")
    if n == 0:
        return out
    batch_distances_kernel(matrix.planes, query.planes, out)
    return out


def decode_inner_product(d: int, dim: int, width_x: int, width_y: int) -> float:
    """Exact inner product of the decoded quantized vectors for distance ``d``.

    Note the result is in scaled units: quantizing with a scale factor s
    makes this approximately s^2 times the cosine similarity.
    """
    hi = distance_upper_bound(dim, width_x, width_y)
    if not 0 <= int(d) <= hi:
        raise InvalidInputError(f"distance {d} outside [0, {hi}]")
    return (hi - 2 * int(d)) / float(1 << (width_x + width_y))


def decode_inner_product_values(d: np.ndarray, dim: int, width_x: int,
                                width_y: int) -> np.ndarray:
    """Vectorized :func:`decode_inner_product` (no per-element range check)."""
    hi = float(distance_upper_bound(dim, width_x, width_y))
    check_width(width_x)
    check_width(width_y)
    return (hi - 2.0 * np.asarray(d, dtype=np.float64)) / float(1 << (width_x + width_y))
