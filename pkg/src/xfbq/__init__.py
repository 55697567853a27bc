"""Exhaustive top-K cosine similarity search over XOR-friendly binary codes.

Floating-point vectors are quantized into a few sign-digit bit planes;
inner products of the quantized values are computed exactly with
XOR/popcount arithmetic, top-K candidates are selected through a distance
histogram widened by an extra-distance slack, and final ranks come from
exact float re-ranking.
"""

from .bitplane import (
    PackedMatrix,
    PackedVector,
    pack_matrix,
    pack_vector,
    quantize_matrix,
    quantize_vector,
    unpack_matrix,
    unpack_vector,
)
from .bench import (
    BenchPoint,
    BenchReport,
    KernelTiming,
    bench_inner_product,
    bench_search,
    instruction_counts,
    operand_memory_fraction,
)
from .dataio import (
    VectorDataset,
    generate_synthetic,
    read_fvecs,
    read_ivecs,
    write_fvecs,
    write_ivecs,
)
from .distance import (
    batch_distances,
    decode_inner_product,
    decode_inner_product_values,
    distance_upper_bound,
    packed_distance,
)
from .errors import (
    BadMagicError,
    DataFormatError,
    DimensionMismatchError,
    IndexFormatError,
    InvalidInputError,
    TruncatedIndexError,
    UnsupportedVersionError,
    XfbqError,
)
from .index import (
    Index,
    QuantParams,
    build_index,
    estimate_scale,
    load_index,
    save_index,
)
from .oracle import (
    PrecisionReport,
    QuantErrorReport,
    brute_force_topk,
    precision_at_k,
    precision_report,
    quantization_error_report,
)
from .quant import (
    ScalarCode,
    decode_scalar,
    decode_scalar_product,
    decode_values,
    quantize_scalar,
    quantize_values,
    sigma,
    sigma_inverse,
    xor_scalar_product,
    xor_product_values,
)
from .search import (
    DistanceHistogram,
    SearchRequest,
    SearchResult,
    gather_candidates,
    histogram_kth_distance,
    k_select,
    refine,
    suggest_extra_distance,
)

__version__ = "0.1.0"

__all__ = [
    "BadMagicError",
    "BenchPoint",
    "BenchReport",
    "DataFormatError",
    "DimensionMismatchError",
    "DistanceHistogram",
    "Index",
    "IndexFormatError",
    "InvalidInputError",
    "KernelTiming",
    "PackedMatrix",
    "PackedVector",
    "PrecisionReport",
    "QuantErrorReport",
    "QuantParams",
    "ScalarCode",
    "SearchRequest",
    "SearchResult",
    "TruncatedIndexError",
    "UnsupportedVersionError",
    "VectorDataset",
    "XfbqError",
    "batch_distances",
    "bench_inner_product",
    "bench_search",
    "brute_force_topk",
    "build_index",
    "decode_inner_product",
    "decode_inner_product_values",
    "decode_scalar",
    "decode_scalar_product",
    "decode_values",
    "distance_upper_bound",
    "estimate_scale",
    "gather_candidates",
    "generate_synthetic",
    "histogram_kth_distance",
    "instruction_counts",
    "k_select",
    "load_index",
    "operand_memory_fraction",
    "pack_matrix",
    "pack_vector",
    "packed_distance",
    "precision_at_k",
    "precision_report",
    "quantization_error_report",
    "quantize_matrix",
    "quantize_scalar",
    "quantize_values",
    "quantize_vector",
    "read_fvecs",
    "read_ivecs",
    "refine",
    "save_index",
    "sigma",
    "sigma_inverse",
    "suggest_extra_distance",
    "unpack_matrix",
    "unpack_vector",
    "write_fvecs",
    "write_ivecs",
    "xor_product_values",
    "xor_scalar_product",
]
