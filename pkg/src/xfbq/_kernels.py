"""Batch XOR/popcount distance kernels.

The hot path is one quantized query against every row of a word-major
plane array.  When numba is importable the kernel is a jitted loop nest
built around the LLVM ctpop intrinsic, which the compiler vectorizes with
the host's SIMD popcount; otherwise a numpy pass structure with
``popcount`` is used.  Both produce identical uint64 distances.

Loop order follows the one-shift-per-plane-pair scheme: plane pairs in
the outer loops, words next, documents innermost (contiguous).
"""

from __future__ import annotations

import numpy as np

from .popcount import popcount

try:  # pragma: no cover - import guard
    from numba import njit, types
    from numba.extending import intrinsic
    from llvmlite import ir

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover
    NUMBA_AVAILABLE = False


def batch_distances_numpy(doc_planes: np.ndarray, query_planes: np.ndarray,
                          out: np.ndarray) -> np.ndarray:
    """Reference pass structure over (width_d, words, n) / (width_q, words)."""
    width_d, nwords, n = doc_planes.shape
    width_q = query_planes.shape[0]
    out[:] = 0
    for i in range(width_d):
        for j in range(width_q):
            shift = np.uint64(i + j)
            for w in range(nwords):
                pc = popcount(doc_planes[i, w] ^ query_planes[j, w])
                out += pc.astype(np.uint64) << shift
    return out


if NUMBA_AVAILABLE:

    @intrinsic
    def _popcnt64(typingctx, src):
        sig = types.uint64(types.uint64)

        def codegen(context, builder, signature, args):
            fn = builder.module.declare_intrinsic("llvm.ctpop", [ir.IntType(64)])
            return builder.call(fn, [args[0]])

        return sig, codegen

    @njit(nogil=True, cache=True)
    def _batch_distances_jit(doc_planes, query_planes, out):  # pragma: no cover - jitted
        width_d, nwords, n = doc_planes.shape
        width_q = query_planes.shape[0]
        out[:] = 0
        for i in range(width_d):
            for j in range(width_q):
                shift = np.uint64(i + j)
                for w in range(nwords):
                    words = doc_planes[i, w]
                    qword = query_planes[j, w]
                    for k in range(n):
                        out[k] += _popcnt64(words[k] ^ qword) << shift
        return out

    def batch_distances_kernel(doc_planes, query_planes, out):
        return _batch_distances_jit(doc_planes, query_planes, out)

else:  # pragma: no cover
    batch_distances_kernel = batch_distances_numpy
