"""Population count over uint64 arrays.

Uses the hardware-backed ``np.bitwise_count`` ufunc when the installed
numpy provides it, with a portable nibble-table fallback that produces
bit-identical results (the test suite cross-checks both paths).
"""

from __future__ import annotations

import numpy as np

HAS_HARDWARE_POPCOUNT = hasattr(np, "bitwise_count")

_NIBBLE = np.array([bin(v).count("1") for v in range(16)], dtype=np.uint8)
_BYTE = (_NIBBLE[np.arange(256) & 0xF] + _NIBBLE[np.arange(256) >> 4]).astype(np.uint8)


def popcount_table(words: np.ndarray) -> np.ndarray:
    """Nibble-table popcount; same contract as :func:`popcount`."""
    w = np.ascontiguousarray(words, dtype=np.uint64)
    as_bytes = w.view(np.uint8).reshape(w.shape + (8,))
    return _BYTE[as_bytes].sum(axis=-1, dtype=np.uint8)


def popcount_hardware(words: np.ndarray) -> np.ndarray:
    """Popcount via ``np.bitwise_count`` (numpy >= 2.0)."""
    return np.bitwise_count(np.asarray(words, dtype=np.uint64))


if HAS_HARDWARE_POPCOUNT:
    popcount = popcount_hardware
else:  # pragma: no cover - exercised only on old numpy
    popcount = popcount_table
