"""fvecs/ivecs readers and writers plus synthetic dataset generation.

Both formats store one little-endian int32 dimension header per vector
followed by the payload (float32 for fvecs, int32 for ivecs); every
header in a file must agree.  Round-trips are bitwise identities.

Synthetic data pins its generator (PCG64) and records it in the
provenance string so acceptance runs reproduce across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError, InvalidInputError

SYNTHETIC_GENERATOR = "pcg64"


@dataclass(frozen=True)
class VectorDataset:
    """A rectangular float32 matrix plus a provenance string."""

    data: np.ndarray
    source: str

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        object.__setattr__(self, "data", data)
        if data.ndim != 2:
            raise InvalidInputError("dataset must be an (n, dim) matrix")
        if data.size and not np.all(np.isfinite(data)):
            raise InvalidInputError("dataset contains non-finite entries")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


def _read_vec_file(path, payload_dtype: str) -> np.ndarray:
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) == 0:
        return np.empty((0, 0), dtype=payload_dtype)
    if len(raw) % 4 != 0:
        raise DataFormatError(f"{path}: size {len(raw)} is not a multiple of 4")
    headers = np.frombuffer(raw, dtype="<i4")
    total = headers.shape[0]
    dim = int(headers[0])
    if dim < 0:
        raise DataFormatError(f"{path}: row 0 has negative dimension {dim}")
    # Walk the row headers so a bad row is reported by index.
    offset, row = 0, 0
    while offset < total:
        d = int(headers[offset])
        if d != dim:
            raise DataFormatError(f"{path}: row {row} has dimension {d}, expected {dim}")
        if offset + 1 + dim > total:
            raise DataFormatError(f"{path}: row {row} truncated")
        offset += 1 + dim
        row += 1
    payload = np.frombuffer(raw, dtype=payload_dtype).reshape(row, 1 + dim)[:, 1:]
    return np.ascontiguousarray(payload)


def _write_vec_file(matrix: np.ndarray, path, payload_dtype: str) -> None:
    m = np.ascontiguousarray(matrix)
    if m.ndim != 2:
        raise InvalidInputError("expected an (n, dim) matrix")
    n, dim = m.shape
    out = np.empty((n, 1 + dim), dtype="<i4")
    out[:, 0] = dim
    out[:, 1:] = m.astype(payload_dtype, copy=False).view("<i4")
    with open(path, "wb") as f:
        f.write(out.tobytes())


def read_fvecs(path) -> VectorDataset:
    """Load a float32 fvecs file; empty files give an empty 0-dim dataset."""
    data = _read_vec_file(path, "<f4")
    return VectorDataset(data=data.astype(np.float32, copy=False), source=f"fvecs:{path}")


def write_fvecs(dataset: VectorDataset | np.ndarray, path) -> None:
    data = dataset.data if isinstance(dataset, VectorDataset) else np.asarray(dataset)
    _write_vec_file(data.astype(np.float32, copy=False), path, "<f4")


def read_ivecs(path) -> np.ndarray:
    """Load an int32 ivecs file as an (n, dim) matrix."""
    return _read_vec_file(path, "<i4").astype(np.int32, copy=False)


def write_ivecs(matrix: np.ndarray, path) -> None:
    _write_vec_file(np.asarray(matrix, dtype="<i4"), path, "<i4")


def generate_synthetic(
    n: int, dim: int, seed: int = 0, distribution: str = "gaussian-normalized"
) -> VectorDataset:
    """Deterministic unit-norm random vectors.

    ``gaussian-normalized`` draws components from Normal(0, 1/dim) and
    L2-normalizes each row, so components concentrate well inside (-1, 1)
    for moderate dimensions.
    """
    if n < 1 or dim < 1:
        raise InvalidInputError(f"n and dim must be >= 1, got n={n} dim={dim}")
    if distribution != "gaussian-normalized":
        raise InvalidInputError(f"unknown distribution {distribution!r}")
    rng = np.random.Generator(np.random.PCG64(seed))
    data = rng.normal(0.0, 1.0 / np.sqrt(dim), size=(n, dim))
    norms = np.linalg.norm(data, axis=1, keepdims=True)
    data = (data / norms).astype(np.float32)
    source = (
        f"synthetic:{distribution}:{SYNTHETIC_GENERATOR}:seed={seed}:n={n}:dim={dim}"
    )
    return VectorDataset(data=data, source=source)
