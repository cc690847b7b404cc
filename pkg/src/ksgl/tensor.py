"""Dense tensor storage: unfolding, vectorization, mode products, binary IO.

Tensors are plain float64 numpy arrays whose shape is the dimension vector.
Memory layout is C order (last index fastest).  The mode-k unfolding places
the mode-k index on rows; columns enumerate the remaining modes in
increasing order with the last one varying fastest.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

MAGIC = b"KSTN"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class Dims:
    """Mode sizes ``d`` with derived ``p = prod(d)`` and ``m_k = p / d_k``."""

    d: tuple[int, ...]

    def __init__(self, d: Sequence[int]):
        d = tuple(int(x) for x in d)
        if len(d) < 1:
            raise ValueError("need at least one mode")
        if any(x < 1 for x in d):
            raise ValueError(f"mode sizes must be positive, got {d}")
        object.__setattr__(self, "d", d)

    @property
    def L(self) -> int:
        return len(self.d)

    @cached_property
    def p(self) -> int:
        return int(np.prod(self.d, dtype=np.int64))

    @cached_property
    def m(self) -> tuple[int, ...]:
        return tuple(self.p // dk for dk in self.d)

    @property
    def m_min(self) -> int:
        return min(self.m)

    @property
    def d_max(self) -> int:
        return max(self.d)

    def __iter__(self):
        return iter(self.d)

    def __len__(self):
        return len(self.d)

    def __getitem__(self, k):
        return self.d[k]

    def __str__(self):
        return "x".join(str(x) for x in self.d)


def as_dims(dims) -> Dims:
    return dims if isinstance(dims, Dims) else Dims(dims)


def as_tensor(data, dims=None) -> np.ndarray:
    """Coerce ``data`` to a finite float64 tensor, reshaping to ``dims`` if given."""
    t = np.asarray(data, dtype=np.float64)
    if dims is not None:
        dims = as_dims(dims)
        if t.size != dims.p:
            raise ValueError(f"expected {dims.p} values for dims {dims}, got {t.size}")
        t = t.reshape(dims.d)
    if not np.all(np.isfinite(t)):
        raise ValueError("tensor has non-finite entries")
    return t


def _check_mode(t: np.ndarray, k: int) -> None:
    if not 0 <= k < t.ndim:
        raise IndexError(f"mode {k} out of range for order-{t.ndim} tensor")


def unfold(t: np.ndarray, k: int) -> np.ndarray:
    """Mode-k matricization, shape ``(d_k, p / d_k)``.  Modes are 0-based."""
    _check_mode(t, k)
    return np.moveaxis(t, k, 0).reshape(t.shape[k], -1)


def fold(mat: np.ndarray, k: int, shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`unfold`."""
    shape = tuple(shape)
    if not 0 <= k < len(shape):
        raise IndexError(f"mode {k} out of range for order-{len(shape)} tensor")
    moved = (shape[k],) + shape[:k] + shape[k + 1:]
    return np.moveaxis(np.asarray(mat).reshape(moved), 0, k)


def vec(t: np.ndarray) -> np.ndarray:
    """Canonical linearization (C order); matches the Kronecker-sum assembly."""
    return np.ascontiguousarray(t).reshape(-1)


def mode_multiply(t: np.ndarray, M: np.ndarray, k: int) -> np.ndarray:
    """Multiply mode ``k`` of ``t`` by ``M`` (``r x d_k``); mode k becomes size r."""
    _check_mode(t, k)
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[1] != t.shape[k]:
        raise ValueError(f"matrix of shape {M.shape} cannot act on mode {k} of size {t.shape[k]}")
    return np.moveaxis(np.tensordot(M, t, axes=([1], [k])), 0, k)


def multi_mode_multiply(t: np.ndarray, mats: Sequence[np.ndarray]) -> np.ndarray:
    """Apply ``mats[k]`` along every mode k."""
    for k, M in enumerate(mats):
        t = mode_multiply(t, M, k)
    return t


def inner(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.dot(a.reshape(-1), b.reshape(-1)))


def write_tensor(path, t: np.ndarray) -> None:
    t = as_tensor(t)
    header = MAGIC + struct.pack("<BI", FORMAT_VERSION, t.ndim) + struct.pack(f"<{t.ndim}I", *t.shape)
    Path(path).write_bytes(header + vec(t).astype("<f8").tobytes())


def read_tensor(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: not a KSTN tensor file")
    version, L = struct.unpack_from("<BI", raw, 4)
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported tensor format version {version}")
    off = 9
    shape = struct.unpack_from(f"<{L}I", raw, off)
    off += 4 * L
    p = int(np.prod(shape, dtype=np.int64))
    body = raw[off:]
    if len(body) != 8 * p:
        raise ValueError(f"{path}: expected {p} float64 values, found {len(body) // 8}")
    return as_tensor(np.frombuffer(body, dtype="<f8").astype(np.float64), shape)
