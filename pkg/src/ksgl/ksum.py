"""Kronecker-sum algebra at factor scale.

``KroneckerSum`` holds factors ``Psi_k`` and represents

    Omega = sum_k  I_{d_1..d_{k-1}} (x) Psi_k (x) I_{d_{k+1}..d_L}

without forming the ``p x p`` matrix.  Its eigenvalues are all sums
``lam_{1,i1} + ... + lam_{L,iL}`` of factor eigenvalues; most routines here
reduce over that eigensum grid, stored as an L-order array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg import as_sym, offdiag, sym_eig
from .tensor import Dims, as_dims, multi_mode_multiply

ORACLE_LIMIT = 4096
PD_RTOL = 1e-12


class NotPositiveDefinite(ValueError):
    """Raised when a Kronecker sum is required to be positive definite and is not."""


@dataclass(frozen=True)
class KroneckerSum:
    dims: Dims
    factors: tuple[np.ndarray, ...]

    def __init__(self, factors: Sequence, dims=None):
        factors = tuple(as_sym(f, check=True) for f in factors)
        dims = as_dims(dims if dims is not None else [f.shape[0] for f in factors])
        if len(factors) != dims.L:
            raise ValueError(f"{len(factors)} factors for {dims.L} modes")
        for k, (f, dk) in enumerate(zip(factors, dims)):
            if f.shape != (dk, dk):
                raise ValueError(f"factor {k} has shape {f.shape}, expected ({dk}, {dk})")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "factors", factors)

    @classmethod
    def identity(cls, dims, scale: float = 1.0) -> "KroneckerSum":
        """``scale * I_p`` with the scale spread evenly across factors."""
        dims = as_dims(dims)
        return cls([scale / dims.L * np.eye(dk) for dk in dims], dims)

    @classmethod
    def zeros(cls, dims) -> "KroneckerSum":
        dims = as_dims(dims)
        return cls([np.zeros((dk, dk)) for dk in dims], dims)

    def _check(self, other: "KroneckerSum") -> None:
        if self.dims != other.dims:
            raise ValueError(f"dims mismatch {self.dims} vs {other.dims}")

    def __add__(self, other: "KroneckerSum") -> "KroneckerSum":
        self._check(other)
        return KroneckerSum([a + b for a, b in zip(self.factors, other.factors)], self.dims)

    def __sub__(self, other: "KroneckerSum") -> "KroneckerSum":
        self._check(other)
        return KroneckerSum([a - b for a, b in zip(self.factors, other.factors)], self.dims)

    def __mul__(self, c: float) -> "KroneckerSum":
        return KroneckerSum([c * a for a in self.factors], self.dims)

    __rmul__ = __mul__

    def add_identity(self, c: float, k: int = 0) -> "KroneckerSum":
        """Return the representation of ``Omega + c I`` (shift placed on factor k)."""
        fs = list(self.factors)
        fs[k] = fs[k] + c * np.eye(fs[k].shape[0])
        return KroneckerSum(fs, self.dims)


@dataclass(frozen=True)
class KSEigen:
    dims: Dims
    bases: tuple[np.ndarray, ...]
    spectra: tuple[np.ndarray, ...]

    def grid(self) -> np.ndarray:
        """Eigensum grid: ``grid[i1, .., iL] = sum_k spectra[k][ik]``."""
        g = np.zeros(self.dims.d)
        for k, lam in enumerate(self.spectra):
            shape = [1] * self.dims.L
            shape[k] = -1
            g = g + lam.reshape(shape)
        return g

    @property
    def min_eigsum(self) -> float:
        return float(sum(lam[0] for lam in self.spectra))

    @property
    def max_eigsum(self) -> float:
        return float(sum(lam[-1] for lam in self.spectra))

    def is_pd(self) -> bool:
        lo, hi = self.min_eigsum, self.max_eigsum
        return lo > PD_RTOL * max(abs(lo), abs(hi))

    def require_pd(self) -> None:
        if not self.is_pd():
            raise NotPositiveDefinite(
                f"Kronecker sum is not positive definite (min eigensum {self.min_eigsum:.6g})"
            )


@dataclass(frozen=True)
class TraceZeroDecomp:
    delta_prime: tuple[np.ndarray, ...]
    tau: float

    def reassemble(self, dims) -> KroneckerSum:
        return KroneckerSum(self.delta_prime, dims).add_identity(self.tau)


def _kron_eye(parts: Sequence[np.ndarray]) -> np.ndarray:
    out = np.ones((1, 1))
    for a in parts:
        out = np.kron(out, a)
    return out


def assemble_dense(K: KroneckerSum, limit: int = ORACLE_LIMIT) -> np.ndarray:
    """Materialize the ``p x p`` matrix.  Intended as a small-p oracle."""
    p = K.dims.p
    if p > limit:
        raise ValueError(f"p = {p} exceeds the dense oracle limit {limit}")
    out = np.zeros((p, p))
    for k, psi in enumerate(K.factors):
        parts = [np.eye(dk) for dk in K.dims]
        parts[k] = psi
        out += _kron_eye(parts)
    return out


def ks_eigen(K: KroneckerSum, method: str = "lapack") -> KSEigen:
    pairs = [sym_eig(f, method=method) for f in K.factors]
    return KSEigen(K.dims, tuple(e.Q for e in pairs), tuple(e.lam for e in pairs))


def min_max_eigsum(E: KSEigen) -> tuple[float, float]:
    return E.min_eigsum, E.max_eigsum


def logdet(E: KSEigen) -> float:
    E.require_pd()
    return float(np.sum(np.log(E.grid())))


def _inverse_grid_marginals(E: KSEigen, power: float = -1.0) -> list[np.ndarray]:
    g = E.grid() ** power
    L = E.dims.L
    return [g.sum(axis=tuple(j for j in range(L) if j != k)) for k in range(L)]


def partial_trace_inverse(E: KSEigen, k: int | None = None):
    """Partial trace of ``Omega^{-1}`` over every mode except ``k``.

    Returns the ``d_k x d_k`` matrix, or the list over all modes when ``k`` is
    None (one pass over the grid serves every mode).
    """
    E.require_pd()
    D = _inverse_grid_marginals(E)
    mats = [(U * Dk) @ U.T for U, Dk in zip(E.bases, D)]
    mats = [0.5 * (m + m.T) for m in mats]
    return mats if k is None else mats[k]


def inverse_diagonal(E: KSEigen) -> np.ndarray:
    """Diagonal of ``Omega^{-1}`` arranged as a tensor of shape ``dims``."""
    E.require_pd()
    return multi_mode_multiply(1.0 / E.grid(), [U * U for U in E.bases])


def inverse_trace(E: KSEigen) -> float:
    E.require_pd()
    return float(np.sum(1.0 / E.grid()))


def tracezero_decompose(K: KroneckerSum) -> TraceZeroDecomp:
    dims = K.dims
    traces = [float(np.trace(f)) for f in K.factors]
    tau = sum(mk * tr for mk, tr in zip(dims.m, traces)) / dims.p
    delta = tuple(f - (tr / dk) * np.eye(dk) for f, tr, dk in zip(K.factors, traces, dims))
    return TraceZeroDecomp(delta, tau)


def ks_frobenius(K: KroneckerSum) -> float:
    """Frobenius norm of the represented matrix, from the trace-zero parts."""
    dec = tracezero_decompose(K)
    total = K.dims.p * dec.tau ** 2
    for mk, dp in zip(K.dims.m, dec.delta_prime):
        total += mk * (np.sum(offdiag(dp) ** 2) + np.sum(np.diag(dp) ** 2))
    return math.sqrt(total)


def ks_operator_norm(K: KroneckerSum) -> float:
    lo, hi = min_max_eigsum(ks_eigen(K))
    return max(abs(lo), abs(hi))


def apply_inverse_sqrt(E: KSEigen, t: np.ndarray) -> np.ndarray:
    """Apply ``Omega^{-1/2}`` to a tensor (identified with its vectorization)."""
    E.require_pd()
    t = np.asarray(t, dtype=np.float64)
    if t.shape != E.dims.d:
        raise ValueError(f"tensor shape {t.shape} does not match dims {E.dims}")
    r = multi_mode_multiply(t, [U.T for U in E.bases])
    r = r / np.sqrt(E.grid())
    return multi_mode_multiply(r, list(E.bases))
