"""Symmetric eigensolvers, off-diagonal soft-thresholding and spectral bounds."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

SYM_TOL = 1e-12


class EigenPair(NamedTuple):
    Q: np.ndarray
    lam: np.ndarray


def as_sym(a, check: bool = False) -> np.ndarray:
    """Return a symmetrized float64 copy of ``a``.

    With ``check=True`` an asymmetry larger than ``SYM_TOL`` relative to the
    largest entry raises instead of being averaged away.
    """
    a = np.array(a, dtype=np.float64, ndmin=2)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    if check:
        scale = max(np.abs(a).max(initial=0.0), 1.0)
        if np.abs(a - a.T).max(initial=0.0) > SYM_TOL * scale:
            raise ValueError("matrix is not symmetric")
    return 0.5 * (a + a.T)


def _canonicalize(lam: np.ndarray, Q: np.ndarray) -> EigenPair:
    order = np.argsort(lam, kind="stable")
    lam = lam[order]
    Q = Q[:, order]
    # largest-magnitude component of each eigenvector is made positive
    idx = np.argmax(np.abs(Q), axis=0)
    signs = np.sign(Q[idx, np.arange(Q.shape[1])])
    signs[signs == 0] = 1.0
    return EigenPair(Q * signs, lam)


def jacobi_eig(a, tol: float = 1e-13, max_sweeps: int = 100) -> EigenPair:
    """Cyclic Jacobi eigendecomposition.

    Sweeps rotate every upper-triangular pair in row order until the
    off-diagonal Frobenius mass drops below ``tol`` times the total mass.
    """
    A = as_sym(a)
    n = A.shape[0]
    V = np.eye(n)
    total = math.sqrt(float(np.sum(A * A))) or 1.0
    for _ in range(max_sweeps):
        off = float(np.linalg.norm(A - np.diag(np.diag(A))))
        if off <= tol * total:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                h = A[q, q] - A[p, p]
                if abs(apq) < 1e-150 * abs(h):
                    t = apq / h  # theta too large to square
                else:
                    theta = h / (2.0 * apq)
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                Ap = A[:, p].copy()
                Aq = A[:, q].copy()
                A[:, p] = c * Ap - s * Aq
                A[:, q] = s * Ap + c * Aq
                Ap = A[p, :].copy()
                Aq = A[q, :].copy()
                A[p, :] = c * Ap - s * Aq
                A[q, :] = s * Ap + c * Aq
                A[p, q] = A[q, p] = 0.0
                Vp = V[:, p].copy()
                V[:, p] = c * Vp - s * V[:, q]
                V[:, q] = s * Vp + c * V[:, q]
    else:
        raise RuntimeError("Jacobi sweeps did not converge")
    return _canonicalize(np.diag(A).copy(), V)


def sym_eig(a, method: str = "lapack") -> EigenPair:
    """Eigendecomposition of a symmetric matrix, ascending eigenvalues.

    ``method="lapack"`` uses ``numpy.linalg.eigh``; ``"jacobi"`` uses
    :func:`jacobi_eig`.  Both return the same canonical ordering and signs.
    """
    A = as_sym(a)
    if method == "jacobi":
        return jacobi_eig(A)
    if method != "lapack":
        raise ValueError(f"unknown eigensolver {method!r}")
    lam, Q = np.linalg.eigh(A)
    return _canonicalize(lam, Q)


def soft_threshold_offdiag(a, theta: float) -> np.ndarray:
    """Proximal map of ``theta * sum_{i != j} |a_ij|``; the diagonal is untouched."""
    if theta < 0:
        raise ValueError(f"threshold must be nonnegative, got {theta}")
    a = np.asarray(a, dtype=np.float64)
    out = np.sign(a) * np.maximum(np.abs(a) - theta, 0.0)
    np.fill_diagonal(out, np.diag(a))
    return 0.5 * (out + out.T)


def spectral_bounds(a) -> tuple[float, float]:
    lam = sym_eig(a).lam
    return float(lam[0]), float(lam[-1])


def offdiag(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=np.float64)
    np.fill_diagonal(out, 0.0)
    return out
