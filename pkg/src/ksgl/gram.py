"""Mode-k Gram matrices, factor-wise marginal covariances and penalty calibration."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ksum import KroneckerSum, partial_trace_inverse
from .tensor import Dims, as_dims, unfold


@dataclass(frozen=True)
class FactorGrams:
    dims: Dims
    n: int
    S: tuple[np.ndarray, ...]

    @property
    def energy(self) -> float:
        """Average squared Frobenius norm of the samples, ``m_k tr(S^k)``."""
        return self.dims.m[0] * float(np.trace(self.S[0]))

    def merge(self, other: "FactorGrams") -> "FactorGrams":
        """Pool two Gram summaries computed on disjoint sample batches."""
        if self.dims != other.dims:
            raise ValueError("dims mismatch")
        n = self.n + other.n
        S = tuple((self.n * a + other.n * b) / n for a, b in zip(self.S, other.S))
        return FactorGrams(self.dims, n, S)


@dataclass(frozen=True)
class PenaltySet:
    rho: tuple[float, ...]
    delta: tuple[float, ...]
    epsilon: tuple[float, ...]
    sigma_scale: float


def factor_grams(samples: Sequence[np.ndarray]) -> FactorGrams:
    """``S^k = (1 / (n m_k)) sum_i X_(k,i) X_(k,i)^T`` for every mode k."""
    samples = [np.asarray(x, dtype=np.float64) for x in samples]
    if not samples:
        raise ValueError("factor_grams needs at least one sample")
    dims = as_dims(samples[0].shape)
    if any(x.shape != dims.d for x in samples):
        raise ValueError("samples have mixed dims")
    n = len(samples)
    S = []
    for k, mk in enumerate(dims.m):
        acc = np.zeros((dims[k], dims[k]))
        for x in samples:
            Xk = unfold(x, k)
            acc += Xk @ Xk.T
        acc /= n * mk
        S.append(0.5 * (acc + acc.T))
    return FactorGrams(dims, n, tuple(S))


def grams_from_matrices(S: Sequence[np.ndarray], n: int = 1) -> FactorGrams:
    S = tuple(np.asarray(s, dtype=np.float64) for s in S)
    return FactorGrams(as_dims([s.shape[0] for s in S]), int(n), S)


def population_factor_cov(gt, k: int | None = None):
    """``Sigma_0^{(k)} = PT_k(Omega_0^{-1}) / m_k``; all modes when ``k`` is None."""
    pts = partial_trace_inverse(gt.eigen)
    covs = [pt / mk for pt, mk in zip(pts, gt.dims.m)]
    return covs if k is None else covs[k]


def population_grams(gt) -> FactorGrams:
    return FactorGrams(gt.dims, 1, tuple(population_factor_cov(gt)))


def ks_sample_inner(g: FactorGrams, K: KroneckerSum) -> float:
    """``<S_hat, Omega>`` through the mode Grams: ``sum_k m_k <S^k, Psi_k>``."""
    if g.dims != K.dims:
        raise ValueError(f"dims mismatch {g.dims} vs {K.dims}")
    return float(sum(mk * np.sum(S * P) for mk, S, P in zip(g.dims.m, g.S, K.factors)))


def penalties(dims, n: int, sigma_scale: float, epsilon=0.5) -> PenaltySet:
    """``delta_k = sigma_scale * sqrt(log p / (n m_k))`` and ``rho_k = delta_k / eps_k``."""
    dims = as_dims(dims)
    if not sigma_scale > 0:
        raise ValueError("sigma_scale must be positive")
    if n < 1:
        raise ValueError("n must be >= 1")
    eps = tuple(float(e) for e in (np.broadcast_to(epsilon, (dims.L,))))
    if any(not 0 < e < 1 for e in eps):
        raise ValueError(f"each epsilon must lie in (0, 1), got {eps}")
    logp = math.log(dims.p) if dims.p > 1 else 0.0
    if dims.m_min < logp:
        warnings.warn(
            f"min_k m_k = {dims.m_min} < log p = {logp:.3f}; penalty calibration is outside its regime",
            stacklevel=2,
        )
    delta = tuple(sigma_scale * math.sqrt(logp / (n * mk)) for mk in dims.m)
    rho = tuple(dk / ek for dk, ek in zip(delta, eps))
    return PenaltySet(rho, delta, eps, float(sigma_scale))


def plugin_sigma_scale(g: FactorGrams) -> float:
    """Largest mode-Gram spectral norm, used when the truth is unknown."""
    return max(float(np.linalg.eigvalsh(S)[-1]) for S in g.S)


def constant_penalties(dims, rho) -> PenaltySet:
    dims = as_dims(dims)
    rho = tuple(float(r) for r in np.broadcast_to(rho, (dims.L,)))
    if any(r < 0 for r in rho):
        raise ValueError("penalties must be nonnegative")
    return PenaltySet(rho, rho, (1.0,) * dims.L, float("nan"))
