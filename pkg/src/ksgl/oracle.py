"""Dense-matrix cross-checks for every factor-level Kronecker-sum routine.

Each check builds a random instance, computes a quantity through the
factor-scale code path and through the materialized ``p x p`` matrix, and
compares the two.  Used by the ``oracle-check`` CLI command and the tests.
"""

from __future__ import annotations

import contextlib
import string
from dataclasses import dataclass
from typing import Callable, Iterator
from unittest import mock

import numpy as np

from . import gram as _gram
from .gram import factor_grams, ks_sample_inner
from .ksum import (
    KroneckerSum, apply_inverse_sqrt, assemble_dense, ks_eigen, ks_frobenius, ks_operator_norm,
    logdet, partial_trace_inverse, tracezero_decompose,
)
from .tensor import Dims, vec

DEFAULT_DIMS = ([2], [3], [2, 2], [2, 3], [3, 2], [4, 4], [2, 2, 2], [2, 3, 4], [3, 3, 3],
                [8, 8], [2, 2, 2, 2], [4, 4, 4], [16, 16], [8, 8, 8])
REL_TOL = 1e-9


@dataclass(frozen=True)
class CheckResult:
    name: str
    dims: tuple[int, ...]
    error: float
    tol: float

    @property
    def ok(self) -> bool:
        return bool(self.error <= self.tol)


def random_ksum(rng: np.random.Generator, dims, pd: bool = True) -> KroneckerSum:
    dims = Dims(dims)
    factors = []
    for dk in dims:
        a = rng.standard_normal((dk, dk))
        factors.append((a + a.T) / 2)
    K = KroneckerSum(factors, dims)
    if pd:
        lo = ks_eigen(K).min_eigsum
        K = K.add_identity(0.5 + rng.random() - lo)
    return K


def dense_partial_trace(A: np.ndarray, dims, k: int) -> np.ndarray:
    """Trace out every mode except ``k`` from a ``p x p`` matrix."""
    d = tuple(dims)
    L = len(d)
    rows = string.ascii_lowercase[:L]
    cols = "".join(rows[j] if j != k else string.ascii_uppercase[j] for j in range(L))
    return np.einsum(f"{rows}{cols}->{rows[k]}{cols[k]}", A.reshape(d + d))


def _rel(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b), initial=0.0) / max(1.0, float(np.max(np.abs(b), initial=0.0))))


def check_additivity(rng, dims):
    K = random_ksum(rng, dims, pd=False)
    grid = np.sort(ks_eigen(K).grid().ravel())
    return _rel(grid, np.linalg.eigvalsh(assemble_dense(K)))


def check_logdet(rng, dims):
    K = random_ksum(rng, dims)
    sign, ld = np.linalg.slogdet(assemble_dense(K))
    assert sign > 0
    return _rel(logdet(ks_eigen(K)), ld)


def check_partial_trace(rng, dims):
    K = random_ksum(rng, dims)
    inv = np.linalg.inv(assemble_dense(K))
    pts = partial_trace_inverse(ks_eigen(K))
    return max(_rel(pt, dense_partial_trace(inv, dims, k)) for k, pt in enumerate(pts))


def check_tracezero(rng, dims):
    K = random_ksum(rng, dims, pd=False)
    dec = tracezero_decompose(K)
    err = max(abs(np.trace(d)) for d in dec.delta_prime)
    return max(err, _rel(assemble_dense(dec.reassemble(K.dims)), assemble_dense(K)))


def check_frobenius(rng, dims):
    K = random_ksum(rng, dims, pd=False)
    return _rel(ks_frobenius(K), np.linalg.norm(assemble_dense(K)))


def check_operator_norm(rng, dims):
    K = random_ksum(rng, dims, pd=False)
    return _rel(ks_operator_norm(K), np.linalg.norm(assemble_dense(K), 2))


def check_inverse_sqrt(rng, dims):
    K = random_ksum(rng, dims)
    t = rng.standard_normal(tuple(dims))
    lam, Q = np.linalg.eigh(assemble_dense(K))
    dense = (Q / np.sqrt(lam)) @ Q.T @ vec(t)
    return _rel(vec(apply_inverse_sqrt(ks_eigen(K), t)), dense)


def check_projection(rng, dims):
    K = random_ksum(rng, dims, pd=False)
    n = 3
    samples = [rng.standard_normal(tuple(dims)) for _ in range(n)]
    S_hat = sum(np.outer(vec(x), vec(x)) for x in samples) / n
    dense = float(np.sum(S_hat * assemble_dense(K)))
    return _rel(ks_sample_inner(factor_grams(samples), K), dense)


CHECKS: dict[str, Callable] = {
    "eigensum additivity": check_additivity,
    "log-determinant": check_logdet,
    "partial trace of inverse": check_partial_trace,
    "trace-zero reassembly": check_tracezero,
    "frobenius norm": check_frobenius,
    "operator norm": check_operator_norm,
    "inverse square root": check_inverse_sqrt,
    "projection identity": check_projection,
}


def _corrupt_unfold(t, k):
    # wrong layout: plain reshape mixes entries of different fibers
    return np.asarray(t).reshape(t.shape[k], -1)


@contextlib.contextmanager
def fault(name: str | None) -> Iterator[None]:
    """Test hook: ``fault("unfold")`` swaps in a broken mode-k unfolding for the Gram code."""
    if name is None:
        yield
    elif name == "unfold":
        with mock.patch.object(_gram, "unfold", _corrupt_unfold):
            yield
    else:
        raise ValueError(f"unknown fault {name!r}")


def run_checks(max_p: int, instances: int = 5, seed: int = 0, dims_list=DEFAULT_DIMS,
               tol: float = REL_TOL, inject: str | None = None) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    results = []
    with fault(inject):
        for name, fn in CHECKS.items():
            for dims in dims_list:
                if Dims(dims).p > max_p:
                    continue
                err = max(fn(rng, dims) for _ in range(instances))
                results.append(CheckResult(name, tuple(dims), err, tol))
    return results
