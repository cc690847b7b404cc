"""Estimation-error norms, condition numbers, rate-bound shapes and support scores."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .ksum import KroneckerSum, ks_frobenius, ks_operator_norm
from .model import GroundTruth, support_of

DEFAULT_SUPPORT_THRESHOLD = 1e-8


@dataclass(frozen=True)
class ErrorReport:
    frob_abs: float
    op_abs: float
    frob_rel_op: float
    op_rel: float
    frob_rel: float

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class BoundReport:
    main_frob: float
    main_op: float
    orig_frob: float
    orig_op: float
    cubic: float
    aspect: float
    kappa: float
    s: int
    a3_satisfied: bool

    def to_json(self) -> dict:
        return asdict(self)


def condition_number(gt: GroundTruth) -> float:
    gt.eigen.require_pd()
    return gt.eigen.max_eigsum / gt.eigen.min_eigsum


def error_report(omega_hat: KroneckerSum, gt: GroundTruth) -> ErrorReport:
    if omega_hat.dims != gt.dims:
        raise ValueError(f"dims mismatch {omega_hat.dims} vs {gt.dims}")
    delta = omega_hat - gt.omega0
    frob = ks_frobenius(delta)
    op = ks_operator_norm(delta)
    lo, hi = gt.eigen.min_eigsum, gt.eigen.max_eigsum
    omega_op = max(abs(lo), abs(hi))
    return ErrorReport(
        frob_abs=frob,
        op_abs=op,
        frob_rel_op=frob / omega_op,
        op_rel=op / omega_op,
        frob_rel=frob / ks_frobenius(gt.omega0),
    )


def bound_report(gt: GroundTruth, n: int) -> BoundReport:
    """Right-hand sides of the rate bounds with every absolute constant set to 1."""
    dims = gt.dims
    L, p, m_min, d_max = dims.L, dims.p, dims.m_min, dims.d_max
    logp = math.log(p) if p > 1 else 0.0
    kappa = condition_number(gt)
    s = gt.s
    new = s * logp + L * p
    old = (s + p) * logp
    main_frob = kappa * math.sqrt(new / (n * m_min))
    main_op = math.sqrt(L + 1) * kappa * math.sqrt(new / (n * m_min ** 2))
    orig_frob = kappa * math.sqrt(L + 1) * math.sqrt(old / (n * m_min))
    orig_op = kappa * (L + 1) * math.sqrt(old / (n * m_min ** 2))
    sparsity = sum(sk * logp / dk for sk, dk in zip(gt.s_k, dims))
    cubic = kappa * math.sqrt(L * d_max / m_min) * math.sqrt(sparsity + L)
    a3 = n * m_min ** 2 >= (L + 1) * kappa ** 4 * new
    return BoundReport(main_frob, main_op, orig_frob, orig_op, cubic, d_max / m_min, kappa, s, a3)


@dataclass(frozen=True)
class SupportScore:
    precision: float
    recall: float
    f1: float
    true_edges: int
    est_edges: int


def support_metrics(omega_hat: KroneckerSum, gt: GroundTruth,
                    threshold: float = DEFAULT_SUPPORT_THRESHOLD) -> list[SupportScore]:
    """Per-factor edge recovery.  Empty denominators score 1 (nothing to miss)."""
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    out = []
    for psi, truth in zip(omega_hat.factors, gt.support):
        est = support_of(psi, threshold)
        tp = len(est & truth)
        prec = tp / len(est) if est else 1.0
        rec = tp / len(truth) if truth else 1.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec > 0 else 0.0
        out.append(SupportScore(prec, rec, f1, len(truth), len(est)))
    return out
