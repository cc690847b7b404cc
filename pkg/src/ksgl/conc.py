"""Monte-Carlo statistics for the concentration events behind the diagonal bound.

For samples drawn from a known ground truth this module evaluates

* ``t_margin``: per mode, the largest off-diagonal Gram deviation
  ``max_{i != j} |S^k_ij - Sigma0^(k)_ij|`` over ``sqrt(log p / (n m_k))``;
* ``g_ratio``: per mode, ``||y^k||_2 / (||Sigma0||_2 (sqrt(p) v d_k))`` where
  ``y^k_i = m_k (S^k_ii - Sigma0^(k)_ii)`` is the centred squared row norm
  of the mode-k unfolding.  ``||y||_2`` is the exact supremum of
  ``<delta, y>`` over the unit sphere, so no epsilon-net is needed;
* ``d0_ratio``: ``|tr(S_hat) - tr(Sigma0)| / (||Sigma0||_2 sqrt(p log p))``;
* ``diag_ratio``: the supremum over Kronecker-sum directions of
  ``|<diag D, S_hat - Sigma0>| / ||diag D||_F``, divided by ``||Sigma0||_2`` and
  by ``sqrt(d_max L) (1 + sqrt(d_max / m_min))``.

Expectations are computed from ``Sigma0`` spectrally, never by simulation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import rng as _rng
from .gram import FactorGrams, factor_grams, population_factor_cov
from .io import csv_text
from .ksum import inverse_trace
from .model import GroundTruth, ModelSpec, gen_model, sample
from .tensor import as_dims


def _logp(p: int) -> float:
    return math.log(p) if p > 1 else 0.0


def _grams(samples_or_grams) -> FactorGrams:
    if isinstance(samples_or_grams, FactorGrams):
        return samples_or_grams
    return factor_grams(samples_or_grams)


def event_T_margin(samples, gt: GroundTruth) -> list[float]:
    g = _grams(samples)
    logp = _logp(g.dims.p)
    out = []
    for S, C, mk in zip(g.S, population_factor_cov(gt), g.dims.m):
        if S.shape[0] < 2 or logp == 0.0:
            out.append(0.0)
            continue
        dev = np.abs(S - C)
        np.fill_diagonal(dev, 0.0)
        out.append(float(dev.max()) / math.sqrt(logp / (g.n * mk)))
    return out


def diag_deviation_vectors(samples, gt: GroundTruth) -> list[np.ndarray]:
    """``y^k_i = m_k (S^k_ii - Sigma0^(k)_ii)``: sample-averaged centred row energies."""
    g = _grams(samples)
    return [mk * (np.diag(S) - np.diag(C)) for S, C, mk in zip(g.S, population_factor_cov(gt), g.dims.m)]


def sphere_sup(y: np.ndarray) -> float:
    """``sup_{||delta||=1} <delta, y>``, attained at ``y / ||y||``."""
    return float(np.linalg.norm(y))


def event_G_stat(samples, gt: GroundTruth) -> list[float]:
    dims = gt.dims
    sig = gt.sigma_norm
    return [
        sphere_sup(y) / (sig * max(math.sqrt(dims.p), dk))
        for y, dk in zip(diag_deviation_vectors(samples, gt), dims)
    ]


def trace_deviation(samples, gt: GroundTruth) -> float:
    g = _grams(samples)
    return g.energy - inverse_trace(gt.eigen)


def event_D0_stat(samples, gt: GroundTruth) -> float:
    p = gt.dims.p
    denom = gt.sigma_norm * math.sqrt(p * _logp(p))
    dev = abs(trace_deviation(samples, gt))
    if denom == 0.0:
        return 0.0 if dev == 0.0 else math.inf
    return dev / denom


def diag_subspace_sup(samples, gt: GroundTruth) -> float:
    """Norm of the projection of ``diag(S_hat - Sigma0)`` onto the diagonal part of
    the Kronecker-sum space.

    The projection splits orthogonally into the constant direction (the mean
    deviation ``mu``) and, per mode, the trace-zero vector ``y^k / m_k - mu``
    replicated ``m_k`` times, so its squared norm is
    ``p mu^2 + sum_k m_k ||y^k / m_k - mu||^2``.
    """
    dims = gt.dims
    mu = trace_deviation(samples, gt) / dims.p
    total = dims.p * mu * mu
    for y, mk in zip(diag_deviation_vectors(samples, gt), dims.m):
        a = y / mk - mu
        total += mk * float(a @ a)
    return math.sqrt(total)


def diag_functional_norm(samples, gt: GroundTruth) -> float:
    return diag_subspace_sup(samples, gt)


def diag_ratio(samples, gt: GroundTruth) -> float:
    dims = gt.dims
    scale = math.sqrt(dims.d_max * dims.L) * (1.0 + math.sqrt(dims.d_max / dims.m_min))
    return diag_subspace_sup(samples, gt) / (gt.sigma_norm * scale)


@dataclass(frozen=True)
class ConcStats:
    t_margin: tuple[float, ...]
    g_ratio: tuple[float, ...]
    d0_ratio: float
    diag_ratio: float


def conc_stats(samples, gt: GroundTruth) -> ConcStats:
    g = _grams(samples)
    return ConcStats(
        tuple(event_T_margin(g, gt)),
        tuple(event_G_stat(g, gt)),
        event_D0_stat(g, gt),
        diag_ratio(g, gt),
    )


@dataclass(frozen=True)
class SweepConfig:
    dims: tuple[tuple[int, ...], ...] = ()
    n: tuple[int, ...] = (1,)
    innovations: tuple[str, ...] = ("gaussian",)
    trials: int = 1
    model: dict = field(default_factory=dict)

    @classmethod
    def from_json(cls, obj: dict) -> "SweepConfig":
        known = {"dims", "n", "innovations", "trials", "model"}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown sweep fields: {sorted(unknown)}")
        n = obj.get("n", (1,))
        cfg = cls(
            dims=tuple(tuple(int(x) for x in d) for d in obj.get("dims", ())),
            n=(int(n),) if isinstance(n, int) else tuple(int(x) for x in n),
            innovations=tuple(obj.get("innovations", ("gaussian",))),
            trials=int(obj.get("trials", 1)),
            model=dict(obj.get("model", {})),
        )
        if cfg.trials < 1:
            raise ValueError("trials must be >= 1")
        if any(n < 1 for n in cfg.n):
            raise ValueError("sample counts must be >= 1")
        for d in cfg.dims:
            as_dims(d)
        return cfg

    def points(self):
        return list(itertools.product(self.dims, self.n, self.innovations))


HEADER = ["point", "L", "dims", "n", "innovation", "seed", "trial",
          "t_margin", "g_ratio", "d0_ratio", "diag_ratio", "t_margin_modes", "g_ratio_modes"]


def _point_truth(cfg: SweepConfig, point: int, dims, innovation: str, master_seed: int) -> GroundTruth:
    model = {"graphs": "chain", **cfg.model, "dims": list(dims), "innovation": innovation,
             "seed": _rng.derive_seed(master_seed, point)}
    return gen_model(ModelSpec.from_json(model))


def run_trial(gt: GroundTruth, n: int, seed: int) -> ConcStats:
    return conc_stats(sample(gt, n, seed), gt)


def run_suite(cfg: SweepConfig, master_seed: int, executor=None) -> list[list]:
    """One row per (sweep point, trial), ordered by point then trial."""
    jobs = []
    for point, (dims, n, innovation) in enumerate(cfg.points()):
        gt = _point_truth(cfg, point, dims, innovation, master_seed)
        for trial in range(cfg.trials):
            seed = _rng.derive_seed(master_seed, point, trial)
            jobs.append(((point, dims, n, innovation, seed, trial), gt))
    mapper = executor.map if executor is not None else map
    stats = list(mapper(run_trial, [gt for _, gt in jobs], [j[2] for j, _ in jobs], [j[4] for j, _ in jobs]))
    rows = []
    for ((point, dims, n, innovation, seed, trial), _), st in zip(jobs, stats):
        rows.append([
            point, len(dims), "x".join(map(str, dims)), n, innovation, seed, trial,
            max(st.t_margin), max(st.g_ratio), st.d0_ratio, st.diag_ratio,
            ";".join(format(v, ".17g") for v in st.t_margin),
            ";".join(format(v, ".17g") for v in st.g_ratio),
        ])
    return rows


def suite_csv(rows: Sequence[Sequence]) -> str:
    return csv_text(HEADER, rows)
