"""Ground-truth Kronecker-sum precision models and tensor sampling."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import rng as _rng
from .ksum import KroneckerSum, KSEigen, apply_inverse_sqrt, ks_eigen
from .tensor import Dims, as_dims


@dataclass(frozen=True)
class Graph:
    kind: str  # "chain" | "erdos_renyi" | "diagonal"
    edges: int = 0

    @classmethod
    def parse(cls, obj) -> "Graph":
        """Accept ``"chain"``, ``"erdos_renyi:5"`` or ``{"kind": ..., "edges": ...}``."""
        if isinstance(obj, Graph):
            return obj
        if isinstance(obj, dict):
            g = cls(str(obj["kind"]), int(obj.get("edges", 0)))
        else:
            kind, _, edges = str(obj).partition(":")
            g = cls(kind, int(edges) if edges else 0)
        if g.kind not in ("chain", "erdos_renyi", "diagonal"):
            raise ValueError(f"unknown graph kind {g.kind!r}")
        if g.edges < 0:
            raise ValueError("edge count must be nonnegative")
        return g

    def to_json(self):
        return {"kind": self.kind, "edges": self.edges} if self.kind == "erdos_renyi" else self.kind


@dataclass(frozen=True)
class ModelSpec:
    dims: Dims
    graphs: tuple[Graph, ...]
    edge_weight_range: tuple[float, float] = (-0.4, 0.4)
    target_min_eigsum: float = 1.0
    innovation: str = "gaussian"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "dims", as_dims(self.dims))
        graphs = self.graphs
        if isinstance(graphs, (str, dict, Graph)):
            graphs = [graphs] * self.dims.L
        graphs = tuple(Graph.parse(g) for g in graphs)
        object.__setattr__(self, "graphs", graphs)
        object.__setattr__(self, "edge_weight_range", tuple(float(x) for x in self.edge_weight_range))
        if len(graphs) != self.dims.L:
            raise ValueError(f"{len(graphs)} graph kinds for {self.dims.L} modes")
        for g, dk in zip(graphs, self.dims):
            if g.kind == "erdos_renyi" and g.edges > dk * (dk - 1) // 2:
                raise ValueError(f"cannot place {g.edges} edges on {dk} nodes")
        lo, hi = self.edge_weight_range
        if lo > hi:
            raise ValueError("edge_weight_range must satisfy lo <= hi")
        if not self.target_min_eigsum > 0:
            raise ValueError("target_min_eigsum must be positive")
        if self.innovation not in _rng.INNOVATIONS:
            raise ValueError(f"unknown innovation {self.innovation!r}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def to_json(self) -> dict:
        return {
            "dims": list(self.dims.d),
            "graphs": [g.to_json() for g in self.graphs],
            "edge_weight_range": list(self.edge_weight_range),
            "target_min_eigsum": self.target_min_eigsum,
            "innovation": self.innovation,
            "seed": int(self.seed),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ModelSpec":
        known = {"dims", "graphs", "edge_weight_range", "target_min_eigsum", "innovation", "seed"}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown model fields: {sorted(unknown)}")
        if "dims" not in obj:
            raise ValueError("model spec needs 'dims'")
        return cls(
            dims=obj["dims"],
            graphs=obj.get("graphs", "chain"),
            edge_weight_range=obj.get("edge_weight_range", (-0.4, 0.4)),
            target_min_eigsum=obj.get("target_min_eigsum", 1.0),
            innovation=obj.get("innovation", "gaussian"),
            seed=int(obj.get("seed", 0)),
        )


@dataclass(frozen=True)
class GroundTruth:
    omega0: KroneckerSum
    eigen: KSEigen
    support: tuple[frozenset, ...]
    innovation: str = "gaussian"
    spec: ModelSpec | None = field(default=None, compare=False)

    @property
    def dims(self) -> Dims:
        return self.omega0.dims

    @property
    def s_k(self) -> tuple[int, ...]:
        return tuple(2 * len(sup) for sup in self.support)

    @property
    def s(self) -> int:
        return sum(mk * sk for mk, sk in zip(self.dims.m, self.s_k))

    @property
    def sigma_norm(self) -> float:
        """``||Sigma_0||_2 = 1 / min eigensum``."""
        return 1.0 / self.eigen.min_eigsum


def support_of(psi: np.ndarray, threshold: float = 0.0) -> frozenset:
    """Unordered off-diagonal pairs ``(i, j)``, ``i < j``, with ``|psi_ij| > threshold``."""
    i, j = np.nonzero(np.triu(np.abs(psi) > threshold, k=1))
    return frozenset(zip(i.tolist(), j.tolist()))


def _edges(graph: Graph, d: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    if graph.kind == "diagonal" or d < 2:
        return []
    if graph.kind == "chain":
        return [(i, i + 1) for i in range(d - 1)]
    pairs = list(itertools.combinations(range(d), 2))
    pick = rng.choice(len(pairs), size=graph.edges, replace=False)
    return sorted(pairs[i] for i in pick)


def from_factors(factors: Sequence[np.ndarray], dims=None, innovation: str = "gaussian") -> GroundTruth:
    omega0 = KroneckerSum(factors, dims)
    return GroundTruth(
        omega0=omega0,
        eigen=ks_eigen(omega0),
        support=tuple(support_of(f) for f in omega0.factors),
        innovation=innovation,
    )


def gen_model(spec: ModelSpec) -> GroundTruth:
    """Place uniform edge weights on each factor graph, then lift factor 1 so the
    smallest eigensum equals ``spec.target_min_eigsum``."""
    lo, hi = spec.edge_weight_range
    factors = []
    for k, (graph, dk) in enumerate(zip(spec.graphs, spec.dims)):
        rng = _rng.stream(_rng.derive_seed(spec.seed, k))
        psi = np.zeros((dk, dk))
        for i, j in _edges(graph, dk, rng):
            psi[i, j] = psi[j, i] = rng.uniform(lo, hi)
        factors.append(psi)
    E = ks_eigen(KroneckerSum(factors, spec.dims))
    factors[0] = factors[0] + (spec.target_min_eigsum - E.min_eigsum) * np.eye(spec.dims[0])
    gt = from_factors(factors, spec.dims, spec.innovation)
    return GroundTruth(gt.omega0, gt.eigen, gt.support, spec.innovation, spec)


def sample(gt: GroundTruth, n: int, seed: int, innovation: str | None = None) -> list[np.ndarray]:
    """Draw ``n`` tensors ``Sigma_0^{1/2} Z``; sample i uses stream ``derive_seed(seed, i)``."""
    if n < 1:
        raise ValueError("need n >= 1")
    gt.eigen.require_pd()
    kind = innovation or gt.innovation
    dims = gt.dims
    out = []
    for i in range(n):
        z = _rng.innovations(kind, _rng.stream(_rng.derive_seed(seed, i)), dims.p).reshape(dims.d)
        out.append(apply_inverse_sqrt(gt.eigen, z))
    return out


def stack_samples(samples: Sequence[np.ndarray]) -> np.ndarray:
    """Stack n samples into one order-(L+1) tensor with leading mode n."""
    if not samples:
        raise ValueError("no samples to stack")
    shapes = {np.shape(s) for s in samples}
    if len(shapes) != 1:
        raise ValueError(f"samples have mixed dims: {sorted(shapes)}")
    return np.stack([np.asarray(s, dtype=np.float64) for s in samples], axis=0)

