"""Rate experiments: sweep dims / n, fit each trial, tabulate errors against bounds."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .gram import factor_grams, penalties, plugin_sigma_scale
from .metrics import bound_report, error_report, support_metrics
from .model import ModelSpec, gen_model, sample
from .solver import SolverConfig, fit
from .tensor import as_dims

KINDS = ("rates_L2_bounded", "rates_cubic_slope", "rates_n_scaling", "concentration", "single_fit")


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    dims: tuple[tuple[int, ...], ...]
    n: tuple[int, ...] = (1,)
    trials: int = 1
    model: dict = field(default_factory=dict)
    solver: SolverConfig = field(default_factory=SolverConfig)
    sigma_mode: str = "true"
    epsilon: float = 0.5
    innovations: tuple[str, ...] = ("gaussian",)
    output_dir: str | None = None
    master_seed: int = 0

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        known = {"kind", "dims", "n", "trials", "model", "solver", "penalties",
                 "innovations", "output_dir", "master_seed"}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown experiment fields: {sorted(unknown)}")
        kind = obj.get("kind")
        if kind not in KINDS:
            raise ValueError(f"experiment kind must be one of {KINDS}, got {kind!r}")
        dims = obj.get("dims")
        if not dims:
            raise ValueError("experiment needs a nonempty 'dims' sweep list")
        if isinstance(dims[0], int):
            dims = [dims]
        n = obj.get("n", [1])
        n = [n] if isinstance(n, int) else n
        pen = dict(obj.get("penalties", {}))
        unknown = set(pen) - {"sigma_mode", "epsilon"}
        if unknown:
            raise ValueError(f"unknown penalty fields: {sorted(unknown)}")
        model = dict(obj.get("model", {}))
        innovations = obj.get("innovations", [model.pop("innovation", "gaussian")])
        cfg = cls(
            kind=kind,
            dims=tuple(as_dims(d).d for d in dims),
            n=tuple(int(x) for x in n),
            trials=int(obj.get("trials", 1)),
            model=model,
            solver=SolverConfig.from_json(obj.get("solver")),
            sigma_mode=str(pen.get("sigma_mode", "true")),
            epsilon=float(pen.get("epsilon", 0.5)),
            innovations=tuple(innovations),
            output_dir=obj.get("output_dir"),
            master_seed=int(obj.get("master_seed", 0)),
        )
        if cfg.trials < 1:
            raise ValueError("trials must be >= 1")
        if not cfg.n or any(x < 1 for x in cfg.n):
            raise ValueError("'n' must be a nonempty list of positive counts")
        if cfg.sigma_mode not in ("true", "plugin"):
            raise ValueError("penalties.sigma_mode must be 'true' or 'plugin'")
        if not 0 < cfg.epsilon < 1:
            raise ValueError("penalties.epsilon must lie in (0, 1)")
        if "dims" in model or "seed" in model:
            raise ValueError("model.dims and model.seed are set by the sweep")
        # validate the model block once up front
        ModelSpec.from_json({**model, "dims": list(cfg.dims[0]), "innovation": cfg.innovations[0]})
        return cfg

    def points(self):
        return list(itertools.product(self.dims, self.n, self.innovations))


TRIAL_HEADER = [
    "point", "L", "dims", "p", "n", "innovation", "trial", "seed",
    "iterations", "converged", "kkt_residual",
    "frob_abs", "op_abs", "frob_rel_op", "op_rel", "frob_rel",
    "main_frob", "main_op", "orig_frob", "orig_op", "cubic", "aspect", "kappa", "s", "a3_satisfied",
    "support_f1",
]

SUMMARY_METRICS = ["frob_rel_op", "op_rel", "frob_rel", "main_op", "orig_op", "iterations"]
SUMMARY_HEADER = ["point", "L", "dims", "p", "n", "innovation", "trials"] + [
    f"{stat}_{name}" for name in SUMMARY_METRICS for stat in ("mean", "std")
] + ["orig_over_main_op"]


def run_trial(model: dict, dims, n: int, innovation: str, seed: int,
              solver: SolverConfig, sigma_mode: str, epsilon: float) -> dict:
    spec = ModelSpec.from_json({**model, "dims": list(dims), "innovation": innovation,
                                "seed": _rng.derive_seed(seed, 0)})
    gt = gen_model(spec)
    g = factor_grams(sample(gt, n, _rng.derive_seed(seed, 1)))
    sigma = gt.sigma_norm if sigma_mode == "true" else plugin_sigma_scale(g)
    pen = penalties(gt.dims, n, sigma, epsilon)
    res = fit(g, pen, solver)
    err = error_report(res.omega_hat, gt)
    bnd = bound_report(gt, n)
    f1 = float(np.mean([s.f1 for s in support_metrics(res.omega_hat, gt)]))
    return {
        "iterations": res.iterations, "converged": res.converged, "kkt_residual": res.kkt_residual,
        **err.to_json(), **bnd.to_json(), "support_f1": f1,
    }


def loglog_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    A = np.vstack([lx, np.ones_like(lx)]).T
    return float(np.linalg.lstsq(A, ly, rcond=None)[0][0])


def run_rates(cfg: ExperimentConfig, executor=None) -> tuple[list[list], list[list], dict]:
    """Returns (trial rows, summary rows, sweep-level summary)."""
    jobs = []
    for point, (dims, n, innovation) in enumerate(cfg.points()):
        for trial in range(cfg.trials):
            jobs.append((point, dims, n, innovation, trial, _rng.derive_seed(cfg.master_seed, point, trial)))
    mapper = executor.map if executor is not None else map
    results = list(mapper(
        run_trial,
        [cfg.model] * len(jobs), [j[1] for j in jobs], [j[2] for j in jobs], [j[3] for j in jobs],
        [j[5] for j in jobs], [cfg.solver] * len(jobs), [cfg.sigma_mode] * len(jobs), [cfg.epsilon] * len(jobs),
    ))

    trial_rows = []
    per_point: dict[int, list[dict]] = {}
    for (point, dims, n, innovation, trial, seed), r in zip(jobs, results):
        p = int(np.prod(dims))
        trial_rows.append([point, len(dims), "x".join(map(str, dims)), p, n, innovation, trial, seed]
                          + [r[h] for h in TRIAL_HEADER[8:]])
        per_point.setdefault(point, []).append(r)

    summary_rows = []
    means: dict[str, list[float]] = {name: [] for name in SUMMARY_METRICS}
    ps, ns, ratios = [], [], []
    for point, (dims, n, innovation) in enumerate(cfg.points()):
        rs = per_point[point]
        p = int(np.prod(dims))
        row = [point, len(dims), "x".join(map(str, dims)), p, n, innovation, len(rs)]
        for name in SUMMARY_METRICS:
            vals = np.array([r[name] for r in rs], dtype=float)
            mean = float(np.mean(vals))
            row += [mean, float(np.std(vals))]
            means[name].append(mean)
        ratio = float(np.mean([r["orig_op"] / r["main_op"] for r in rs]))
        row.append(ratio)
        ratios.append(ratio)
        ps.append(p)
        ns.append(n)
        summary_rows.append(row)

    summary = {"kind": cfg.kind, "points": len(summary_rows), "means": means,
               "orig_over_main_op": ratios, "p": ps, "n": ns,
               "all_converged": all(r["converged"] for r in results)}
    if len(set(ps)) > 1:
        summary["slope_op_rel_vs_p"] = loglog_slope(ps, means["op_rel"])
        summary["slope_frob_rel_vs_p"] = loglog_slope(ps, means["frob_rel"])
    if len(set(ns)) > 1:
        summary["slope_frob_rel_vs_n"] = loglog_slope(ns, means["frob_rel"])
        summary["slope_op_rel_vs_n"] = loglog_slope(ns, means["op_rel"])
    if len(summary_rows) > 1:
        first, last = means["frob_rel_op"][0], means["frob_rel_op"][-1]
        summary["frob_rel_op_last_over_first"] = last / first if first > 0 else math.inf
    return trial_rows, summary_rows, summary
