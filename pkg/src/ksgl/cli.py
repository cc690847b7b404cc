"""Command-line front end.

Exit codes: 0 success, 1 oracle-check failure, 2 config/input error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import contextlib
import datetime as _dt
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import rng as _rng
from .conc import SweepConfig, run_suite, suite_csv
from .experiments import SUMMARY_HEADER, TRIAL_HEADER, ExperimentConfig, run_rates
from .gram import constant_penalties, factor_grams, penalties, plugin_sigma_scale
from .io import (
    read_grams, read_json, read_ksum_bundle, write_csv, write_grams, write_json, write_ksum_bundle,
)
from .ksum import NotPositiveDefinite
from .metrics import bound_report, condition_number, error_report, support_metrics
from .model import GroundTruth, ModelSpec, from_factors, gen_model, sample
from .oracle import run_checks
from .solver import SolverConfig, SolverError, fit
from .tensor import read_tensor, write_tensor

log = logging.getLogger("ksgl")

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


class InputError(Exception):
    pass


def _load_json(path):
    if path is None:
        return {}
    try:
        return read_json(path)
    except FileNotFoundError:
        raise InputError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(out: Path, command: str, config: dict, started: float) -> None:
    write_json(out / "manifest.json", {
        "command": command,
        "config": config,
        "version": __version__,
        "started": _dt.datetime.fromtimestamp(started, _dt.timezone.utc).isoformat(),
        "elapsed_s": round(time.time() - started, 3),
    })


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("KSGL_THREADS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        raise InputError(f"KSGL_THREADS must be an integer, got {env!r}") from None


@contextlib.contextmanager
def _executor(n: int):
    if n <= 1:
        yield None
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=n) as ex:
            yield ex


def truth_json(gt: GroundTruth) -> dict:
    return {
        "dims": list(gt.dims.d),
        "s_k": list(gt.s_k),
        "s": gt.s,
        "support": [sorted([list(e) for e in sup]) for sup in gt.support],
        "min_eigsum": gt.eigen.min_eigsum,
        "max_eigsum": gt.eigen.max_eigsum,
        "kappa": condition_number(gt),
        "innovation": gt.innovation,
        "spec": gt.spec.to_json() if gt.spec is not None else None,
    }


def load_truth(path) -> GroundTruth:
    try:
        obj = read_json(path)
        K = read_ksum_bundle(path)
    except FileNotFoundError:
        raise InputError(f"no such file: {path}") from None
    gt = from_factors(K.factors, K.dims, obj.get("innovation", "gaussian"))
    spec = ModelSpec.from_json(obj["spec"]) if obj.get("spec") else None
    return GroundTruth(gt.omega0, gt.eigen, gt.support, gt.innovation, spec)


def cmd_gen_model(args) -> int:
    started = time.time()
    cfg = _load_json(args.config)
    model = cfg.get("model", cfg)
    if args.seed is not None:
        model = {**model, "seed": args.seed}
    spec = ModelSpec.from_json(model)
    gt = gen_model(spec)
    out = _out_dir(args)
    write_ksum_bundle(out, gt.omega0, stem="truth", extra=truth_json(gt))
    _manifest(out, "gen-model", spec.to_json(), started)
    print(f"wrote ground truth for dims {gt.dims} (s = {gt.s}, kappa = {condition_number(gt):.4g}) to {out}")
    return EXIT_OK


def cmd_sample(args) -> int:
    started = time.time()
    gt = load_truth(args.model)
    seed = args.seed if args.seed is not None else 0
    out = _out_dir(args)
    xs = sample(gt, args.n, seed, args.innovation)
    names = []
    for i, x in enumerate(xs):
        name = f"sample_{i:04d}.kstn"
        write_tensor(out / name, x)
        names.append(name)
    write_grams(out, factor_grams(xs))
    write_json(out / "samples.json", {"n": args.n, "seed": seed, "files": names})
    _manifest(out, "sample", {"model": str(args.model), "n": args.n, "seed": seed}, started)
    print(f"wrote {args.n} samples to {out}")
    return EXIT_OK


def _fit_inputs(args, gt):
    if args.grams:
        try:
            return read_grams(args.grams)
        except FileNotFoundError:
            raise InputError(f"no such file: {args.grams}") from None
    if args.samples:
        try:
            xs = [read_tensor(p) for p in args.samples]
        except FileNotFoundError as exc:
            raise InputError(f"no such file: {exc.filename}") from None
        return factor_grams(xs)
    if gt is None:
        raise InputError("fit needs --samples, --grams, or --model with --n to generate data")
    seed = args.seed if args.seed is not None else 0
    return factor_grams(sample(gt, args.n, seed))


def cmd_fit(args) -> int:
    started = time.time()
    cfg = _load_json(args.config)
    solver = SolverConfig.from_json(cfg.get("solver", {}))
    gt = load_truth(args.model) if args.model else None
    g = _fit_inputs(args, gt)
    if gt is not None and gt.dims != g.dims:
        raise InputError(f"data dims {g.dims} do not match model dims {gt.dims}")
    pen_cfg = cfg.get("penalties", {})
    if args.rho is not None:
        pen = constant_penalties(g.dims, args.rho)
    else:
        mode = pen_cfg.get("sigma_mode", "true" if gt is not None else "plugin")
        if mode == "true" and gt is None:
            raise InputError("sigma_mode 'true' needs --model")
        sigma = gt.sigma_norm if mode == "true" else plugin_sigma_scale(g)
        pen = penalties(g.dims, g.n, sigma, pen_cfg.get("epsilon", 0.5))
    res = fit(g, pen, solver)
    out = _out_dir(args)
    report = {
        "converged": res.converged, "status": res.status, "iterations": res.iterations,
        "kkt_residual": res.kkt_residual, "objective": res.objective_trace[-1],
        "rho": list(pen.rho), "n": g.n, "solver": solver.to_json(),
    }
    if gt is not None:
        report["errors"] = error_report(res.omega_hat, gt).to_json()
        report["bounds"] = bound_report(gt, g.n).to_json()
        report["support"] = [vars(s) for s in support_metrics(res.omega_hat, gt)]
    write_ksum_bundle(out, res.omega_hat, stem="omega_hat")
    write_csv(out / "objective_trace.csv", ["iteration", "objective"], enumerate(res.objective_trace))
    write_json(out / "result.json", report)
    _manifest(out, "fit", {"config": cfg, "rho": args.rho}, started)
    print(f"fit {res.status} after {res.iterations} iterations, kkt residual {res.kkt_residual:.3g}")
    return EXIT_OK if res.converged else EXIT_NUMERIC


def cmd_rates(args) -> int:
    started = time.time()
    obj = _load_json(args.config)
    if args.seed is not None:
        obj = {**obj, "master_seed": args.seed}
    cfg = ExperimentConfig.from_json(obj)
    if cfg.kind == "concentration":
        raise InputError("use the 'concentration' command for concentration sweeps")
    out = Path(args.out or cfg.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    with _executor(_threads(args)) as ex:
        trials, summary_rows, summary = run_rates(cfg, ex)
    write_csv(out / "trials.csv", TRIAL_HEADER, trials)
    write_csv(out / "summary.csv", SUMMARY_HEADER, summary_rows)
    write_json(out / "summary.json", summary)
    _manifest(out, "rates", obj, started)
    for key in sorted(k for k in summary if k.startswith("slope") or k.endswith("over_first")):
        print(f"{key}: {summary[key]:.4f}")
    return EXIT_OK


def cmd_concentration(args) -> int:
    started = time.time()
    obj = _load_json(args.config)
    master = int(args.seed if args.seed is not None else obj.pop("master_seed", 0))
    obj.pop("master_seed", None)
    obj.pop("kind", None)
    obj.pop("output_dir", None)
    cfg = SweepConfig.from_json(obj)
    out = _out_dir(args)
    with _executor(_threads(args)) as ex:
        rows = run_suite(cfg, master, ex)
    (out / "concentration.csv").write_text(suite_csv(rows), encoding="utf-8", newline="")
    _manifest(out, "concentration", {**obj, "master_seed": master}, started)
    print(f"wrote {len(rows)} rows to {out / 'concentration.csv'}")
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    if args.max_p > 4096:
        raise InputError("--max-p must be at most 4096")
    results = run_checks(args.max_p, instances=args.instances, seed=args.seed or 0,
                         inject=os.environ.get("KSGL_FAULT") or None)
    if not results:
        log.warning("max_p = %d admits no test instances; nothing was checked", args.max_p)
    for r in results:
        if not r.ok:
            print(f"FAIL {r.name} dims={list(r.dims)} error={r.error:.3e} tol={r.tol:.0e}")
            return EXIT_CHECK
    print(f"PASS {len(results)} checks (max_p = {args.max_p})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON configuration file")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("--threads", type=int, help="worker processes (default $KSGL_THREADS or 1)")

    p = argparse.ArgumentParser(prog="ksgl", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen-model", parents=[common], help="generate a ground-truth model")
    s.set_defaults(func=cmd_gen_model, out_required=True)

    s = sub.add_parser("sample", parents=[common], help="draw tensor samples from a model")
    s.add_argument("--model", type=Path, required=True, help="truth.json from gen-model")
    s.add_argument("--n", type=int, default=1)
    s.add_argument("--innovation", choices=sorted(_rng.INNOVATIONS))
    s.set_defaults(func=cmd_sample, out_required=True)

    s = sub.add_parser("fit", parents=[common], help="fit the penalized estimator")
    s.add_argument("--model", type=Path, help="ground truth (enables error reports)")
    s.add_argument("--samples", type=Path, nargs="+", help="KSTN tensor files")
    s.add_argument("--grams", type=Path, help="grams.json from the sample command")
    s.add_argument("--n", type=int, default=1, help="samples to generate when none are given")
    s.add_argument("--rho", type=float, help="fixed penalty for every mode")
    s.set_defaults(func=cmd_fit, out_required=True)

    s = sub.add_parser("rates", parents=[common], help="run a convergence-rate sweep")
    s.set_defaults(func=cmd_rates, out_required=False)

    s = sub.add_parser("concentration", parents=[common], help="run a concentration sweep")
    s.set_defaults(func=cmd_concentration, out_required=True)

    s = sub.add_parser("oracle-check", parents=[common], help="compare factor routines to dense oracles")
    s.add_argument("--max-p", type=int, default=64)
    s.add_argument("--instances", type=int, default=5)
    s.set_defaults(func=cmd_oracle_check, out_required=False)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.out_required and not args.out:
        parser.error(f"{args.command} needs --out")
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        parser.error("--seed must be an unsigned 64-bit integer")
    try:
        return args.func(args)
    except (SolverError, NotPositiveDefinite, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
