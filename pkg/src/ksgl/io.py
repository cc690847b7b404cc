"""File formats: factor CSVs, JSON bundles, experiment tables.

CSV files use ',' separators, '.' decimals, LF line endings and UTF-8.
Floats are written with 17 significant digits so they round-trip exactly.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .gram import FactorGrams
from .ksum import KroneckerSum
from .tensor import as_dims


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    return str(x)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    Path(path).write_text(csv_text(header, rows), encoding="utf-8", newline="")


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_matrix_csv(path, a: np.ndarray) -> None:
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    text = "".join(",".join(fmt(v) for v in row) + "\n" for row in a)
    Path(path).write_text(text, encoding="utf-8", newline="")


def read_matrix_csv(path) -> np.ndarray:
    rows = [line.split(",") for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]
    a = np.array([[float(v) for v in row] for row in rows], dtype=np.float64)
    return a


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8", newline="")


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def ksum_to_json(K: KroneckerSum) -> dict:
    return {"dims": list(K.dims.d), "factors": [f.tolist() for f in K.factors]}


def ksum_from_json(obj: dict) -> KroneckerSum:
    try:
        dims = as_dims(obj["dims"])
        factors = [np.asarray(f, dtype=np.float64).reshape(dk, dk) for f, dk in zip(obj["factors"], dims)]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed Kronecker-sum bundle: {exc}") from None
    return KroneckerSum(factors, dims)


def write_ksum_bundle(out_dir, K: KroneckerSum, stem: str = "factor", extra: dict | None = None) -> Path:
    """Write ``<stem>_<k>.csv`` per factor plus ``<stem>.json`` holding dims, factors and ``extra``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for k, f in enumerate(K.factors):
        name = f"{stem}_{k + 1}.csv"
        write_matrix_csv(out / name, f)
        files.append(name)
    bundle = ksum_to_json(K)
    bundle["factor_csv"] = files
    if extra:
        bundle.update(extra)
    path = out / f"{stem}.json"
    write_json(path, bundle)
    return path


def read_ksum_bundle(path) -> KroneckerSum:
    path = Path(path)
    obj = read_json(path)
    if "factors" not in obj and "factor_csv" in obj:
        obj = dict(obj, factors=[read_matrix_csv(path.parent / name) for name in obj["factor_csv"]])
    return ksum_from_json(obj)


def write_grams(out_dir, g: FactorGrams) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for k, S in enumerate(g.S):
        write_matrix_csv(out / f"gram_{k + 1}.csv", S)
    write_json(out / "grams.json", {"dims": list(g.dims.d), "n": g.n,
                                    "gram_csv": [f"gram_{k + 1}.csv" for k in range(g.dims.L)]})


def read_grams(path) -> FactorGrams:
    path = Path(path)
    obj = read_json(path)
    dims = as_dims(obj["dims"])
    S = tuple(read_matrix_csv(path.parent / name) for name in obj["gram_csv"])
    return FactorGrams(dims, int(obj["n"]), S)
