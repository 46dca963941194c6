"""CSV factor tables and JSON summaries.

Factor tables have one row per mode index and two columns per component,
``<l>_re`` and ``<l>_im``. Numbers are written with ``repr`` precision and a
'.' decimal separator so files are locale-independent and round-trip
exactly.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np


def _fmt(v: float) -> str:
    return repr(float(v))


def write_factor_csv(path, mat) -> None:
    mat = np.atleast_2d(np.asarray(mat, dtype=np.complex128))
    header = [f"{l}_{part}" for l in range(mat.shape[1]) for part in ("re", "im")]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in mat:
            w.writerow([_fmt(x) for v in row for x in (v.real, v.imag)])


def read_factor_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty factor table")
    header, body = rows[0], rows[1:]
    if len(header) % 2 or any(not h.endswith(("_re", "_im")) for h in header):
        raise ValueError(f"{path}: header must be pairs of <l>_re,<l>_im columns")
    vals = np.array(body, dtype=float).reshape(len(body), len(header))
    return vals[:, 0::2] + 1j * vals[:, 1::2]


def write_real_csv(path, mat, header=None) -> None:
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header if header is not None else [str(i) for i in range(mat.shape[1])])
        for row in mat:
            w.writerow([_fmt(v) for v in row])


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(to_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def cp_summary(model) -> dict:
    return {
        "method": "parafac",
        "rank": model.rank,
        "fit": model.fit,
        "iterations": model.iterations,
        "init": model.init,
        "fit_history": model.fit_history,
    }


def pca_summary(model, max_scree: int = 50) -> dict:
    return {
        "method": "pca",
        "n_components": model.n_components,
        "scree": model.scree[:max_scree],
        "singular_values": model.factors.S[:max_scree],
    }


def write_cp_model(out_dir, model, prefix: str = "cp") -> None:
    out = Path(out_dir)
    for name in ("d", "s", "g"):
        write_factor_csv(out / f"{prefix}_{name}.csv", getattr(model, name))
    write_json(out / f"{prefix}_summary.json", cp_summary(model))


def write_pca_model(out_dir, model, prefix: str = "pca") -> None:
    out = Path(out_dir)
    n = model.n_components
    write_factor_csv(out / f"{prefix}_U.csv", model.factors.U[:, :n])
    write_factor_csv(out / f"{prefix}_V.csv", model.factors.V[:, :n])
    write_factor_csv(out / f"{prefix}_trajectories.csv", model.trajectories)
    write_json(out / f"{prefix}_summary.json", pca_summary(model))
