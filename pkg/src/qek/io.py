"""File formats: kernel matrices with JSON sidecars, parameters, rankings."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .kernel import KernelMatrix

SYMMETRY_TOL = 1e-9


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_sidecar(path, meta: dict):
    with open(sidecar_path(path), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=_json_default)


def read_sidecar(path) -> dict | None:
    p = sidecar_path(path)
    if not p.exists():
        return None
    with open(p) as fh:
        return json.load(fh)


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"{type(o).__name__} is not JSON serializable")


def matrix_metadata(K: KernelMatrix, **extra) -> dict:
    meta = K.meta
    out = {
        "provenance": K.provenance,
        "shots": int(K.shots),
        "seed": meta.get("seed"),
        "n": K.n,
        "qubits": meta.get("num_qubits"),
        "layers": meta.get("num_layers"),
        "dataset-id": meta.get("dataset_id"),
        "theta-hash": meta.get("theta_hash"),
        "diagonal_measured": bool(K.diagonal_measured),
    }
    for key in ("strategy", "base_survival", "source_provenance", "n_clamped",
                "n_entries_outside_unit_interval"):
        if key in meta:
            out[key] = meta[key]
    out.update(extra)
    return out


def write_kernel_matrix(path, K: KernelMatrix, **extra):
    """Write ``K`` as a full CSV matrix plus its ``<path>.json`` sidecar."""
    np.savetxt(path, np.asarray(K), delimiter=",", fmt="%.17g")
    write_sidecar(path, matrix_metadata(K, **extra))


def read_kernel_matrix(path, provenance: str | None = None, num_qubits: int | None = None,
                       diagonal_measured: bool | None = None) -> KernelMatrix:
    """Read a kernel matrix CSV and its sidecar, if any.

    Without a sidecar the matrix is taken as an external DEVICE matrix
    whose diagonal was measured; keyword arguments override either source.
    """
    values = np.loadtxt(path, delimiter=",", ndmin=2)
    if values.shape[0] != values.shape[1]:
        raise ValueError(f"{path}: matrix is {values.shape[0]}x{values.shape[1]}, not square")
    asym = float(np.max(np.abs(values - values.T))) if values.size else 0.0
    if not asym <= SYMMETRY_TOL:
        raise ValueError(f"{path}: matrix is asymmetric (max |K - K^T| = {asym:.3g})")
    side = read_sidecar(path) or {}
    prov = provenance or side.get("provenance", "DEVICE")
    diag = diagonal_measured if diagonal_measured is not None else side.get("diagonal_measured", True)
    meta = {
        "num_qubits": num_qubits if num_qubits is not None else side.get("qubits"),
        "num_layers": side.get("layers"),
        "seed": side.get("seed"),
        "dataset_id": side.get("dataset-id"),
        "theta_hash": side.get("theta-hash"),
        "source_file": str(path),
    }
    return KernelMatrix(values, prov, int(side.get("shots") or 0), bool(diag), meta)


def write_params(path, theta, **meta):
    with open(path, "w") as fh:
        json.dump({"theta": np.asarray(theta, dtype=float).tolist(), **meta}, fh, indent=2,
                  default=_json_default)


def read_params(path) -> np.ndarray:
    with open(path) as fh:
        data = json.load(fh)
    if isinstance(data, list):
        return np.asarray(data, dtype=float)
    return np.asarray(data["theta"], dtype=float)


def _num(x) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def write_ranking(path_or_file, results):
    """Ranking table with columns strategy, alignment, q, feasible."""
    own = isinstance(path_or_file, (str, Path))
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh)
        w.writerow(["strategy", "alignment", "q", "feasible"])
        for r in results:
            w.writerow([str(r.strategy), _num(r.alignment), _num(r.q), str(r.feasible).lower()])
    finally:
        if own:
            fh.close()


def read_ranking(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["alignment"] = float(r["alignment"]) if r["alignment"] else math.nan
        r["q"] = float(r["q"]) if r["q"] else math.nan
        r["feasible"] = r["feasible"] == "true"
    return rows
