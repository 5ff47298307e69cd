"""Deterministic JSON for paths, quadruples, points, and reports.

Matrices serialize entrywise as [re, im] pairs; floats keep their
shortest round-trip decimal form (Python repr), and every object is
emitted with a fixed key order, so identical inputs produce
byte-identical artifacts.
"""

from __future__ import annotations

import json
from typing import Any

import numpy as np

from .moduli import MetricReport, ModuliPoint
from .nahm import NahmQuadruple, Path


def matrix_to_json(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


def matrix_from_json(data: list) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 3 or arr.shape[-1] != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"expected an n x n x 2 nested list, got shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def path_to_json(p: Path) -> dict:
    return {
        "n": p.n,
        "N": p.N,
        "role": p.role,
        "samples": [matrix_to_json(s) for s in p.samples],
    }


def path_from_json(data: dict) -> Path:
    samples = np.stack([matrix_from_json(s) for s in data["samples"]])
    if samples.shape[0] != data["N"] + 1 or samples.shape[1] != data["n"]:
        raise ValueError("sample array does not match declared n, N")
    return Path(samples, data["role"])


def quadruple_to_json(a: NahmQuadruple, residuals: dict | None = None) -> dict:
    out = {
        "n": a.n,
        "N": a.N,
        "components": {
            f"a{i}": [matrix_to_json(s) for s in a.samples[i]] for i in range(4)
        },
    }
    if residuals is not None:
        out["residuals"] = {k: float(v) for k, v in residuals.items()}
    return out


def quadruple_from_json(data: dict) -> NahmQuadruple:
    comps = [
        np.stack([matrix_from_json(s) for s in data["components"][f"a{i}"]])
        for i in range(4)
    ]
    return NahmQuadruple(np.stack(comps))


def point_to_json(p: ModuliPoint) -> dict:
    return {"U": matrix_to_json(p.U), "eta": matrix_to_json(p.eta)}


def point_from_json(data: dict) -> ModuliPoint:
    try:
        return ModuliPoint(matrix_from_json(data["U"]), matrix_from_json(data["eta"]))
    except KeyError as exc:
        raise ValueError(f"point JSON missing field {exc}") from exc


def _real_matrix(m: np.ndarray) -> list:
    return [[float(v) for v in row] for row in np.asarray(m)]


def metric_report_to_json(r: MetricReport) -> dict:
    return {
        "point": point_to_json(r.point),
        "N": r.N,
        "extrapolated": r.extrapolated,
        "labels": list(r.labels),
        "gram": _real_matrix(r.gram),
        "omega1": _real_matrix(r.omega1),
        "omega2": _real_matrix(r.omega2),
        "omega3": _real_matrix(r.omega3),
        "omega_c_re": _real_matrix(r.omega_c.real),
        "omega_c_im": _real_matrix(r.omega_c.imag),
        "residuals": _plain(r.residuals),
    }


def _plain(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps(obj: Any) -> str:
    """Deterministic JSON text: fixed insertion order, repr floats."""
    return json.dumps(_plain(obj), indent=2, sort_keys=False, allow_nan=False)


def write_json(path: str, obj: Any) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(obj))
        fh.write("\n")
