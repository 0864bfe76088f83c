"""JSON files for charges, scalar measures, ensembles and reports; CSV export of curve samples.

Doubles are written with Python's shortest round-trip repr, so write-then-read
reproduces every coordinate bit for bit.
"""
import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np

from .charge import AtomicCharge, ScalarAtomicMeasure
from .curves import CurveEnsemble
from .errors import FileFormatError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _floats(values) -> list:
    return [float(v) for v in np.asarray(values).reshape(-1)]


def _load_json(path: PathLike) -> Dict[str, Any]:
    with open(path, 'r', encoding='utf-8') as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise FileFormatError(f"{path}: not valid JSON ({e})") from e
        except UnicodeDecodeError as e:
            raise FileFormatError(f"{path}: not UTF-8 text ({e.reason})") from e
    if not isinstance(data, dict):
        raise FileFormatError(f"{path}: expected a JSON object at the top level")
    return data


def _numpy_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def _dump_json(path: PathLike, data: Dict[str, Any]):
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(data, f, indent=4, default=_numpy_default)


def charge_to_dict(mu: AtomicCharge) -> Dict[str, Any]:
    return {"dim": mu.dim,
            "atoms": [{"x": _floats(a.position), "w": _floats(a.weight)} for a in mu.atoms]}


def charge_from_dict(data: Dict[str, Any]) -> AtomicCharge:
    try:
        dim = int(data["dim"])
        atoms = data["atoms"]
        pos = np.array([a["x"] for a in atoms], dtype=float).reshape(-1, dim)
        wts = np.array([a["w"] for a in atoms], dtype=float).reshape(-1, dim)
        return AtomicCharge(pos, wts, dim=dim)
    except (KeyError, TypeError, ValueError) as e:
        raise FileFormatError(f"malformed charge: {e}") from e


def measure_to_dict(sigma: ScalarAtomicMeasure) -> Dict[str, Any]:
    return {"dim": sigma.dim,
            "atoms": [{"x": _floats(p), "m": float(m)} for p, m in zip(sigma.positions, sigma.masses)]}


def measure_from_dict(data: Dict[str, Any]) -> ScalarAtomicMeasure:
    try:
        dim = int(data["dim"])
        atoms = data["atoms"]
        pos = np.array([a["x"] for a in atoms], dtype=float).reshape(-1, dim)
        masses = np.array([float(a["m"]) for a in atoms], dtype=float)
        return ScalarAtomicMeasure(pos, masses, dim=dim)
    except (KeyError, TypeError, ValueError) as e:
        raise FileFormatError(f"malformed scalar measure: {e}") from e


def ensemble_to_dict(nu: CurveEnsemble) -> Dict[str, Any]:
    return {"ell": nu.ell, "dim": nu.dim,
            "curves": [{"w": float(w), "pts": [_floats(p) for p in path]}
                       for w, path in zip(nu.weights, nu.paths)]}


def ensemble_from_dict(data: Dict[str, Any]) -> CurveEnsemble:
    try:
        ell = float(data["ell"])
        dim = int(data["dim"])
        curves = data["curves"]
        weights = np.array([float(c["w"]) for c in curves], dtype=float)
        if not curves:
            return CurveEnsemble(ell, np.zeros((0, 2, dim)), weights, dim=dim)
        paths = np.array([c["pts"] for c in curves], dtype=float)
        return CurveEnsemble(ell, paths, weights, dim=dim)
    except (KeyError, TypeError, ValueError) as e:
        raise FileFormatError(f"malformed ensemble: {e}") from e


def write_charge(path: PathLike, mu: AtomicCharge):
    _dump_json(path, charge_to_dict(mu))


def read_charge(path: PathLike) -> AtomicCharge:
    return charge_from_dict(_load_json(path))


def write_measure(path: PathLike, sigma: ScalarAtomicMeasure):
    _dump_json(path, measure_to_dict(sigma))


def read_measure(path: PathLike) -> ScalarAtomicMeasure:
    return measure_from_dict(_load_json(path))


def write_ensemble(path: PathLike, nu: CurveEnsemble):
    _dump_json(path, ensemble_to_dict(nu))
    logger.debug(f"Wrote {len(nu)} curves to {path}")


def read_ensemble(path: PathLike) -> CurveEnsemble:
    return ensemble_from_dict(_load_json(path))


def write_ensemble_csv(path: PathLike, nu: CurveEnsemble):
    """One row per (curve id, sample index): curve, k, t, weight, x0..x{n-1}."""
    dt = nu.ell / nu.m
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(["curve", "k", "t", "weight"] + [f"x{i}" for i in range(nu.dim)])
        for j, (w, path_pts) in enumerate(zip(nu.weights, nu.paths)):
            for k, point in enumerate(path_pts):
                writer.writerow([j, k, k * dt, float(w)] + _floats(point))


def write_report(path: PathLike, report: Dict[str, Any]):
    _dump_json(path, report)


def read_report(path: PathLike) -> Dict[str, Any]:
    return _load_json(path)
