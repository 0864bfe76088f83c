"""1-Lipschitz curves on [0, ell] as uniform-time polylines, and weighted ensembles of them.

Curve integrals use the trapezoidal Riemann-Stieltjes sum
    sum_k <(phi(g(t_{k-1})) + phi(g(t_k))) / 2, g(t_k) - g(t_{k-1})>,
which negates term by term under reversal of the sample order.
"""
import logging
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .charge import ScalarAtomicMeasure, fixed_order_sum
from .errors import (DegenerateCurveError, DimensionMismatchError, EmptyPanelError,
                     InvalidParameterError, LipschitzViolationError, UnsupportedRegionError)
from .fields import FieldPanel, TestFunction, VectorField
from .regions import Region

logger = logging.getLogger(__name__)

LIPSCHITZ_SLACK = 1e-9
PATH_CHUNK = 512


def _check_lipschitz(paths: np.ndarray, ell: float):
    m = paths.shape[-2] - 1
    steps = np.linalg.norm(np.diff(paths, axis=-2), axis=-1)
    limit = ell / m * (1.0 + LIPSCHITZ_SLACK)
    if steps.size and steps.max() > limit:
        raise LipschitzViolationError(
            f"step of length {steps.max():.17g} exceeds ell/m = {ell / m:.17g}")


class Curve:
    """gamma sampled at t_k = k * ell / m, k = 0..m."""

    def __init__(self, ell: float, points):
        pts = np.array(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 2:
            raise DegenerateCurveError(f"a curve needs at least two samples, got shape {pts.shape}")
        if not ell > 0:
            raise InvalidParameterError(f"ell must be positive, got {ell}")
        if not np.all(np.isfinite(pts)):
            raise InvalidParameterError("curve samples must be finite")
        _check_lipschitz(pts, float(ell))
        pts.setflags(write=False)
        self.ell = float(ell)
        self.points = pts

    @classmethod
    def sample(cls, func, ell: float, m: int) -> "Curve":
        """Samples func(t) (returning a point) on the uniform grid of [0, ell]."""
        times = np.arange(m + 1) * (ell / m)
        return cls(ell, np.array([np.atleast_1d(func(t)) for t in times]))

    @property
    def m(self) -> int:
        return self.points.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.m + 1) * (self.ell / self.m)

    @property
    def start(self) -> np.ndarray:
        return self.points[0]

    @property
    def end(self) -> np.ndarray:
        return self.points[-1]

    def reversed(self) -> "Curve":
        return Curve(self.ell, self.points[::-1])

    def __repr__(self):
        return f"<Curve dim={self.dim} m={self.m} ell={self.ell}>"


class CurveEnsemble:
    """Finite positive measure on K_ell: curves sharing ell, dim and m, with positive weights."""

    def __init__(self, ell: float, paths, weights, dim: Optional[int] = None, validate: bool = True):
        paths = np.asarray(paths, dtype=float)
        weights = np.asarray(weights, dtype=float).reshape(-1)
        if not ell > 0:
            raise InvalidParameterError(f"ell must be positive, got {ell}")
        if paths.size == 0:
            if dim is None:
                raise InvalidParameterError("dim is required for an empty ensemble")
            paths = np.zeros((0, 2, dim))
        if paths.ndim != 3 or paths.shape[1] < 2:
            raise DegenerateCurveError(f"paths must have shape (N, m+1, dim), got {paths.shape}")
        if dim is not None and paths.shape[2] != dim:
            raise DimensionMismatchError(f"paths in R^{paths.shape[2]}, expected R^{dim}")
        if paths.shape[0] != weights.size:
            raise DimensionMismatchError(f"{paths.shape[0]} curves but {weights.size} weights")
        if weights.size and not (np.all(weights > 0) and np.all(np.isfinite(weights))):
            raise InvalidParameterError("ensemble weights must be positive and finite")
        if validate:
            _check_lipschitz(paths, float(ell))
        paths = np.ascontiguousarray(paths)
        paths.setflags(write=False)
        weights = np.ascontiguousarray(weights)
        weights.setflags(write=False)
        self.ell = float(ell)
        self.paths = paths
        self.weights = weights

    @classmethod
    def from_curves(cls, curves: Sequence[Curve], weights: Iterable[float], dim: int,
                    ell: Optional[float] = None) -> "CurveEnsemble":
        curves = list(curves)
        weights = np.asarray(list(weights), dtype=float)
        if not curves:
            if ell is None:
                raise InvalidParameterError("ell is required for an empty ensemble")
            return cls(ell, np.zeros((0, 2, dim)), weights, dim=dim)
        ell = curves[0].ell if ell is None else ell
        if any(c.ell != ell or c.dim != dim for c in curves):
            raise DimensionMismatchError("ensemble curves must share ell and dim")
        if len({c.m for c in curves}) != 1:
            raise InvalidParameterError("ensemble curves must share the sample count m")
        return cls(ell, np.stack([c.points for c in curves]), weights, dim=dim, validate=False)

    @property
    def dim(self) -> int:
        return self.paths.shape[2]

    @property
    def m(self) -> int:
        return self.paths.shape[1] - 1

    def __len__(self) -> int:
        return self.paths.shape[0]

    def curve(self, j: int) -> Curve:
        return Curve(self.ell, self.paths[j])

    @property
    def curves(self) -> List[Curve]:
        return [self.curve(j) for j in range(len(self))]

    def __repr__(self):
        return f"<CurveEnsemble curves={len(self)} dim={self.dim} ell={self.ell}>"


def _path_actions(paths: np.ndarray, phi: VectorField) -> np.ndarray:
    if phi.dim != paths.shape[-1]:
        raise DimensionMismatchError(f"field in R^{phi.dim}, curves in R^{paths.shape[-1]}")
    out = np.empty(paths.shape[0])
    for lo in range(0, paths.shape[0], PATH_CHUNK):
        block = paths[lo:lo + PATH_CHUNK]
        vals = phi.value(block.reshape(-1, block.shape[-1])).reshape(block.shape)
        avg = 0.5 * (vals[:, 1:] + vals[:, :-1])
        terms = np.sum(avg * np.diff(block, axis=1), axis=2)
        out[lo:lo + PATH_CHUNK] = np.sum(terms, axis=1)
    return out


def curve_action(gamma: Curve, phi: VectorField) -> float:
    """<[gamma], phi> at the curve's native resolution."""
    return float(_path_actions(gamma.points[None], phi)[0])


def length(gamma: Curve) -> float:
    return fixed_order_sum(np.linalg.norm(np.diff(gamma.points, axis=0), axis=1))


def path_lengths(nu: CurveEnsemble) -> np.ndarray:
    return np.sum(np.linalg.norm(np.diff(nu.paths, axis=1), axis=2), axis=1)


def curve_divergence_action(gamma: Curve, psi: TestFunction) -> float:
    """<Div([gamma]), psi> = psi(gamma(0)) - psi(gamma(ell))."""
    if psi.dim != gamma.dim:
        raise DimensionMismatchError(f"function in R^{psi.dim}, curve in R^{gamma.dim}")
    return float(psi.value(gamma.start)) - float(psi.value(gamma.end))


def curve_actions(nu: CurveEnsemble, phi: VectorField) -> np.ndarray:
    """Per-curve actions, in ensemble order."""
    if len(nu) == 0:
        return np.zeros(0)
    return _path_actions(nu.paths, phi)


def ensemble_action(nu: CurveEnsemble, phi: VectorField) -> float:
    """<int [gamma] dnu, phi> = sum_j w_j <[gamma_j], phi>."""
    if len(nu) == 0:
        return 0.0
    return fixed_order_sum(nu.weights * _path_actions(nu.paths, phi))


def ensemble_mass(nu: CurveEnsemble) -> float:
    if len(nu) == 0:
        return 0.0
    return fixed_order_sum(nu.weights)


def ensemble_concat(a: CurveEnsemble, b: CurveEnsemble) -> CurveEnsemble:
    if a.ell != b.ell or a.dim != b.dim:
        raise DimensionMismatchError("only ensembles sharing ell and dim concatenate")
    if len(a) == 0:
        return b
    if len(b) == 0:
        return a
    if a.m != b.m:
        raise InvalidParameterError(f"sample counts differ: {a.m} vs {b.m}")
    return CurveEnsemble(a.ell, np.concatenate([a.paths, b.paths]),
                         np.concatenate([a.weights, b.weights]), dim=a.dim, validate=False)


def _occupation(paths: np.ndarray, ell: float, region) -> np.ndarray:
    if not isinstance(region, Region):
        raise UnsupportedRegionError(f"occupation times need a Ball or HalfSpace, got {type(region).__name__}")
    if region.dim != paths.shape[-1]:
        raise DimensionMismatchError(f"region in R^{region.dim}, curves in R^{paths.shape[-1]}")
    dt = ell / (paths.shape[1] - 1)
    frac = region.segment_fraction(paths[:, :-1], paths[:, 1:])
    return np.sum(frac, axis=1) * dt


def occupation_time(gamma: Curve, region: Region) -> float:
    """lambda^1-time the polyline spends in the region."""
    return float(_occupation(gamma.points[None], gamma.ell, region)[0])


def occupation_times(nu: CurveEnsemble, region: Region) -> np.ndarray:
    """Per-curve time in the region, in ensemble order."""
    if len(nu) == 0:
        return np.zeros(0)
    return _occupation(nu.paths, nu.ell, region)


def ensemble_occupation(nu: CurveEnsemble, region: Region) -> float:
    """sum_j w_j * time(gamma_j in A); equals ||mu||(A) for decompositions with Var([gamma]) = L(gamma)."""
    if len(nu) == 0:
        return 0.0
    return fixed_order_sum(nu.weights * occupation_times(nu, region))


def variation_bracket(gamma: Curve, panel: FieldPanel) -> Tuple[float, float]:
    """Certified bounds lower <= Var([gamma]) <= upper.

    Panel fields satisfy |phi| <= 1, and so do their negatives, hence the absolute value.
    """
    if not panel.fields:
        raise EmptyPanelError("variation_bracket needs at least one panel field")
    lower = max(abs(curve_action(gamma, phi)) for phi in panel.fields)
    return lower, length(gamma)


def ensemble_divergence(nu: CurveEnsemble) -> ScalarAtomicMeasure:
    """Div(int [gamma] dnu) = sum_j w_j (delta_{gamma_j(0)} - delta_{gamma_j(ell)})."""
    if len(nu) == 0:
        return ScalarAtomicMeasure.empty(nu.dim)
    pos = np.vstack([nu.paths[:, 0], nu.paths[:, -1]])
    masses = np.concatenate([nu.weights, -nu.weights])
    return ScalarAtomicMeasure(pos, masses, dim=nu.dim)
